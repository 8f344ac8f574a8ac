import json
import random
import time

import pytest

from mods.corpus import Document, DebateEntry
from mods.llm import ChatResponse, ScriptedBackend, StructuredOutputError, UsageLedger, render
from mods.metrics import outline_stats
from mods.pipeline import (
    AgendaError,
    ConfigError,
    Outline,
    OutlineEntry,
    OutlineSection,
    Perspective,
    PipelineConfig,
    RunReport,
    SpeakerError,
    SummaryError,
    Topic,
    build_outline,
    export_outline,
    make_biographies,
    outline_from_dict,
    outline_to_dict,
    plan_agenda,
    pooled_contexts,
    run,
    run_baseline,
    run_mods,
    select_and_tailor,
    speaker_respond,
    summarize_outline,
    summary_from_dict,
    summary_from_markdown,
    summary_to_dict,
    summary_to_markdown,
)
from mods.pipeline.types import ABLATIONS, BASELINES, MODES, NO_PERSPECTIVES

from .helpers import expected_baseline_calls, expected_mods_calls
from .test_retrieval import oracle_order

TOPIC = Topic(0, "Earning potential and the legal job market")


def scripted(**tables):
    return ScriptedBackend({shape.replace("_", "-"): table for shape, table in tables.items()})


# -- config ----------------------------------------------------------------------

def test_config_rules():
    assert PipelineConfig().mode == "mods_topic"
    with pytest.raises(ConfigError, match="mutually exclusive"):
        PipelineConfig(mode="mods_all", baseline="rag_all")
    with pytest.raises(ConfigError):
        PipelineConfig(m=1)
    with pytest.raises(ConfigError, match="unknown ablation"):
        PipelineConfig(ablations={"no_fun"})
    with pytest.raises(ConfigError):
        PipelineConfig(baseline="rag_all", ablations={"no_mod"})
    assert PipelineConfig(baseline="hierarchical").mode is None


# -- biographies and agenda ----------------------------------------------------------

def test_biographies_one_per_document(law_entry):
    bios = make_biographies(law_entry, law_entry.query, 3)
    assert [b.doc_id for b in bios] == [1, 2, 3, 4, 5]
    assert all(len(b.contexts.items) <= 3 for b in bios)
    assert len(bios[3].contexts.items) == 2
    for b, d in zip(bios, law_entry.documents):
        assert b.contexts.indices == oracle_order(list(d.paragraphs), law_entry.query)[:3]


def test_agenda_returns_canned_topics_in_order(law_entry, backend):
    bios = make_biographies(law_entry, law_entry.query)
    topics = plan_agenda(law_entry.query, bios, 3, backend)
    assert [t.index for t in topics] == [0, 1, 2]
    assert topics[0] == TOPIC


def test_agenda_with_wrong_count_fails_after_retries(law_entry):
    b = scripted(topic_list={"*": render(["a", "b"], "topic-list")})
    ledger = UsageLedger()
    with pytest.raises(AgendaError, match="topic count mismatch"):
        plan_agenda(law_entry.query, make_biographies(law_entry, law_entry.query), 3, b, ledger=ledger)
    assert ledger.calls("agenda") == 3


# -- moderator -------------------------------------------------------------------------

def test_moderator_picks_two_speakers(law_entry):
    b = scripted(speaker_selection={"*": json.dumps({"speakers": [
        {"query": "market trends", "id": 1}, {"query": "Ivy League placement", "id": 3}]})})
    bios = make_biographies(law_entry, TOPIC.title)
    sel = select_and_tailor(law_entry.query, TOPIC, bios, PipelineConfig(), b)
    assert sel.speakers == ((1, "market trends"), (3, "Ivy League placement"))


def test_no_mod_selects_all_six_speakers():
    entry = DebateEntry("q?", tuple(Document(i, "yes" if i % 2 else "no", (f"text {i} about cost",))
                                    for i in range(1, 7)))
    queries = {str(i): f"query for {i}" for i in range(1, 7)}
    b = scripted(tailored_queries={"*": json.dumps({"queries": queries})})
    ledger = UsageLedger()
    sel = select_and_tailor(entry.query, Topic(0, "cost"), make_biographies(entry, "cost"),
                            PipelineConfig(ablations={"no_mod"}), b, ledger=ledger)
    assert sel.doc_ids == [1, 2, 3, 4, 5, 6]
    assert dict(sel.speakers)[4] == "query for 4"
    assert ledger.per_stage.keys() == {"tailor"}


def test_no_tailor_uses_topic_title_verbatim(law_entry, backend):
    bios = make_biographies(law_entry, TOPIC.title)
    for flags in ({"no_tailor"}, {"no_tailor", "no_mod"}, {"no_tailor", "no_cot"}):
        sel = select_and_tailor(law_entry.query, TOPIC, bios, PipelineConfig(ablations=flags), backend)
        assert sel.speakers and all(q == TOPIC.title for _, q in sel.speakers)


def test_no_cot_gets_ids_then_tailors(law_entry, backend):
    ledger = UsageLedger()
    bios = make_biographies(law_entry, TOPIC.title)
    sel = select_and_tailor(law_entry.query, TOPIC, bios, PipelineConfig(ablations={"no_cot"}), backend, ledger=ledger)
    full = select_and_tailor(law_entry.query, TOPIC, bios, PipelineConfig(), backend)
    assert sel == full
    assert (ledger.calls("selection"), ledger.calls("tailor")) == (1, 1)


def test_unknown_speaker_is_a_schema_error(law_entry):
    b = scripted(speaker_selection={"*": json.dumps({"speakers": [{"query": "x", "id": 9}]})})
    with pytest.raises(StructuredOutputError, match="unknown document id 9"):
        select_and_tailor(law_entry.query, TOPIC, make_biographies(law_entry, TOPIC.title), PipelineConfig(), b)


# -- speakers --------------------------------------------------------------------------

def test_speaker_flattens_yes_then_no(law_entry):
    b = scripted(perspective_list={"*": json.dumps({"no": ["n1"], "yes": ["y1", "y2"]})})
    got = speaker_respond(law_entry, 1, law_entry.query, TOPIC, "market trends", 3, b)
    assert [p.stance for p in got] == ["yes", "yes", "no"]
    assert [p.fact for p in got] == ["y1", "y2", "n1"]


def test_speaker_failure_raises_speaker_error(law_entry):
    b = scripted(perspective_list={"*": "not json"})
    with pytest.raises(SpeakerError, match="document 2"):
        speaker_respond(law_entry, 2, law_entry.query, TOPIC, "debt", 3, b)


def test_speaker_prompt_only_carries_its_own_contexts(law_entry):
    prompts = []

    class Spy:
        def send(self, request):
            prompts.append(request.messages[-1].content)
            return ChatResponse('{"yes": [], "no": []}', 1, 1)

    speaker_respond(law_entry, 4, law_entry.query, TOPIC, "job market", 3, Spy())
    assert law_entry.documents[3].paragraphs[0] in prompts[0]
    assert law_entry.documents[0].paragraphs[0] not in prompts[0]


def _with_speaker(script_data, **perspective_list):
    data = json.loads(json.dumps(script_data))
    data["perspective-list"] = perspective_list
    return ScriptedBackend(data)


def test_empty_perspectives_are_recorded(law_entry, script_data):
    b = _with_speaker(script_data, **{"*": '{"yes": [], "no": []}'})
    result = run_mods(law_entry, PipelineConfig(), b)
    assert all(e.perspectives == () and e.note == NO_PERSPECTIVES for s in result.outline.sections for e in s.entries)
    reasons = [o["reason"] for o in result.report.omissions]
    assert reasons and set(reasons) == {NO_PERSPECTIVES}


def test_failed_speaker_is_skipped(law_entry, script_data):
    b = _with_speaker(script_data, **{"*": '{"yes": ["ok"], "no": []}', "doc=3": "garbage"})
    result = run_mods(law_entry, PipelineConfig(), b)
    assert 3 not in result.outline.doc_ids()
    assert any(o["doc_id"] == 3 and "speaker" in o["reason"] for o in result.report.omissions)


# -- outline -------------------------------------------------------------------------------

def test_no_mod_outline_covers_every_document(law_entry, backend):
    o = build_outline(law_entry, PipelineConfig(m=3, ablations={"no_mod"}), backend)
    assert outline_stats(o, 5).doc_coverage == 1.0
    assert all(len(s.entries) == 5 for s in o.sections)


def test_fixed_pair_selection_gives_coverage_point_four(law_entry, script_data):
    data = json.loads(json.dumps(script_data))
    data["speaker-selection"] = {"*": json.dumps({"speakers": [{"id": 2, "query": "q2"}, {"id": 1, "query": "q1"}]})}
    o = build_outline(law_entry, PipelineConfig(), ScriptedBackend(data))
    assert outline_stats(o, 5).doc_coverage == pytest.approx(0.4)
    assert [[e.doc_id for e in s.entries] for s in o.sections] == [[1, 2]] * 3


def test_empty_selection_keeps_the_topic(law_entry, script_data):
    data = json.loads(json.dumps(script_data))
    data["speaker-selection"]["stage=selection;n=5;topic=1"] = '{"speakers": []}'
    report = RunReport({})
    o = build_outline(law_entry, PipelineConfig(), ScriptedBackend(data), report=report)
    assert o.sections[1].entries == ()
    assert {"topic": 1, "doc_id": None, "reason": "empty selection"} in report.omissions


class Jittery(ScriptedBackend):
    def send(self, request):
        time.sleep(random.random() * 0.01)
        return super().send(request)


def test_entries_sorted_regardless_of_arrival(fire_entry, script_data):
    random.seed(3)
    o = build_outline(fire_entry, PipelineConfig(ablations={"no_mod"}, parallelism=7), Jittery(script_data))
    for s in o.sections:
        assert [e.doc_id for e in s.entries] == list(range(1, 8))


def test_no_stance_drops_labels(law_entry, backend):
    o = build_outline(law_entry, PipelineConfig(ablations={"no_stance"}), backend)
    stances = {p.stance for s in o.sections for e in s.entries for p in e.perspectives}
    assert stances == {None}
    md = export_outline(o, "markdown")
    assert "### Unlabeled" in md
    assert '"stance": "unlabeled"' in export_outline(o, "json")


def test_no_speak_makes_one_call_per_topic(fire_entry, backend):
    ledger = UsageLedger()
    o = build_outline(fire_entry, PipelineConfig(ablations={"no_speak"}), backend, ledger=ledger)
    assert ledger.calls("speaker") == 3
    assert all(e.perspectives for s in o.sections for e in s.entries)


# -- summarization -------------------------------------------------------------------------

def test_three_by_three_summary(law_entry, backend):
    o = build_outline(law_entry, PipelineConfig(mode="mods_all"), backend)
    s = summarize_outline(o, "mods_all", backend, n_docs=5)
    assert [len(p.sentences) for p in s.paragraphs] == [3, 3, 3]
    assert s.sentence_count == 9
    assert all(p.topic == t for p, t in zip(s.paragraphs, o.topics))


def test_uncited_sentence_is_flagged(law_entry, backend):
    o = build_outline(law_entry, PipelineConfig(), backend)
    b = scripted(paragraph={"*": "A fact [1]. An unsupported claim. Another [2]."})
    report = RunReport({})
    s = summarize_outline(o, "mods_topic", b, n_docs=5, report=report)
    assert [x.flagged for x in s.paragraphs[0].sentences] == [False, True, False]
    assert s.paragraphs[0].sentences[1].citations == frozenset()
    assert any("has no citation" in w for w in report.warnings)


def test_out_of_range_citation_is_fatal(law_entry, backend):
    o = build_outline(law_entry, PipelineConfig(), backend)
    ledger = UsageLedger()
    with pytest.raises(SummaryError, match="names no input document"):
        summarize_outline(o, "mods_topic", scripted(paragraph={"*": "Bad [9]."}), n_docs=5, ledger=ledger)
    assert ledger.calls("summarize") == 3


def test_citation_outside_outline_is_a_warning():
    o = _small_outline()
    report = RunReport({})
    summarize_outline(o, "mods_topic", scripted(paragraph={"*": "Claim [5]."}), n_docs=5, report=report)
    assert any("cites [5], which is not in the outline" in w for w in report.warnings)


def test_summary_prompt_states_constraints(law_entry, backend):
    prompts = []

    class Spy(ScriptedBackend):
        def send(self, request):
            if request.key.startswith("stage=summarize"):
                prompts.append(request.messages[-1].content)
            return super().send(request)

    run_mods(law_entry, PipelineConfig(), Spy(backend.script))
    assert len(prompts) == 3
    assert all("Use as many documents as possible" in p for p in prompts)


# -- full runs ---------------------------------------------------------------------------

def test_mods_is_deterministic(law_entry, backend):
    a = run_mods(law_entry, PipelineConfig(), backend)
    b = run_mods(law_entry, PipelineConfig(), backend)
    assert export_outline(a.outline) == export_outline(b.outline)
    assert summary_to_markdown(a.summary) == summary_to_markdown(b.summary)
    assert a.report.to_dict() == b.report.to_dict()


def test_fixture_run_call_count_and_order_of_thirty_seven(fire_entry, backend):
    result = run_mods(fire_entry, PipelineConfig(ablations={"no_mod"}), backend)
    # 1 agenda + 3 tailor + 21 speakers + 3 summaries, the same scale as a 10-document run
    assert result.usage.call_count == 28


def test_no_outline_routes_through_drafts(law_entry, backend):
    result = run_mods(law_entry, PipelineConfig(ablations={"no_outline"}), backend)
    notes = {e.note for s in result.outline.sections for e in s.entries}
    assert notes == {"free-form draft"}
    assert all(e.perspectives == () for s in result.outline.sections for e in s.entries)
    assert len(result.report.drafts) == 3 and all("[" in d for d in result.report.drafts)
    assert len(result.summary.paragraphs) == 3


@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("flags", [(), ("no_tailor",), ("no_cot",), ("no_speak",), ("no_mod",), ("no_stance",),
                                   ("no_outline",), ("no_mod", "no_tailor"), ("no_cot", "no_tailor")])
def test_call_counts_match_formula(law_entry, fire_entry, backend, mode, flags):
    for entry in (law_entry, fire_entry):
        for m in (2, 3):
            result = run_mods(entry, PipelineConfig(m=m, mode=mode, ablations=set(flags)), backend)
            sizes = [len(s["speakers"]) for s in result.report.selections]
            assert result.usage.call_count == expected_mods_calls(mode, set(flags), sizes)


# -- baselines -----------------------------------------------------------------------------

def test_rag_all_pools_k_times_n_contexts(law_entry, backend):
    assert len(pooled_contexts(law_entry, law_entry.query, 3)) == 15
    result = run_baseline(law_entry, "rag_all", PipelineConfig(baseline="rag_all"), backend)
    assert result.report.details["contexts"] == 15


@pytest.mark.parametrize("kind", BASELINES)
def test_baseline_call_counts(law_entry, fire_entry, backend, kind):
    for entry in (law_entry, fire_entry):
        for m in (2, 3):
            ledger = UsageLedger()
            result = run_baseline(entry, kind, PipelineConfig(m=m, baseline=kind), backend, ledger=ledger)
            assert result.usage.call_count == expected_baseline_calls(kind, entry.n_docs, m)
            assert len(result.summary.paragraphs) == m


def test_hierarchical_is_n_plus_one(fire_entry, backend):
    ledger = UsageLedger()
    run_baseline(fire_entry, "hierarchical", PipelineConfig(baseline="hierarchical"), backend, ledger=ledger)
    assert (ledger.calls("doc_summary"), ledger.calls("merge"), ledger.call_count) == (7, 1, 8)


def test_incremental_topic_updates_then_refines(law_entry, backend):
    ledger = UsageLedger()
    run_baseline(law_entry, "incremental_topic", PipelineConfig(baseline="incremental_topic"), backend, ledger=ledger)
    assert (ledger.calls("update"), ledger.calls("refine")) == (5, 3)


def test_run_dispatches(law_entry, backend):
    assert run(law_entry, PipelineConfig(baseline="long_context"), backend).outline is None
    assert run(law_entry, PipelineConfig(), backend).outline is not None


# -- export -------------------------------------------------------------------------------

def _small_outline():
    return Outline("Is it good?", (OutlineSection(Topic(0, "Cost"), (
        OutlineEntry(1, "How much?", (Perspective("yes", "Cheap."), Perspective("no", "Hidden fees."))),
        OutlineEntry(2, "Who pays?", (Perspective("no", "Taxpayers."),)),
    )),))


def test_empty_outline_exports_header_only():
    assert export_outline(Outline("Is it good?", ()), "markdown") == "# Is it good?\n"


def test_markdown_export_structure():
    md = export_outline(_small_outline(), "markdown")
    assert md.count("## Topic") == 1
    assert "### Yes\n- Cheap. [1]" in md
    assert "### No\n- Hidden fees. [1]\n- Taxpayers. [2]" in md
    assert md.endswith("### Follow-up questions\n- [1] How much?\n- [2] Who pays?\n")


def test_json_export_round_trips(law_entry, backend):
    for o in (_small_outline(), build_outline(law_entry, PipelineConfig(ablations={"no_stance"}), backend)):
        assert outline_from_dict(json.loads(export_outline(o, "json"))) == o
    with pytest.raises(ValueError):
        export_outline(_small_outline(), "xml")


def test_summary_round_trips(law_entry, backend):
    s = run_mods(law_entry, PipelineConfig(), backend).summary
    assert summary_from_dict(summary_to_dict(s)) == s
    assert summary_from_markdown(summary_to_markdown(s)) == s


def test_outline_rejects_unsorted_entries():
    with pytest.raises(ValueError):
        Outline("q", (OutlineSection(Topic(0, "t"), (OutlineEntry(2, "a"), OutlineEntry(1, "b"))),))


def test_ablation_names_are_the_documented_six():
    assert set(ABLATIONS) == {"no_tailor", "no_cot", "no_speak", "no_mod", "no_stance", "no_outline"}
