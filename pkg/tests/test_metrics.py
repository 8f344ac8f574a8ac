import csv
import io
import json
import math
import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mods.llm import ChatResponse, ScriptedBackend, UsageLedger
from mods.metrics import (
    CitationError,
    UndefinedMetricError,
    citation_accuracy,
    doc_coverage,
    evaluate_summary,
    extract_citations,
    kl_divergence,
    outline_stats,
    render_sentence,
    reports_to_csv,
    reports_to_json,
    self_bleu,
    split_sentences,
    stance_balance,
    strip_citations,
)
from mods.pipeline import Topic
from mods.pipeline.common import build_summary
from mods.pipeline.types import Outline, OutlineEntry, OutlineSection, Perspective

from . import oracles
from .conftest import make_entry


# -- citations -------------------------------------------------------------------

@pytest.mark.parametrize("text, ids", [
    ("Fires renew soil [1][3].", {1, 3}),
    ("Costs rose [2, 4] last year.", {2, 4}),
    ("No sources here.", set()),
    ("See [Smith et al.] and [a, 2].", {2}),
    ("Zero [0] is not a document [5].", {5}),
])
def test_extract_citations(text, ids):
    assert extract_citations(text) == ids


def test_split_sentences_examples():
    assert split_sentences("A [1]. B [2][3].") == [("A [1].", {1}), ("B [2][3].", {2, 3})]
    assert split_sentences("What now? Yes [4].") == [("What now?", set()), ("Yes [4].", {4})]
    assert split_sentences("Dr. Smith agrees [1].") == [("Dr. Smith agrees [1].", {1})]


def test_split_keeps_trailing_citations_after_punctuation():
    got = split_sentences("Soil recovers. [2] Smoke spreads far. [3][4]")
    assert got == [("Soil recovers. [2]", {2}), ("Smoke spreads far. [3][4]", {3, 4})]


def test_split_guards_initials_and_decimals():
    got = split_sentences("J. R. Tolkien wrote it in 1954 [1]. Prices rose 2.5 percent, e.g. in cities [2].")
    assert [c for _, c in got] == [{1}, {2}]


def test_strip_citations():
    assert strip_citations("Fires renew soil [1][3]. Next [2, 4]!") == "Fires renew soil. Next!"


_body = st.lists(st.sampled_from(["fire", "soil", "Dr", "costs", "rose", "x1", "law", "(note)"]),
                 min_size=1, max_size=8).map(" ".join)


@given(_body, st.sets(st.integers(1, 99), max_size=5))
def test_extract_inverts_render(body, ids):
    assert extract_citations(render_sentence(body, ids)) == ids


# -- coverage and balance ------------------------------------------------------------

def test_doc_coverage_examples():
    assert doc_coverage({1, 3, 5}, 6) == 0.5
    assert doc_coverage(set(), 10) == 0.0
    with pytest.raises(CitationError):
        doc_coverage({7}, 6)


def test_fairness_examples():
    e4 = make_entry(["yes", "yes", "no", "no"])
    assert stance_balance({1, 2, 3, 4}, e4)[0] == 0.0
    e = make_entry(["yes", "yes", "yes", "no", "no"])
    fair, _ = stance_balance({1, 2, 3, 4}, e)
    assert fair == pytest.approx(0.75 * math.log(1.5) + 0.25 * math.log(0.5), abs=1e-12)
    assert fair == pytest.approx(0.13081, abs=5e-6)


def test_faithfulness_closed_form():
    e = make_entry(["yes"] * 13 + ["no"] * 7)
    _, faith = stance_balance({1, 2, 3}, e)
    assert faith == pytest.approx(math.log(1 / 0.65), abs=1e-12)
    assert faith == pytest.approx(0.43078, abs=5e-6)


def test_kl_anchors():
    assert kl_divergence((0.5, 0.5), (0.5, 0.5)) == 0.0
    assert abs(kl_divergence((1.0, 0.0), (0.5, 0.5)) - math.log(2)) <= 1e-12
    assert kl_divergence((0.3, 0.7), (0.3, 0.7)) == 0.0
    assert kl_divergence((0.5, 0.5), (1.0, 0.0)) == math.inf


def test_unknown_citation_is_an_error():
    e = make_entry(["yes", "no"])
    with pytest.raises(CitationError):
        stance_balance({3}, e)


@settings(max_examples=300)
@given(st.lists(st.sampled_from(["yes", "no"]), min_size=2, max_size=20).filter(lambda s: len(set(s)) == 2),
       st.data())
def test_balance_properties(stances, data):
    e = make_entry(stances)
    cited = data.draw(st.sets(st.integers(1, len(stances)), min_size=1))
    fair, faith = stance_balance(cited, e)
    dc_o, fair_o, faith_o = oracles.balance(cited, stances)
    assert doc_coverage(cited, len(stances)) == pytest.approx(dc_o, abs=1e-12)
    assert fair == pytest.approx(fair_o, abs=1e-9)
    assert faith == pytest.approx(faith_o, abs=1e-9)
    assert 0.0 <= fair <= math.log(2) + 1e-15
    yes = sum(stances[i - 1] == "yes" for i in cited)
    assert (fair == 0.0) == (2 * yes == len(cited))
    extra = data.draw(st.integers(1, len(stances)))
    assert doc_coverage(cited | {extra}, len(stances)) >= doc_coverage(cited, len(stances))


# -- summary evaluation -----------------------------------------------------------

def summary_of(bodies):
    return build_summary([Topic(i, f"topic {i}") for i in range(len(bodies))], bodies)


def test_uniform_construction():
    e = make_entry(["yes", "no", "yes", "no"])
    s = summary_of(["One [1]. Two [2]. Three [1][2]."] * 3)
    r = evaluate_summary(s, e)
    assert (r.summary_dc, r.paragraph_dc, r.summary_fairness, r.paragraph_fairness) == (0.5, 0.5, 0.0, 0.0)
    assert (r.total_sentences, r.avg_sentences_per_paragraph) == (9, 3.0)


def test_uncited_paragraph_counts_zero_coverage_and_is_excluded_from_balance():
    e = make_entry(["yes", "no", "yes", "no"])
    r = evaluate_summary(summary_of(["A [1]. B [2].", "Nothing cited here."]), e)
    assert r.paragraph_dc == 0.25
    assert r.paragraph_fairness == 0.0
    assert r.uncited_paragraphs == 1
    none = evaluate_summary(summary_of(["Plain.", "Also plain."]), e)
    assert none.summary_fairness is None and none.paragraph_fairness is None
    assert none.summary_dc == 0.0


def test_invalid_citation_propagates():
    e = make_entry(["yes", "no"])
    with pytest.raises(CitationError):
        evaluate_summary(summary_of(["A [3].", "B [1]."]), e)


def _random_paragraph(rng, n):
    sentences = []
    for _ in range(rng.randint(1, 4)):
        ids = rng.sample(range(1, n + 1), rng.randint(0, min(3, n)))
        sentences.append(render_sentence(rng.choice(["Costs rose", "Fire helps", "Smoke harms"]), ids))
    return " ".join(sentences)


def test_random_reports_match_brute_force_recomputation():
    rng = random.Random(11)
    for _ in range(200):
        n = rng.randint(2, 10)
        stances = ["yes", "no"] + [rng.choice(["yes", "no"]) for _ in range(n - 2)]
        rng.shuffle(stances)
        entry = make_entry(stances)
        bodies = [_random_paragraph(rng, n) for _ in range(rng.randint(2, 4))]
        r = evaluate_summary(summary_of(bodies), entry)
        per = [oracles.balance(set(map(int, re.findall(r"\[(\d+)\]", b))), stances) for b in bodies]
        union = set().union(*(set(map(int, re.findall(r"\[(\d+)\]", b))) for b in bodies))
        dc, fair, faith = oracles.balance(union, stances)
        assert r.summary_dc == pytest.approx(dc, abs=1e-12)
        if fair is None:
            assert r.summary_fairness is None
        else:
            assert r.summary_fairness == pytest.approx(fair, abs=1e-9)
            assert r.summary_faithfulness == pytest.approx(faith, abs=1e-9)
        assert r.paragraph_dc == pytest.approx(sum(p[0] for p in per) / len(per), abs=1e-12)
        fairs = [p[1] for p in per if p[1] is not None]
        if fairs:
            assert r.paragraph_fairness == pytest.approx(sum(fairs) / len(fairs), abs=1e-9)
        assert r.total_sentences == sum(len(split_sentences(b)) for b in bodies)
        assert r.uncited_paragraphs == len(per) - len(fairs)


def test_sentence_order_does_not_change_metrics():
    e = make_entry(["yes", "no", "yes", "no", "yes"])
    a = evaluate_summary(summary_of(["Alpha [1]. Beta [2][3]. Gamma.", "Delta [4]. Eps [5]."]), e)
    b = evaluate_summary(summary_of(["Gamma. Beta [2][3]. Alpha [1].", "Eps [5]. Delta [4]."]), e)
    assert a == b


# -- citation accuracy ---------------------------------------------------------------

def test_citation_accuracy_all_entailed():
    e = make_entry(["yes", "no", "yes"])
    s = summary_of(["A [1][2]. B [3].", "C [1]."])
    ledger = UsageLedger()
    acc = citation_accuracy(s, e, ScriptedBackend({"entailment": {"*": '{"entailed": true}'}}), ledger=ledger)
    assert (acc.value, acc.judged, acc.excluded) == (1.0, 4, 0)
    assert ledger.calls("entailment") == 4


def test_citation_accuracy_half_and_exclusions():
    e = make_entry(["yes", "no"])
    s = summary_of(["A [1][2].", "B [1]. C [2]."])
    b = ScriptedBackend({"entailment": {"doc=1": "entailed", "doc=2": "not entailed"}})
    acc = citation_accuracy(s, e, b)
    assert (acc.value, acc.entailed, acc.judged) == (0.5, 2, 4)
    b = ScriptedBackend({"entailment": {"doc=1": "entailed", "p=1;s=1": "gibberish"}})
    acc = citation_accuracy(s, e, b)
    assert (acc.value, acc.judged, acc.excluded) == (1.0, 2, 2)


def test_citation_accuracy_sends_document_as_premise():
    seen = []

    class Spy:
        def send(self, request):
            seen.append(request.messages[-1].content)
            return ChatResponse("entailed", 1, 1)

    e = make_entry(["yes", "no"], paragraphs=[["Ash feeds soil."], ["Smoke harms lungs."]])
    citation_accuracy(summary_of(["Smoke is harmful [2].", "Ash helps [1]."]), e, Spy(), parallelism=1)
    assert any("Smoke harms lungs." in p and "Smoke is harmful." in p for p in seen)


# -- self-BLEU --------------------------------------------------------------------------

def test_self_bleu_anchors():
    para = "the soil recovers quickly after a low intensity burn [1]"
    assert self_bleu([para, para]) == pytest.approx(1.0, abs=1e-12)
    assert self_bleu(["alpha beta gamma delta", "one two three four"], epsilon=0) == 0.0
    assert self_bleu(["alpha beta gamma delta", "one two three four"]) < 1e-8
    with pytest.raises(UndefinedMetricError):
        self_bleu(["only one"])


FIXTURE = [
    "Fire returns nutrients to the soil and clears litter for new growth [1].",
    "Fire clears litter and returns nutrients that feed new plant growth [2][3].",
    "Smoke from fire harms the air and the health of people nearby [4].",
]


def test_self_bleu_matches_oracle_on_fixture():
    assert self_bleu(FIXTURE) == pytest.approx(oracles.self_bleu(FIXTURE), abs=1e-9)
    assert 0.0 < self_bleu(FIXTURE) < 1.0


@settings(max_examples=100)
@given(st.lists(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=12).map(" ".join),
                min_size=2, max_size=4))
def test_self_bleu_matches_oracle_randomly(paragraphs):
    assert self_bleu(paragraphs) == pytest.approx(oracles.self_bleu(paragraphs), rel=1e-9, abs=1e-12)


# -- outline statistics and emitters ---------------------------------------------------

def test_outline_stats_counts_contributing_docs():
    o = Outline("q", (
        OutlineSection(Topic(0, "a"), (OutlineEntry(1, "q1", (Perspective("yes", "f"), Perspective("no", "g"))),
                                       OutlineEntry(2, "q2", ()))),
        OutlineSection(Topic(1, "b"), (OutlineEntry(3, "q3", (Perspective("yes", "h"),)),)),
    ))
    s = outline_stats(o, 5)
    assert (s.doc_coverage, s.topic_doc_coverage, s.perspectives, s.perspectives_per_doc) == (0.4, (0.2, 0.2), 3, 1.5)


def test_emitters_have_a_row_per_entry_plus_mean():
    e = make_entry(["yes", "no", "yes", "no"])
    rows = [("entry_000", evaluate_summary(summary_of(["A [1]. B [2].", "C [3]. D [4]."]), e)),
            ("entry_001", evaluate_summary(summary_of(["A [1].", "C [3]."]), e))]
    table = list(csv.reader(io.StringIO(reports_to_csv(rows))))
    assert table[0][:4] == ["entry", "DC", "Fair", "Faithful"]
    assert [r[0] for r in table[1:]] == ["entry_000", "entry_001", "mean"]
    assert table[1][2] == "0.0"
    assert float(table[3][1]) == pytest.approx(0.75)
    data = json.loads(reports_to_json(rows))
    assert data["mean"]["summary_dc"] == pytest.approx(0.75)
    assert reports_to_csv(rows) == reports_to_csv(rows)
