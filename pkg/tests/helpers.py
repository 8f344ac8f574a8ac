"""Closed-form call counts for scripted runs."""


def moderator_calls(ablations, selected):
    if "no_mod" in ablations:
        return 0 if "no_tailor" in ablations else 1
    if "no_tailor" in ablations:
        return 1
    if "no_cot" in ablations:
        return 1 + (1 if selected else 0)
    return 1


def speaker_calls(ablations, selected):
    if "no_outline" in ablations:
        return selected
    if "no_speak" in ablations:
        return 1 if selected else 0
    return selected


def expected_mods_calls(mode, ablations, selection_sizes):
    m = len(selection_sizes)
    per_topic = sum(moderator_calls(ablations, s) + speaker_calls(ablations, s) for s in selection_sizes)
    return 1 + per_topic + (1 if mode == "mods_all" else m)


def expected_baseline_calls(kind, n_docs, m):
    return {
        "long_context": 1,
        "rag_all": 1,
        "rag_doc": 1,
        "hierarchical": n_docs + 1,
        "incremental_all": 1 + n_docs + 1,
        "incremental_topic": 1 + n_docs + m,
    }[kind]
