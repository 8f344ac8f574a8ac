"""Independent reference implementations used to cross-check the package."""

import math
import re


def words(text):
    text = re.sub(r"\[[^\[\]]*\d[^\[\]]*\]", " ", text)
    return re.findall(r"[^\W_]+", text.lower())


def kl(p_yes, q_yes):
    """Two-outcome KL in nats, written out term by term."""
    total = 0.0
    for p, q in ((p_yes, q_yes), (1 - p_yes, 1 - q_yes)):
        if p > 0:
            total += p * (math.log(p) - math.log(q))
    return max(total, 0.0)


def balance(cited, stances):
    """(dc, fairness, faithfulness) from a cited id set and the 1-based stance list."""
    n = len(stances)
    dc = len(set(cited)) / n
    if not cited:
        return dc, None, None
    share = [stances[i - 1] for i in cited].count("yes") / len(set(cited))
    inputs = stances.count("yes") / n
    return dc, kl(share, 0.5), kl(share, inputs)


def bleu(hyp, refs, n=4, eps=1e-9):
    precisions = []
    for k in range(1, n + 1):
        grams = [tuple(hyp[i:i + k]) for i in range(len(hyp) - k + 1)]
        counts = {}
        for g in grams:
            counts[g] = counts.get(g, 0) + 1
        clip = {}
        for ref in refs:
            ref_counts = {}
            for i in range(len(ref) - k + 1):
                g = tuple(ref[i:i + k])
                ref_counts[g] = ref_counts.get(g, 0) + 1
            for g, c in ref_counts.items():
                clip[g] = max(clip.get(g, 0), c)
        hit = sum(min(c, clip.get(g, 0)) for g, c in counts.items())
        denom = max(len(grams), 1)
        precisions.append(hit / denom if hit else eps / denom)
    if min(precisions) == 0:
        return 0.0
    c = len(hyp)
    best = sorted((abs(len(r) - c), len(r)) for r in refs)[0][1]
    bp = 1.0 if c > best else math.exp(1 - best / c)
    return bp * math.exp(sum(math.log(p) for p in precisions) / n)


def self_bleu(paragraphs, n=4, eps=1e-9):
    toks = [words(p) for p in paragraphs]
    vals = [bleu(t, [o for j, o in enumerate(toks) if j != i], n, eps) for i, t in enumerate(toks)]
    return sum(vals) / len(vals)
