"""Regenerate src/mods/data/fixture_script.json from the fixture dataset.

Speaker facts are the leading sentences of each document's best-matching
paragraphs for its tailored query, so every scripted perspective is
grounded in the document that states it.
"""

import json
from pathlib import Path

from mods.corpus import load_dataset
from mods.llm import render
from mods.metrics.citations import split_sentences
from mods.retrieval import build_index, retrieve

DATA = Path(__file__).resolve().parents[1] / "src" / "mods" / "data"

# per entry: topics, tailored queries for every document, moderator picks,
# topic paragraphs written from the picks, and shorter baseline paragraphs
PLANS = {
    5: {
        "topics": [
            "Earning potential and the legal job market",
            "Cost of attendance and student debt",
            "Career flexibility and prestige",
        ],
        "queries": [
            {1: "market trends", 2: "Do salaries cover the cost of the degree?",
             3: "Ivy League placement", 4: "Is the legal job market saturated?",
             5: "Do legal skills raise earning potential?"},
            {1: "Does loan forgiveness offset student debt?", 2: "How much student debt do graduates carry?",
             3: "Do top school salaries justify the cost?", 4: "Do graduates recover the cost of attending?",
             5: "Do scholarship options reduce the cost of attendance?"},
            {1: "Do government lawyers have stable careers?", 2: "How does debt shape career choices?",
             3: "Does prestige compound over a career?", 4: "Do graduates take jobs that need the degree?",
             5: "How much career flexibility does the degree give?"},
        ],
        "picks": [[1, 3], [2, 4, 5], [2, 3, 5]],
        "paragraphs": [
            "Supporters point to steady gains in the legal job market [1][3]. Large firm hiring has recovered "
            "and starting salaries have risen for three straight years [1]. Graduates of top schools continue to "
            "place into elite firms and clerkships that pay six figures in their first year [3].",
            "Critics argue that the cost of law school has outpaced any salary gains [2]. Typical borrowers leave "
            "with more than one hundred thousand dollars in debt, and many graduates land jobs that do not "
            "require a law degree [2][4]. Part time programs and scholarships lower the cost for some students [5].",
            "A law degree offers unusual career flexibility across business, policy and public service [3][5]. "
            "The prestige of top programs compounds into partnership and leadership roles [3]. Yet debt pushes "
            "many graduates away from the careers they wanted and into firm jobs [2].",
        ],
        "baseline": [
            "Law graduates earn well above the median for college graduates [1]. Hiring at large firms has "
            "recovered in recent years [1][3]. Demand for compliance and regulatory lawyers is growing [3].",
            "Tuition has climbed far faster than inflation [2]. The average borrower leaves with large loans that "
            "take decades to repay [2]. Lower ranked schools may not deliver an earnings premium [2].",
            "Legal training builds writing and negotiation skills that transfer across careers [5]. The degree "
            "opens doors in business, policy and politics [3][5]. Prestige still matters to many employers [5].",
        ],
    },
    7: {
        "topics": [
            "Soil nutrients and plant regeneration",
            "Air quality and human health",
            "Wildlife habitat and biodiversity",
        ],
        "queries": [
            {1: "How does fire return nutrients to the soil?", 2: "Does smoke affect plant growth?",
             3: "Which plants need fire to reproduce?", 4: "Can severe fires sterilize soil?",
             5: "Do plants thrive in burned patches?", 6: "Do burned forests regrow or convert to shrubland?",
             7: "Does prescribed burning keep forests healthy?"},
            {1: "Were controlled burns used to keep land healthy?", 2: "How does smoke harm human health?",
             3: "Do smoke chemicals have other effects?", 4: "Do streams below burns carry pollution?",
             5: "Does open habitat after fire matter to people?", 6: "How does soot worsen air quality?",
             7: "Does prescribed burning lower risk to communities?"},
            {1: "Does fire keep grassland habitat fertile?", 2: "Which groups face risk during fire season?",
             3: "Do fire dependent species disappear without fire?", 4: "How do severe fires destroy wildlife habitat?",
             5: "How does fire support biodiversity?", 6: "Do repeated burns change forest habitat?",
             7: "Does fuel reduction protect wildlife habitat?"},
        ],
        "picks": [[1, 3, 4], [2, 6, 7], [4, 5, 7]],
        "paragraphs": [
            "Fire returns nutrients from dead plants to the soil and clears litter so new growth can take "
            "hold [1]. Species such as lodgepole pine depend on heat to release their seeds [3]. Severe megafires, "
            "however, can sterilize soil and destroy the seed bank [4].",
            "Wildfire smoke pushes air quality into unhealthy ranges across whole regions [2][6]. Hospital visits "
            "for asthma and heart problems climb during large fires [2]. Regular prescribed burns lower the risk "
            "of the catastrophic fires that produce the worst smoke [7].",
            "A mosaic of burned and unburned patches supports woodpeckers, beetles and wildflowers [5]. "
            "Prescribed burning lowers the risk of fires that wipe out wildlife habitat [7]. Severe fires still "
            "destroy old growth habitat that takes centuries to return [4].",
        ],
        "baseline": [
            "Ash releases nutrients that fuel plant regeneration [1]. Some pine cones open only under intense "
            "heat [3]. Many grassland soils depend on periodic fire [1].",
            "Smoke sends fine particles hundreds of miles [2]. Exposure to smoke harms human health [2]. Air "
            "quality alerts can last for weeks [2].",
            "Fire creates a mosaic that supports biodiversity [5]. Open habitat benefits grazing animals [5]. "
            "Regular fire reduces fuel buildup on the forest floor [7].",
        ],
    },
}


def facts(doc, index, query, k=2):
    """Leading sentence of each of the top-``k`` paragraphs for ``query``."""
    out = []
    for text in retrieve(index, query, k).texts:
        sentence = split_sentences(text)[0][0]
        out.append((doc.stance, sentence))
    return out


def build():
    entries = {e.n_docs: e for e in load_dataset(DATA / "fixture_dataset.json")}
    script = {shape: {} for shape in ("topic-list", "speaker-selection", "speaker-ids", "tailored-queries",
                                      "perspective-list", "doc-perspectives", "summary", "paragraph",
                                      "text", "entailment")}
    for n, plan in PLANS.items():
        entry = entries[n]
        indexes = {d.id: build_index(d) for d in entry.documents}
        topics = plan["topics"]
        for m in (2, 3):
            script["topic-list"][f"stage=agenda;m={m};n={n}"] = render(topics[:m], "topic-list")
            script["summary"][f"m={m};n={n}"] = render(list(zip(topics[:m], plan["baseline"][:m])), "summary")
            script["summary"][f"stage=summarize;mode=all;m={m};n={n}"] = render(
                list(zip(topics[:m], plan["paragraphs"][:m])), "summary")
        for j, topic in enumerate(topics):
            queries = plan["queries"][j]
            picks = plan["picks"][j]
            tag = f"n={n};topic={j}"
            script["speaker-selection"][f"stage=selection;{tag}"] = render(
                [(i, queries[i]) for i in picks], "speaker-selection")
            script["speaker-ids"][f"stage=selection;{tag}"] = render(picks, "speaker-ids")
            script["tailored-queries"][f"stage=tailor;{tag}"] = render(sorted(queries.items()), "tailored-queries")
            per_doc = {d.id: facts(d, indexes[d.id], queries[d.id]) for d in entry.documents}
            for doc_id, pairs in per_doc.items():
                script["perspective-list"][f"stage=speaker;{tag};doc={doc_id}"] = render(pairs, "perspective-list")
            for ids in (picks, sorted(queries)):
                docs = ",".join(map(str, ids))
                script["doc-perspectives"][f"stage=speaker;{tag};docs={docs}"] = render(
                    {i: per_doc[i] for i in ids}, "doc-perspectives")
            script["paragraph"][tag] = plan["baseline"][j]
            script["paragraph"][f"stage=summarize;mode=topic;{tag}"] = plan["paragraphs"][j]
            script["paragraph"][f"stage=speaker;{tag}"] = plan["paragraphs"][j]
        for d in entry.documents:
            script["text"][f"stage=doc_summary;n={n};doc={d.id}"] = (
                f"{split_sentences(d.paragraphs[0])[0][0].rstrip('.')} [{d.id}].")
    script["perspective-list"]["*"] = render([("yes", "The document addresses the topic.")], "perspective-list")
    script["entailment"]["*"] = render(True, "entailment")
    return script


if __name__ == "__main__":
    out = DATA / "fixture_script.json"
    out.write_text(json.dumps(build(), indent=2, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out}")
