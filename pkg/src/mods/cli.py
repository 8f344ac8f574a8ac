"""Command-line driver.

    mods validate DATASET
    mods run DATASET --backend scripted:<path>|live --out DIR [--mode|--baseline ...]
    mods eval DATASET RUN_DIR [--cite-acc --backend ...] [--self-bleu]
    mods export OUTLINE_JSON [--format markdown|json]

``run`` writes one ``entry_NNN`` directory per processed entry holding
outline.json, outline.md, summary.md, summary.json and run_report.json.
Exit status is 0 on success, 2 when some entries failed and 1 on fatal errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import CorpusError, DebateEntry, dataset_statistics, load_dataset
from .llm import BackendError, ConfigurationError, ModelBackend, UsageLedger, backend_from_spec
from .metrics import citation_accuracy, evaluate_summary, reports_to_csv, reports_to_json, with_accuracy
from .metrics.balance import CitationError
from .pipeline import ConfigError, PipelineConfig, PipelineError, run
from .pipeline.export import dumps, export_outline, outline_from_dict, summary_from_dict, summary_from_markdown, \
    summary_to_dict, summary_to_markdown

logger = logging.getLogger("mods")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2
ENTRY_DIR = re.compile(r"^entry_(\d+)$")


class CliError(Exception):
    """Fatal problem reported to the user with exit status 1."""


@dataclass
class RunManifest:
    dataset: str
    backend: str
    out: str
    entries: str | None = None
    m: int | None = None
    k: int = 3
    mode: str | None = None
    baseline: str | None = None
    ablations: list[str] = field(default_factory=list)
    parallelism: int = 4

    def config_for(self, entry: DebateEntry) -> PipelineConfig:
        return PipelineConfig(m=self.m or entry.topics_requested, k=self.k, mode=self.mode,
                              baseline=self.baseline, ablations=frozenset(self.ablations),
                              parallelism=self.parallelism)


def parse_entries(spec: str | None, n: int) -> list[int]:
    """``all``, ``3``, ``0-4`` (inclusive) or a comma list of those."""
    if spec is None or spec == "all":
        return list(range(n))
    out: list[int] = []
    for part in spec.split(","):
        part = part.strip()
        m = re.fullmatch(r"(\d+)(?:-(\d+))?", part)
        if not m:
            raise CliError(f"bad entry selector {part!r}")
        lo = int(m.group(1))
        hi = int(m.group(2)) if m.group(2) else lo
        if hi < lo or hi >= n:
            raise CliError(f"entry selector {part!r} out of range (dataset has {n} entries)")
        out.extend(i for i in range(lo, hi + 1) if i not in out)
    return out


def parse_ablations(spec: str | None) -> list[str]:
    if not spec:
        return []
    return sorted({a.strip().replace("-", "_") for a in spec.split(",") if a.strip()})


def write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _load(path: str) -> list[DebateEntry]:
    try:
        return load_dataset(path)
    except OSError as exc:
        raise CliError(f"cannot read dataset {path}: {exc.strerror or exc}") from None
    except CorpusError as exc:
        raise CliError(f"{path}: {exc}") from None


def _backend(spec: str | None) -> ModelBackend:
    if not spec:
        raise CliError("--backend is required (scripted:<path> or live)")
    try:
        return backend_from_spec(spec)
    except ConfigurationError as exc:
        raise CliError(str(exc)) from None
    except OSError as exc:
        raise CliError(f"cannot read script: {exc}") from None
    except ValueError as exc:
        raise CliError(f"bad script file: {exc}") from None


# -- commands ----------------------------------------------------------------

def cmd_validate(args) -> int:
    entries = _load(args.dataset)
    for i, e in enumerate(entries):
        for w in e.warnings:
            print(f"entry {i}: warning: {w}")
    s = dataset_statistics(entries)
    print(f"{s.n_entries} entries, {s.mean_docs:.3f} docs/entry, {s.mean_paragraphs_per_doc:.3f} paragraphs/doc, "
          f"stance split {s.mean_majority:.3f}/{s.mean_minority:.3f}")
    return EXIT_OK


def run_entry(entry: DebateEntry, index: int, manifest: RunManifest, backend: ModelBackend) -> str | None:
    """Run one entry and write its artifacts; returns an error message on failure."""
    config = manifest.config_for(entry)
    try:
        result = run(entry, config, backend)
    except (PipelineError, BackendError, CitationError) as exc:
        return str(exc)
    out = Path(manifest.out) / f"entry_{index:03d}"
    out.mkdir(parents=True, exist_ok=True)
    if result.outline is not None:
        write_atomic(out / "outline.json", export_outline(result.outline, "json"))
        write_atomic(out / "outline.md", export_outline(result.outline, "markdown"))
    write_atomic(out / "summary.md", summary_to_markdown(result.summary))
    write_atomic(out / "summary.json", dumps(summary_to_dict(result.summary)))
    write_atomic(out / "run_report.json", dumps(result.report.to_dict()))
    return None


def cmd_run(manifest: RunManifest) -> int:
    entries = _load(manifest.dataset)
    selected = parse_entries(manifest.entries, len(entries))
    try:
        for i in selected:
            manifest.config_for(entries[i])
    except ConfigError as exc:
        raise CliError(str(exc)) from None
    backend = _backend(manifest.backend)
    Path(manifest.out).mkdir(parents=True, exist_ok=True)
    workers = max(1, min(manifest.parallelism, len(selected)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        errors = list(pool.map(lambda i: run_entry(entries[i], i, manifest, backend), selected))
    failed = 0
    for i, err in zip(selected, errors):
        if err is not None:
            failed += 1
            print(f"entry {i}: failed: {err}", file=sys.stderr)
    print(f"{len(selected) - failed}/{len(selected)} entries written to {manifest.out}")
    return EXIT_PARTIAL if failed else EXIT_OK


def _read_summary(directory: Path):
    if (directory / "summary.json").exists():
        return summary_from_dict(json.loads((directory / "summary.json").read_text(encoding="utf-8")))
    return summary_from_markdown((directory / "summary.md").read_text(encoding="utf-8"))


def cmd_eval(args) -> int:
    entries = _load(args.dataset)
    root = Path(args.run_dir)
    if not root.is_dir():
        raise CliError(f"{root} is not a directory")
    dirs = []
    for d in sorted(root.iterdir()):
        m = ENTRY_DIR.match(d.name)
        if not (m and d.is_dir() and ((d / "summary.json").exists() or (d / "summary.md").exists())):
            continue
        if int(m.group(1)) >= len(entries):
            raise CliError(f"orphan summary {d}: dataset has no entry {int(m.group(1))}")
        dirs.append((int(m.group(1)), d))
    if not dirs:
        raise CliError(f"no entry_NNN summaries under {root}")
    backend = _backend(args.backend) if args.cite_acc else None
    rows = []
    for idx, d in dirs:
        try:
            summary = _read_summary(d)
            report = evaluate_summary(summary, entries[idx], with_self_bleu=args.self_bleu)
            if backend is not None:
                acc = citation_accuracy(summary, entries[idx], backend, ledger=UsageLedger())
                report = with_accuracy(report, acc)
        except (CitationError, ValueError, KeyError) as exc:
            raise CliError(f"{d}: {exc}") from None
        rows.append((d.name, report))
    out = Path(args.out) if args.out else root
    out.mkdir(parents=True, exist_ok=True)
    write_atomic(out / "report.json", reports_to_json(rows))
    write_atomic(out / "report.csv", reports_to_csv(rows))
    print(f"evaluated {len(rows)} summaries; reports in {out}")
    return EXIT_OK


def cmd_export(args) -> int:
    try:
        outline = outline_from_dict(json.loads(Path(args.outline).read_text(encoding="utf-8")))
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read outline {args.outline}: {exc}") from None
    text = export_outline(outline, args.format)
    if args.out:
        write_atomic(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- argument handling -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mods", description="Moderated multi-speaker summarization of debatable queries.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a dataset file and print its statistics")
    v.add_argument("dataset")

    r = sub.add_parser("run", help="summarize dataset entries")
    r.add_argument("dataset", nargs="?")
    r.add_argument("--config", help="JSON file with run settings; flags override it")
    r.add_argument("--mode", choices=["mods_topic", "mods_all"])
    r.add_argument("--baseline", choices=["long_context", "rag_all", "rag_doc", "hierarchical",
                                          "incremental_all", "incremental_topic"])
    r.add_argument("--topics", type=int, help="topics per summary (default: the entry's own setting)")
    r.add_argument("--k", type=int, help="paragraphs retrieved per document")
    r.add_argument("--ablate", help="comma list of no_tailor,no_cot,no_speak,no_mod,no_stance,no_outline")
    r.add_argument("--backend", help="scripted:<path> or live")
    r.add_argument("--out", help="output directory")
    r.add_argument("--entries", help="all, an index, an inclusive range a-b, or a comma list")
    r.add_argument("--parallelism", type=int)

    e = sub.add_parser("eval", help="score summaries written by run")
    e.add_argument("dataset")
    e.add_argument("run_dir")
    e.add_argument("--out", help="report directory (default: run_dir)")
    e.add_argument("--cite-acc", action="store_true", help="judge citation entailment with the backend")
    e.add_argument("--self-bleu", action="store_true")
    e.add_argument("--backend", help="scripted:<path> or live, needed for --cite-acc")

    x = sub.add_parser("export", help="render an outline.json")
    x.add_argument("outline")
    x.add_argument("--format", choices=["markdown", "json"], default="markdown")
    x.add_argument("--out")
    return p


def manifest_from_args(args) -> RunManifest:
    base: dict = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(base, dict):
            raise CliError(f"{args.config}: config must be a JSON object")
        unknown = sorted(set(base) - {"dataset", "backend", "out", "entries", "topics", "k", "mode",
                                      "baseline", "ablate", "parallelism"})
        if unknown:
            raise CliError(f"{args.config}: unknown setting {unknown[0]!r}")
    flags = {
        "dataset": args.dataset, "backend": args.backend, "out": args.out, "entries": args.entries,
        "topics": args.topics, "k": args.k, "mode": args.mode, "baseline": args.baseline,
        "ablate": args.ablate, "parallelism": args.parallelism,
    }
    merged = {**base, **{k: v for k, v in flags.items() if v is not None}}
    if args.baseline and "mode" not in {k for k, v in flags.items() if v is not None}:
        merged.pop("mode", None)
    if args.mode and not args.baseline:
        merged.pop("baseline", None)
    for key in ("dataset", "out"):
        if not merged.get(key):
            raise CliError(f"missing required setting {key!r}")
    ablate = merged.get("ablate")
    if isinstance(ablate, list):
        ablate = ",".join(ablate)
    entries = merged.get("entries")
    if isinstance(entries, int):
        entries = str(entries)
    return RunManifest(
        dataset=merged["dataset"], backend=merged.get("backend"), out=merged["out"],
        entries=entries if isinstance(entries, (str, type(None))) else ",".join(map(str, entries)),
        m=merged.get("topics"), k=merged.get("k", 3), mode=merged.get("mode"),
        baseline=merged.get("baseline"), ablations=parse_ablations(ablate),
        parallelism=merged.get("parallelism", 4),
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "run":
            return cmd_run(manifest_from_args(args))
        if args.command == "eval":
            return cmd_eval(args)
        return cmd_export(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
