"""Command-line pipeline driver.

Subcommands: parse, train, detect, explain, evaluate, mine, gradcheck,
gen-corpus. Configuration precedence is defaults < --config JSON file <
explicit flags. Progress lines go to standard error; machine-readable
results go to standard output or to the declared output paths only.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from .corpus import (
    SplitSpec,
    dump_corpus,
    fix_truth,
    generate_planted_corpus,
    load_corpus,
    split,
)
from .encoders import EncoderConfig
from .errors import ConfigError, CorpusError, SchemaError, VulgraphError
from .explain import (
    ExplainConfig,
    explanation_report,
    extract_subgraph,
    learn_edge_mask,
    subgraph_to_dot,
)
from .fagcn import (
    RankedDetection,
    TrainConfig,
    classify,
    detection_report,
    load_model,
    rank_methods,
    save_model,
    score_methods,
    train,
)
from .features import build_vocabulary, extract_method_features
from .frontend import build_pdg, parse_source, pdg_to_dot, pdg_to_json
from .gradcheck import all_passed, run_gradcheck
from .metrics import evaluation_report
from .patterns import (
    AbstractGraph,
    abstract_subgraph,
    mine_patterns,
    pattern_count_table,
    pattern_to_dict,
    pattern_to_dot,
)
from .util import dump_json

TABLE_GRID = (2, 3, 4, 5)


@dataclass
class RunConfig:
    seed: int = 0
    embed_dim: int = 32
    gru_hidden: int = 32
    tree_hidden: int = 32
    stmt_dim: int = 64
    epochs: int = 50
    lr: float = 1e-3
    batch_size: int = 8
    patience: int = 5
    fractions: tuple = (0.8, 0.1, 0.1)
    real_ratio: float = 1.0
    explain_iterations: int = 300
    explain_lr: float = 0.05
    sparsity_weight: float = 0.005
    entropy_weight: float = 0.1
    k: int = 5
    min_support: int = 2
    jobs: int = 1

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            embed_dim=self.embed_dim,
            gru_hidden=self.gru_hidden,
            tree_hidden=self.tree_hidden,
            stmt_dim=self.stmt_dim,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            lr=self.lr,
            batch_size=self.batch_size,
            patience=self.patience,
            seed=self.seed,
        )

    def split_spec(self) -> SplitSpec:
        return SplitSpec(
            fractions=tuple(self.fractions), seed=self.seed, real_ratio=self.real_ratio
        )

    def explain_settings(self) -> ExplainConfig:
        return ExplainConfig(
            iterations=self.explain_iterations,
            lr=self.explain_lr,
            sparsity_weight=self.sparsity_weight,
            entropy_weight=self.entropy_weight,
        )


def load_run_config(path: str | None, overrides: dict) -> RunConfig:
    merged = asdict(RunConfig())
    known = set(merged)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(data)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    if isinstance(merged["fractions"], list):
        merged["fractions"] = tuple(merged["fractions"])
    try:
        cfg = RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.jobs < 1:
        raise ConfigError("jobs must be at least 1")
    if cfg.k < 1:
        raise ConfigError("k must be at least 1")
    return cfg


def _config_from_args(args) -> RunConfig:
    overrides = {}
    for key in ("seed", "jobs", "k", "min_support"):
        if hasattr(args, key):
            overrides[key] = getattr(args, key)
    return load_run_config(getattr(args, "config", None), overrides)


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _parallel_map(fn, items, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _usable_entries(path):
    entries = load_corpus(path)
    usable = []
    for entry in entries:
        if entry.pdg is None:
            _log(f"skipping {entry.id}: {entry.parse_error}")
        else:
            usable.append(entry)
    return entries, usable


def _score_in_chunks(model, items, jobs: int, chunk: int = 16) -> list:
    """Scores in fixed 16-method batches so results are bitwise identical
    for every --jobs value."""
    chunks = [items[lo : lo + chunk] for lo in range(0, len(items), chunk)]
    parts = _parallel_map(lambda part: score_methods(model, part, chunk=chunk), chunks, jobs)
    return [pair for part in parts for pair in part]


# --- commands ---------------------------------------------------------------


def cmd_parse(args) -> int:
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    count = 0
    for path in args.files:
        source = Path(path).read_text(encoding="utf-8")
        for method_ast in parse_source(source):
            pdg = build_pdg(method_ast)
            text = pdg_to_json(pdg)
            if out_dir:
                (out_dir / f"{pdg.method}.pdg.json").write_text(text, encoding="utf-8")
                if args.dot:
                    (out_dir / f"{pdg.method}.dot").write_text(
                        pdg_to_dot(pdg), encoding="utf-8"
                    )
            else:
                sys.stdout.write(text)
            count += 1
    _log(f"parsed {count} method(s)")
    return 0


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    _, usable = _usable_entries(args.corpus)
    parts = split(usable, cfg.split_spec())
    labels = {e.id: e.label for e in usable}
    train_items = [(e.id, e.pdg) for e in parts["train"]]
    tune_items = [(e.id, e.pdg) for e in parts["tune"]]
    _log(
        f"training on {len(train_items)} methods, tuning on {len(tune_items)}, "
        f"seed {cfg.seed}"
    )
    vocab = build_vocabulary([extract_method_features(e.pdg) for e in parts["train"]])
    model, log_rows = train(
        train_items, tune_items, labels, vocab, cfg.encoder_config(), cfg.train_config()
    )
    save_model(args.out, model)
    log_path = args.log or args.out + ".log.json"
    log_payload = {
        "epochs": log_rows,
        "threshold": model.threshold,
        "splits": {name: [e.id for e in part] for name, part in parts.items()},
    }
    Path(log_path).write_text(dump_json(log_payload, indent=2), encoding="utf-8")
    if args.split_out:
        for name, part in parts.items():
            dump_corpus(part, f"{args.split_out}.{name}.jsonl")
    _log(f"saved checkpoint to {args.out} (threshold {model.threshold:.4f})")
    return 0


def cmd_detect(args) -> int:
    cfg = _config_from_args(args)
    model = load_model(args.model)
    _, usable = _usable_entries(args.corpus)
    items = [(e.id, e.pdg) for e in usable]
    scored = _score_in_chunks(model, items, cfg.jobs)
    ranked = rank_methods(scored, model.threshold)
    report = {"threshold": model.threshold, "methods": detection_report(ranked)}
    _emit(dump_json(report, indent=2), args.out)
    _log(f"scored {len(items)} method(s)")
    return 0


def cmd_explain(args) -> int:
    cfg = _config_from_args(args)
    model = load_model(args.model)
    _, usable = _usable_entries(args.corpus)
    if args.method:
        chosen = [e for e in usable if e.id in set(args.method)]
        missing = set(args.method) - {e.id for e in chosen}
        if missing:
            raise CorpusError(f"method ids not in corpus: {sorted(missing)}")
    else:
        chosen = usable

    explain_cfg = cfg.explain_settings()
    forced = bool(args.method)

    def one(entry):
        score, decision = classify(entry.pdg, model)
        if not forced and decision != "V":
            return None
        mask = learn_edge_mask(entry.pdg, model, decision, explain_cfg)
        sub = extract_subgraph(entry.pdg, mask, cfg.k)
        sub.method = entry.id
        report = explanation_report(entry.pdg, model, decision, sub)
        report["score"] = score
        graph = abstract_subgraph(sub, entry.pdg)
        report["abstract"] = {
            "nodes": [[i, label] for i, label in graph.nodes],
            "edges": [[s, d, kind] for s, d, kind in graph.edges],
        }
        return report, subgraph_to_dot(entry.pdg, sub)

    results = [r for r in _parallel_map(one, chosen, cfg.jobs) if r is not None]
    reports = [report for report, _ in results]
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "explanations.json").write_text(
            dump_json(reports, indent=2), encoding="utf-8"
        )
        for report, dot in results:
            (out_dir / f"{report['method']}.dot").write_text(dot, encoding="utf-8")
    else:
        sys.stdout.write(dump_json(reports, indent=2))
    _log(f"explained {len(reports)} of {len(chosen)} method(s)")
    return 0


def _load_json(path, what: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{what} file is not valid JSON: {exc}") from exc


def cmd_evaluate(args) -> int:
    cfg = _config_from_args(args)
    detections = _load_json(args.detections, "detections")
    explanation_rows = _load_json(args.explanations, "explanations") if args.explanations else []
    entries = load_corpus(args.corpus)
    labels = {e.id: e.label for e in entries}

    rows = detections.get("methods") if isinstance(detections, dict) else detections
    if not isinstance(rows, list):
        raise SchemaError("detections file must hold a methods list")
    unknown = [row["method"] for row in rows if row["method"] not in labels]
    if unknown:
        raise CorpusError(f"detected methods missing from corpus: {unknown[:5]}")
    ranked = [
        RankedDetection(
            method=row["method"], score=row["score"],
            decision=row["decision"], rank=row["rank"],
        )
        for row in rows
    ]

    truths = {}
    for entry in entries:
        if entry.interpretable and entry.pdg is not None:
            truths[entry.id] = fix_truth(entry)

    class _Explanation:
        def __init__(self, method, ranking):
            self.method = method
            self.statement_ranking = ranking

    subgraphs = []
    skipped = 0
    for row in explanation_rows:
        if row["method"] not in truths or labels.get(row["method"]) != "V":
            skipped += 1
            continue
        ranking = [(s["index"], s["importance"]) for s in row["statements"]]
        subgraphs.append(_Explanation(row["method"], ranking))

    report = evaluation_report(
        ranked,
        labels,
        subgraphs=subgraphs if subgraphs else None,
        truths=truths if subgraphs else None,
        num_nodes=cfg.k,
    )
    report["counts"] = {
        "methods_ranked": len(ranked),
        "explanations_evaluated": len(subgraphs),
        "explanations_skipped": skipped,
    }
    _emit(dump_json(report, indent=2), args.out)
    return 0


def cmd_mine(args) -> int:
    cfg = _config_from_args(args)
    rows = _load_json(args.explanations, "explanations")
    if isinstance(rows, dict):
        rows = rows.get("explanations", [])
    graphs = []
    for row in rows:
        if "abstract" not in row:
            raise SchemaError(
                f"explanation for {row.get('method', '?')!r} lacks an abstract graph"
            )
        graphs.append(
            AbstractGraph(
                nodes=[(int(i), str(label)) for i, label in row["abstract"]["nodes"]],
                edges=[(int(s), int(d), str(k)) for s, d, k in row["abstract"]["edges"]],
            )
        )
    lo, hi = args.sizes
    patterns = mine_patterns(graphs, cfg.min_support, (lo, hi))
    table = pattern_count_table(graphs, supports=list(TABLE_GRID), sizes=list(TABLE_GRID))
    report = {
        "min_support": cfg.min_support,
        "size_range": [lo, hi],
        "patterns": [pattern_to_dict(p) for p in patterns],
        "count_table": table,
    }
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "patterns.json").write_text(dump_json(report, indent=2), encoding="utf-8")
        for i, pattern in enumerate(patterns):
            (out_dir / f"pattern_{i:03d}.dot").write_text(
                pattern_to_dot(pattern), encoding="utf-8"
            )
    else:
        sys.stdout.write(dump_json(report, indent=2))
    _log(f"mined {len(patterns)} pattern(s) from {len(graphs)} explanation(s)")
    return 0


def cmd_gradcheck(args) -> int:
    results = run_gradcheck(seed=args.seed if args.seed is not None else 0)
    sys.stdout.write(dump_json(results, indent=2))
    ok = all_passed(results)
    _log(f"gradcheck: {sum(r['pass'] for r in results)}/{len(results)} ops pass")
    return 0 if ok else 1


def cmd_gen_corpus(args) -> int:
    cfg = _config_from_args(args)
    entries = generate_planted_corpus(args.n, seed=cfg.seed)
    dump_corpus(entries, args.out)
    vuln = sum(1 for e in entries if e.label == "V")
    _log(f"wrote {len(entries)} methods ({vuln} vulnerable) to {args.out}")
    return 0


# --- argument wiring --------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _size_pair(text: str):
    try:
        lo, hi = (int(part) for part in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected LO,HI") from exc
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vulgraph", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, jobs=False, k=False, min_support=False):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="random seed")
        if jobs:
            p.add_argument("--jobs", type=int, help="parallel workers")
        if k:
            p.add_argument("--k", type=int, help="edges kept per explanation")
        if min_support:
            p.add_argument("--min-support", dest="min_support", type=int,
                           help="minimum per-graph support")

    p = sub.add_parser("parse", help="emit PDG JSON (and DOT) per method")
    p.add_argument("files", nargs="+")
    p.add_argument("--out", help="output directory (default: stdout)")
    p.add_argument("--dot", action="store_true", help="also write DOT files")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("train", help="train a detector on a corpus")
    p.add_argument("corpus")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", help="training log path (default: <out>.log.json)")
    p.add_argument("--split-out", dest="split_out",
                   help="prefix for writing the train/tune/test corpora")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="score and rank a corpus")
    p.add_argument("corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="report path (default: stdout)")
    common(p, jobs=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("explain", help="edge-mask explanations for detections")
    p.add_argument("corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--method", action="append",
                   help="explain this method id (repeatable; default: all detected V)")
    p.add_argument("--out", help="output directory (default: stdout)")
    common(p, jobs=True, k=True)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", help="detection and interpretation metrics")
    p.add_argument("--detections", required=True)
    p.add_argument("--explanations")
    p.add_argument("--corpus", required=True, help="corpus with labels and fixes")
    p.add_argument("--out", help="report path (default: stdout)")
    common(p, k=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("mine", help="frequent patterns over explanations")
    p.add_argument("explanations", help="explanations JSON file")
    p.add_argument("--sizes", type=_size_pair, default=(1, 8),
                   help="edge-count range LO,HI (default 1,8)")
    p.add_argument("--out", help="output directory (default: stdout)")
    common(p, min_support=True)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("gradcheck", help="finite-difference check of every op")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("gen-corpus", help="write a seeded planted-defect corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_gen_corpus)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args) or 0
    except (VulgraphError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 — deliberate containment boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
