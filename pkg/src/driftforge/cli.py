"""Command-line entry point.

Subcommands: ingest, build-lexicon, fit, detect, retrieve, augment,
adapt, evaluate, analyze, sweep. Exit codes: 0 success, 1 validation or
usage error, 2 I/O error. Flags override config-file values. Every
emitted artifact embeds the seed and a hash of the resolved
configuration, so reruns with identical inputs are byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import adapt as adapt_mod
from . import augment as augment_mod
from . import corpus as corpus_mod
from . import lexicon as lexicon_mod
from . import retrieval as retrieval_mod
from . import shift as shift_mod
from . import stats as stats_mod
from . import synthetic as synthetic_mod
from . import trainer as trainer_mod
from .errors import ConfigError, DriftforgeError, ParseError, ValidationError


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def parse_flat_config(path: str | Path) -> dict:
    """Parse a flat `key = value` config file (comments with #)."""
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        values[key.strip()] = _parse_value(value.strip())
    return values


def _parse_value(raw: str):
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        return raw[1:-1]
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def _fingerprint(value):
    """Replace path-valued config entries by content hashes, so the config
    hash identifies the actual inputs rather than where they happen to live."""
    if isinstance(value, str):
        path = Path(value)
        if path.is_file():
            return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()
        if path.is_dir():
            entries = [
                (p.name, hashlib.sha256(p.read_bytes()).hexdigest())
                for p in sorted(path.rglob("*"))
                if p.is_file()
            ]
            digest = hashlib.sha256(json.dumps(entries).encode("utf-8")).hexdigest()
            return "dir-sha256:" + digest
    if isinstance(value, list):
        return [_fingerprint(v) for v in value]
    return value


def _meta(args_dict: dict, seed) -> dict:
    semantic = {
        k: _fingerprint(v)
        for k, v in args_dict.items()
        if k not in ("func", "command", "out", "out_dir") and not callable(v)
    }
    resolved = json.dumps(semantic, sort_keys=True, default=str)
    return {
        "seed": seed,
        "config_sha256": hashlib.sha256(resolved.encode("utf-8")).hexdigest(),
        "tool": "driftforge 0.1.0",
    }


def _meta_line(meta: dict) -> str:
    return f"seed={meta['seed']} config_sha256={meta['config_sha256']}"


def _parse_intervals(text: str) -> list[tuple[int, int]]:
    ranges = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            a, b = part.split("-")
            ranges.append((int(a), int(b)))
        except ValueError:
            raise ConfigError(f"bad interval {part!r}, expected like 2008-2010")
    if not ranges:
        raise ConfigError("no intervals given")
    return ranges


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    cfg = parse_flat_config(args.partition)
    partition = corpus_mod.TimePartition.from_inclusive_ranges(
        _parse_intervals(str(cfg["intervals"])),
        source_index=int(cfg.get("source_index", 0)),
        target_index=int(cfg.get("target_index", 1)),
    )
    ratio = args.ratio if args.ratio is not None else float(cfg.get("ratio", 0.7))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    strict = args.strict or bool(cfg.get("strict", False))

    docs = corpus_mod.load_corpus(args.corpus)
    result = corpus_mod.partition_by_time(docs, partition, strict=strict)
    meta = _meta({"corpus": args.corpus, "partition": cfg, "ratio": ratio,
                  "seed": seed, "strict": strict}, seed)
    summary = {
        "_meta": meta,
        "intervals": [],
        "dropped": sorted(result.dropped),
        "label_vocabulary": corpus_mod.label_vocabulary(docs),
    }
    splits = {}
    for index, (start, end) in enumerate(partition.intervals):
        ids = result.buckets[index]
        entry = {
            "index": index,
            "years": [start, end - 1],
            "count": len(ids),
            "role": ("source" if index == partition.source_index
                     else "target" if index == partition.target_index else "middle"),
        }
        if ids:
            split = corpus_mod.split_train_test(ids, ratio, seed)
            splits[str(index)] = {
                "train": sorted(split.train_ids),
                "test": sorted(split.test_ids),
            }
            entry["train_count"] = len(split.train_ids)
            entry["test_count"] = len(split.test_ids)
        summary["intervals"].append(entry)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "partition_summary.json", summary)
    _write_json(out / "splits.json", {"_meta": meta, "splits": splits})
    print(f"{len(docs)} documents into {len(partition.intervals)} intervals "
          f"({len(result.dropped)} dropped)")
    return 0


def cmd_build_lexicon(args) -> int:
    lexicons = []
    for path in args.mesh or []:
        lexicons.append(lexicon_mod.ingest_mesh_xml(path))
    for path in args.tabular or []:
        if not (args.pt_col and args.npt_col):
            raise ConfigError("--tabular requires --pt-col and --npt-col")
        lexicons.append(
            lexicon_mod.ingest_tabular_thesaurus(
                path, args.pt_col, args.npt_col, delimiter=args.delimiter
            )
        )
    for path in args.cso or []:
        lexicons.append(lexicon_mod.ingest_cso_triples(path))
    for path in args.llm or []:
        lexicons.append(lexicon_mod.ingest_llm_lexicon(path, strict=not args.lenient))
    if not lexicons:
        raise ConfigError("no lexicon sources given")
    merged = lexicon_mod.merge(*lexicons)
    meta = _meta(vars(args), seed=0)
    lexicon_mod.save_lexicon(args.out, merged, meta=meta)
    print(f"{len(merged)} concepts -> {args.out}")
    return 0


def cmd_fit(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emb = stats_mod.EmbeddingMatrix.read(args.embeddings)
    feature_stats = stats_mod.fit_feature_stats(
        emb, shrinkage=args.shrinkage, epsilon=args.epsilon
    )
    feature_stats.write(out / "feature_stats.dfsta")
    msg = f"feature stats fitted on {emb.n} x {emb.dim}"
    if args.corpus and args.lexicon:
        docs = corpus_mod.load_corpus(args.corpus)
        lexicon = lexicon_mod.load_lexicon(args.lexicon)
        concept_stats = stats_mod.fit_concept_stats(docs, lexicon, epsilon=args.epsilon)
        meta = _meta(vars(args), seed=0)
        concept_stats.save(out / "concept_stats.json", meta=meta)
        msg += f"; {len(concept_stats.freq)} concepts over {concept_stats.n_docs} docs"
    print(msg)
    return 0


def _load_aligned(corpus_path, logits_path, embeddings_path):
    docs = corpus_mod.load_corpus(corpus_path)
    logits = shift_mod.LogitMatrix.read(logits_path)
    emb = stats_mod.EmbeddingMatrix.read(embeddings_path)
    order = {doc_id: i for i, doc_id in enumerate(logits.ids)}
    order_e = {doc_id: i for i, doc_id in enumerate(emb.ids)}
    missing = [d.id for d in docs if d.id not in order or d.id not in order_e]
    if missing:
        raise ValidationError(f"documents without logits/embeddings: {missing[:5]}")
    ids = [d.id for d in docs]
    logits = shift_mod.LogitMatrix(
        ids=ids, rows=logits.rows[[order[i] for i in ids]]
    )
    emb = stats_mod.EmbeddingMatrix(ids=ids, rows=emb.rows[[order_e[i] for i in ids]])
    return docs, logits, emb


def cmd_detect(args) -> int:
    docs, logits, emb = _load_aligned(args.corpus, args.logits, args.embeddings)
    stats_dir = Path(args.stats)
    feature_stats = stats_mod.SourceFeatureStats.read(stats_dir / "feature_stats.dfsta")
    concept_stats = stats_mod.ConceptStats.load(stats_dir / "concept_stats.json")
    lexicon = lexicon_mod.load_lexicon(args.lexicon)
    config = shift_mod.ShiftConfig(tau_p=args.tau_p, tau_h=args.tau_h, rho=args.rho)
    scores = shift_mod.score_documents(
        docs, logits, emb, feature_stats, concept_stats, lexicon, config
    )
    shift_set = shift_mod.detect(scores, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = _meta(vars(args), seed=0)
    shift_mod.write_scores_csv(out / "scores.csv", scores, meta_line=_meta_line(meta))
    _write_json(
        out / "shift_sets.json",
        {
            "_meta": meta,
            "uncertainty": sorted(shift_set.uncertainty_set),
            "feature": sorted(shift_set.feature_set),
            "ontology": sorted(shift_set.ontology_set),
            "shifted": sorted(shift_set.shifted),
        },
    )
    print(f"D_U={len(shift_set.uncertainty_set)} D_F={len(shift_set.feature_set)} "
          f"D_O={len(shift_set.ontology_set)} D_shift={len(shift_set.shifted)} "
          f"of n={scores.n}")
    return 0


def cmd_retrieve(args) -> int:
    target_emb = stats_mod.EmbeddingMatrix.read(args.targets)
    source_emb = stats_mod.EmbeddingMatrix.read(args.sources)
    if args.ids:
        payload = json.loads(Path(args.ids).read_text(encoding="utf-8"))
        target_ids = payload["shifted"] if isinstance(payload, dict) else payload
    else:
        target_ids = list(target_emb.ids)
    results = retrieval_mod.retrieve_topk(target_ids, target_emb, source_emb, args.k)
    meta = _meta(vars(args), seed=0)
    retrieval_mod.save_retrievals(args.out, results, meta=meta)
    print(f"{len(results)} targets x top-{args.k} -> {args.out}")
    return 0


def cmd_augment(args) -> int:
    retrievals = retrieval_mod.load_retrievals(args.retrievals)
    docs = corpus_mod.load_corpus(args.corpus)
    lexicon = lexicon_mod.load_lexicon(args.lexicon)
    priority = (
        lexicon_mod.load_lexicon(args.priority_lexicon)
        if args.priority_lexicon
        else None
    )
    config = augment_mod.AugmentConfig(
        variants=args.variants,
        max_subs=args.max_subs,
        include_originals=not args.no_originals,
        dedupe_retrieved=args.dedupe,
        seed=args.seed,
    )
    batch = augment_mod.augment_batch(
        retrievals, docs, lexicon, config, priority_lexicon=priority
    )
    meta = _meta(vars(args), seed=args.seed)
    augment_mod.save_batch(args.out, batch, meta=meta)
    print(f"{len(batch)} samples -> {args.out}")
    return 0


def _build_trainer(cfg: dict, labels: list[str]):
    kind = cfg.get("trainer", "stub")
    if kind == "stub":
        return trainer_mod.StubTrainer(
            labels,
            seed=int(cfg.get("seed", 0)),
            dim=int(cfg.get("stub_dim", 256)),
            lr=float(cfg.get("stub_lr", 5.0)),
            update_lr=float(cfg["stub_update_lr"]) if "stub_update_lr" in cfg else None,
            steps_per_update=int(cfg.get("stub_steps_per_update", 50)),
        )
    if kind == "subprocess":
        if "trainer_cmd" not in cfg:
            raise ConfigError("trainer = subprocess requires trainer_cmd")
        return trainer_mod.SubprocessTrainer(str(cfg["trainer_cmd"]).split())
    if kind == "socket":
        return trainer_mod.SocketTrainer(
            str(cfg.get("trainer_host", "127.0.0.1")), int(cfg["trainer_port"])
        )
    raise ConfigError(f"unknown trainer kind {kind!r}")


def cmd_adapt(args) -> int:
    cfg = parse_flat_config(args.config)
    seed = int(cfg.get("seed", 0))
    source_docs = corpus_mod.load_corpus(cfg["source_corpus"])
    target_docs = corpus_mod.load_corpus(cfg["target_corpus"])
    lexicon = lexicon_mod.load_lexicon(cfg["lexicon"])
    augment_lexicon = (
        lexicon_mod.load_lexicon(cfg["augment_lexicon"])
        if "augment_lexicon" in cfg
        else None
    )
    labels = sorted(
        set(corpus_mod.label_vocabulary(source_docs))
        | set(corpus_mod.label_vocabulary(target_docs))
    )
    trainer = _build_trainer(cfg, labels)
    if cfg.get("trainer", "stub") == "stub" and cfg.get("fit_source", True):
        trainer.fit_source(source_docs, steps=int(cfg.get("stub_fit_steps", 200)))

    if "stats_dir" in cfg:
        stats_dir = Path(cfg["stats_dir"])
        feature_stats = stats_mod.SourceFeatureStats.read(stats_dir / "feature_stats.dfsta")
        concept_stats = stats_mod.ConceptStats.load(stats_dir / "concept_stats.json")
    else:
        emb, _ = trainer.encode(source_docs)
        feature_stats = stats_mod.fit_feature_stats(
            emb, shrinkage=float(cfg.get("shrinkage", stats_mod.DEFAULT_SHRINKAGE))
        )
        concept_stats = stats_mod.fit_concept_stats(source_docs, lexicon)

    adapt_config = adapt_mod.AdaptConfig(
        batch_size=int(cfg.get("batch_size", 32)),
        k=int(cfg.get("k", 3)),
        shift=shift_mod.ShiftConfig(
            tau_p=float(cfg.get("tau_p", 0.5)),
            tau_h=float(cfg.get("tau_h", 0.25)),
            rho=float(cfg.get("rho", 0.1)),
        ),
        augment=augment_mod.AugmentConfig(
            variants=int(cfg.get("variants", 1)),
            max_subs=int(cfg.get("max_subs", 3)),
            include_originals=bool(cfg.get("include_originals", True)),
            dedupe_retrieved=bool(cfg.get("dedupe_retrieved", False)),
            seed=seed,
        ),
        seed=seed,
        replay_source=int(cfg.get("replay_source", 0)),
    )
    out = Path(cfg.get("out_dir", args.out or "adapt_out"))
    out.mkdir(parents=True, exist_ok=True)
    try:
        result = adapt_mod.run_adaptation(
            adapt_mod.batched(target_docs, adapt_config.batch_size),
            source_docs,
            lexicon,
            feature_stats,
            concept_stats,
            adapt_config,
            trainer,
            augment_lexicon=augment_lexicon,
            eval_docs=target_docs,
            log_path=out / "adaptation_log.jsonl",
        )
    finally:
        if hasattr(trainer, "close"):
            trainer.close()
    meta = _meta(cfg, seed)
    adapt_mod.save_predictions(
        out / "predictions.jsonl", result.predictions, result.probabilities, meta=meta
    )
    report = adapt_mod.evaluate(
        result.predictions, {d.id: d.labels for d in target_docs}, labels
    )
    _write_json(out / "metrics.json", {"_meta": meta, **report.to_json()})
    print(report.render(), end="")
    print(f"model version {result.model.version}, artifacts in {out}")
    return 0


def cmd_evaluate(args) -> int:
    predictions = adapt_mod.load_label_sets(args.pred)
    gold = adapt_mod.load_label_sets(args.gold)
    labels = None
    if args.labels:
        labels = json.loads(Path(args.labels).read_text(encoding="utf-8"))
    report = adapt_mod.evaluate(predictions, gold, labels)
    print(report.render(), end="")
    if args.out:
        _write_json(Path(args.out), {"_meta": _meta(vars(args), 0), **report.to_json()})
    return 0


def cmd_analyze(args) -> int:
    sets_payload = json.loads(Path(args.shift_sets).read_text(encoding="utf-8"))
    shift_set = shift_mod.ShiftSet(
        uncertainty_set=frozenset(sets_payload["uncertainty"]),
        feature_set=frozenset(sets_payload["feature"]),
        ontology_set=frozenset(sets_payload["ontology"]),
    )
    docs = corpus_mod.load_corpus(args.corpus)
    years = {d.id: d.timestamp for d in docs}
    scores = _read_scores_csv(args.scores)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = _meta(vars(args), seed=0)
    overlap = shift_mod.overlap_report(shift_set, scores.n)
    trend = shift_mod.trend_report(scores, years)
    shift_mod.write_overlap_csv(out / "overlap.csv", overlap, meta_line=_meta_line(meta))
    shift_mod.write_trend_csv(out / "trend.csv", trend, meta_line=_meta_line(meta))
    text = shift_mod.render_overlap_text(overlap) + "\n" + shift_mod.render_trend_text(trend)
    (out / "analysis.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def _read_scores_csv(path) -> shift_mod.ShiftScores:
    import csv

    import numpy as np

    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
        else:
            raise ParseError("scores file has no data")
        reader = csv.DictReader([line] + list(fh))
        for record in reader:
            rows.append(record)
    ids = [r["id"] for r in rows]
    return shift_mod.ShiftScores(
        ids=ids,
        p_max=np.array([float(r["p_max"]) for r in rows]),
        entropy=np.array([float(r["entropy"]) for r in rows]),
        uncertain=np.array([bool(int(r["uncertain"])) for r in rows]),
        feature=np.array([float(r["feature"]) for r in rows]),
        ontology=np.array([float(r["ontology"]) for r in rows]),
        concept_count=np.array([int(r["concept_count"]) for r in rows]),
        zero_concept=np.array([bool(int(r["zero_concept"])) for r in rows]),
    )


def _parse_param(spec: str) -> tuple[str, list[float]]:
    name, _, values = spec.partition("=")
    name = name.strip()
    values = values.strip()
    if name not in ("k", "rho") or not values:
        raise ConfigError(f"bad --param {spec!r}, expected k=... or rho=...")
    if ".." in values:
        a, b = values.split("..")
        return name, [float(v) for v in range(int(a), int(b) + 1)]
    return name, [float(v) for v in values.split(",")]


def cmd_sweep(args) -> int:
    base = synthetic_mod.ExperimentConfig()
    if args.profile == "fast":
        base = replace(
            base,
            synthetic=replace(base.synthetic, n_source=600, n_target=200),
            fit_steps=300,
            steps_per_update=150,
            adapt=replace(
                base.adapt,
                augment=augment_mod.AugmentConfig(variants=2, max_subs=8, seed=7),
                replay_source=64,
            ),
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = _meta(vars(args), seed=base.synthetic.seed)
    for spec in args.param:
        name, values = _parse_param(spec)
        table = synthetic_mod.run_sweep(name, values, base)
        text = table.render()
        (out / f"sweep_{name}.txt").write_text(text, encoding="utf-8")
        import csv

        with open(out / f"sweep_{name}.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# {_meta_line(meta)}\n")
            writer = csv.writer(fh)
            writer.writerows(table.to_csv_rows())
        print(text)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="driftforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load, validate, partition, split a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--partition", required=True, help="flat key=value config file")
    p.add_argument("--ratio", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--out", default="ingest_out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-lexicon", help="merge thesauri into one lexicon")
    p.add_argument("--mesh", action="append")
    p.add_argument("--tabular", action="append")
    p.add_argument("--pt-col")
    p.add_argument("--npt-col")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--cso", action="append")
    p.add_argument("--llm", action="append")
    p.add_argument("--lenient", action="store_true",
                   help="tolerate extra keys in LLM lexicon JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_lexicon)

    p = sub.add_parser("fit", help="fit source-period statistics")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--corpus")
    p.add_argument("--lexicon")
    p.add_argument("--shrinkage", type=float, default=stats_mod.DEFAULT_SHRINKAGE)
    p.add_argument("--epsilon", type=float, default=stats_mod.DEFAULT_EPSILON)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("detect", help="score documents and assemble the shift set")
    p.add_argument("--corpus", required=True)
    p.add_argument("--logits", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--stats", required=True, help="directory written by fit")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--rho", type=float, default=0.1)
    p.add_argument("--tau-p", type=float, default=0.5)
    p.add_argument("--tau-h", type=float, default=0.25)
    p.add_argument("--out", default="detect_out")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("retrieve", help="top-k similar source documents")
    p.add_argument("--targets", required=True, help="target embedding file")
    p.add_argument("--sources", required=True, help="source embedding file")
    p.add_argument("--ids", help="JSON array or shift_sets.json of target ids")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("augment", help="synonym-substituted training batch")
    p.add_argument("--retrievals", required=True)
    p.add_argument("--corpus", required=True, help="source corpus JSONL")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--priority-lexicon")
    p.add_argument("--variants", type=int, default=1)
    p.add_argument("--max-subs", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-originals", action="store_true")
    p.add_argument("--dedupe", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("adapt", help="run the adaptation loop")
    p.add_argument("--config", required=True, help="flat key=value config file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("evaluate", help="multi-label metrics, predictions vs gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--labels", help="JSON array fixing the label vocabulary")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="overlap and year-wise trend reports")
    p.add_argument("--scores", required=True, help="scores.csv from detect")
    p.add_argument("--shift-sets", required=True, help="shift_sets.json from detect")
    p.add_argument("--corpus", required=True, help="corpus JSONL with years")
    p.add_argument("--out", default="analyze_out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="sensitivity sweep on the synthetic corpus")
    p.add_argument("--param", action="append", required=True,
                   help="k=1..5 or rho=0.05,0.1,0.2,0.3")
    p.add_argument("--profile", choices=("fast", "full"), default="full")
    p.add_argument("--out", default="sweep_out")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DriftforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
