"""Batch command-line front end.

Subcommands wire ingestion -> dictionary build -> scoring -> evaluation:

* ``gen-synthetic``   write a synthetic benchmark in the on-disk formats
* ``build-dict``      fit PCA + per-class Gaussians, write VLMP/VLMD files
* ``evaluate``        score the test split with every method, write CSV/JSON
* ``diagnose``        per-class covariance condition numbers, raw vs projected
* ``sweep-threshold`` F1-vs-tau curves per method
* ``make-shift-map``  top-K text retrieval map for coarse-to-fine label shift

Every command is a pure function of its input bytes, flags and seed, so
reruns produce byte-identical outputs. Set ``VLME_THREADS`` to cap BLAS
parallelism (read before numpy is first imported).
"""

from __future__ import annotations

import os

if "VLME_THREADS" in os.environ:  # must precede the first numpy import
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["VLME_THREADS"])

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import EmptyTrainSplit, VlmUncertError
from .gaussians import GaussianDictionary, build_dictionary, load_dictionary, save_dictionary
from .label_shift import build_superclass_dictionary, build_superclass_map, load_superclass_map, save_superclass_map
from .metrics import ScoredSample, default_tau_grid, evaluate_method, f1_sweep, render_report_table
from .projection import condition_report, fit_pca, load_pca, save_pca
from .scoring import ScoreRun, ScoringConfig, score_dataset, uncertainty_from_confidence
from .store import (
    EmbeddingMatrix,
    LabeledDataset,
    atomic_write_bytes,
    load_dataset,
    partition_by_class,
    read_embedding_file,
    save_dataset,
    write_embedding_file,
)
from .synthetic import SyntheticSpec, make_benchmark

PCA_FILE = "pca.vlmp"
DICT_FILE = "dictionary.vlmd"
BUILD_PROVENANCE_FILE = "build_provenance.json"
SCORES_FILE = "scores.csv"
RUN_META_FILE = "run_metadata.json"
REPORT_TABLE_FILE = "report.txt"
CONDITION_FILE = "condition_report.csv"
F1_CURVE_FILE = "f1_curve.csv"

SCORE_COLUMNS = (
    "sample_index,true_class,predicted_class,correct,method,"
    "confidence,p_max,s_d,log_likelihood,s_unc"
)


def _fmt(x: float) -> str:
    return repr(float(x))


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    atomic_write_bytes(path, (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8"))


def _write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _scores_csv(run: ScoreRun) -> str:
    lines = [SCORE_COLUMNS]
    for r in run.rows:
        lines.append(
            f"{r.sample_index},{r.true_class},{r.predicted_class},"
            f"{int(r.correct)},{r.method},{_fmt(r.confidence)},{_fmt(r.p_max)},"
            f"{_fmt(r.s_d)},{_fmt(r.log_likelihood)},{_fmt(r.s_unc)}"
        )
    return "\n".join(lines) + "\n"


def _load_inputs(args) -> tuple[LabeledDataset, EmbeddingMatrix]:
    ds = load_dataset(Path(args.manifest))
    bank = read_embedding_file(Path(args.text_bank))
    return ds, bank


def _scoring_config(args) -> ScoringConfig:
    temp = args.temp
    if temp != "fit":
        temp = float(temp)
    return ScoringConfig(logit_scale=args.logit_scale, temperature=temp, seed=args.seed)


def cmd_gen_synthetic(args) -> int:
    spec = SyntheticSpec(
        classes=args.classes,
        dim=args.dim,
        train_per_class=args.train_per_class,
        test_per_class=args.test_per_class,
        noise_rate=args.noise_rate,
        feature_sigma=args.feature_sigma,
        seed=args.seed,
    )
    ds, bank = make_benchmark(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out / "dataset.json")
    write_embedding_file(out / "text_bank.vlme", bank)
    _write_json(out / "generator.json", {"spec": vars(spec)})
    print(f"wrote synthetic benchmark ({ds.embeddings.rows} rows) to {out}")
    return 0


def cmd_build_dict(args) -> int:
    ds = load_dataset(Path(args.manifest))
    if "train" not in ds.splits or ds.splits["train"].size == 0:
        raise EmptyTrainSplit("manifest has no non-empty 'train' split")
    train = EmbeddingMatrix(
        ds.embeddings.data[ds.splits["train"]], normalized=ds.embeddings.normalized
    )
    pca = fit_pca(train, args.pca_dim)
    if args.shift_map:
        super_map = load_superclass_map(Path(args.shift_map))
        gdict = build_superclass_dictionary(super_map, ds, pca, args.cov)
    else:
        gdict = build_dictionary(
            ds, pca, args.cov, max_per_class=args.max_per_class,
            seed=args.seed, sampling=args.subsample,
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_pca(pca, out / PCA_FILE)
    save_dictionary(gdict, out / DICT_FILE)
    provenance = {
        "command": "build-dict",
        "version": __version__,
        "manifest": str(Path(args.manifest)),
        "manifest_sha256": _sha256_file(Path(args.manifest)),
        "dataset_sha256": ds.source_hash,
        "pca_dim": args.pca_dim,
        "cov": args.cov,
        "max_per_class": args.max_per_class,
        "seed": args.seed,
        "subsample": args.subsample,
        "shift_map": str(Path(args.shift_map)) if args.shift_map else None,
        "classes": len(gdict.entries),
        "excluded_classes": gdict.provenance.get("excluded_classes", []),
        "outputs": {
            PCA_FILE: _sha256_file(out / PCA_FILE),
            DICT_FILE: _sha256_file(out / DICT_FILE),
        },
    }
    _write_json(out / BUILD_PROVENANCE_FILE, provenance)
    print(f"wrote {out / PCA_FILE} and {out / DICT_FILE} ({len(gdict.entries)} classes)")
    return 0


def _load_built(args, out: Path) -> GaussianDictionary:
    pca = load_pca(out / PCA_FILE)
    return load_dictionary(out / DICT_FILE, pca)


def _resolve_train_manifest(args, out: Path) -> Path:
    if args.train_manifest:
        return Path(args.train_manifest)
    prov_path = out / BUILD_PROVENANCE_FILE
    if prov_path.is_file():
        recorded = json.loads(prov_path.read_text(encoding="utf-8")).get("manifest")
        if recorded:
            return Path(recorded)
    return Path(args.manifest)


def cmd_evaluate(args) -> int:
    ds, bank = _load_inputs(args)
    out = Path(args.out)
    gdict = _load_built(args, out)
    shift_k = None
    if args.shift_map:
        super_map = load_superclass_map(Path(args.shift_map))
        train_ds = load_dataset(_resolve_train_manifest(args, out))
        gdict = build_superclass_dictionary(super_map, train_ds, gdict.pca, args.cov)
        shift_k = super_map.k
    config = _scoring_config(args)
    run = score_dataset(ds, bank, gdict, config)

    _write_text(out / SCORES_FILE, _scores_csv(run))
    taus = default_tau_grid() if args.tau_grid is None else np.linspace(0.0, 1.0, args.tau_grid)
    reports = []
    for method in run.methods:
        rows = run.rows_for(method)
        samples = [ScoredSample(r.confidence, r.correct) for r in rows]
        unc = uncertainty_from_confidence(
            method, np.array([r.confidence for r in rows]), run.num_classes
        )
        f1_samples = [ScoredSample(1.0 - u, r.correct) for u, r in zip(unc, rows)]
        report = evaluate_method(method, samples, f1_samples=f1_samples, taus=taus)
        reports.append(report)
        _write_json(out / f"report_{method}.json", report.to_dict())

    if args.tau is not None:
        decisions = ["sample_index,method,s_unc,reject"]
        for r in run.rows_for(run.fused_method):
            decisions.append(
                f"{r.sample_index},{r.method},{_fmt(r.s_unc)},{int(r.s_unc > args.tau)}"
            )
        _write_text(out / "decisions.csv", "\n".join(decisions) + "\n")

    meta = {
        "command": "evaluate",
        "version": __version__,
        "manifest": str(Path(args.manifest)),
        "manifest_sha256": _sha256_file(Path(args.manifest)),
        "text_bank": str(Path(args.text_bank)),
        "text_bank_sha256": _sha256_file(Path(args.text_bank)),
        "dictionary_sha256": _sha256_file(out / DICT_FILE),
        "pca_sha256": _sha256_file(out / PCA_FILE),
        "logit_scale": run.logit_scale,
        "temperature": run.temperature,
        "temperature_mode": args.temp,
        "seed": args.seed,
        "pca_dim": gdict.pca.output_dim,
        "covariance_kind": gdict.covariance_kind,
        "label_shift_k": shift_k,
        "tau": args.tau,
        "methods": run.methods,
        "num_classes": run.num_classes,
        "test_samples": len(run.rows) // len(run.methods),
    }
    _write_json(out / RUN_META_FILE, meta)
    table = render_report_table(reports)
    _write_text(out / REPORT_TABLE_FILE, table + "\n")
    print(table)
    return 0


def cmd_diagnose(args) -> int:
    ds = load_dataset(Path(args.manifest))
    train_idx = ds.split_indices("train")
    train = EmbeddingMatrix(
        ds.embeddings.data[train_idx], normalized=ds.embeddings.normalized
    )
    pca = fit_pca(train, args.pca_dim)
    partitions, _ = partition_by_class(ds, "train")
    usable = [p for p in partitions if len(p.row_indices) >= 2]
    skipped = [p for p in partitions if len(p.row_indices) < 2]

    from .projection import project

    projected = project(pca, ds.embeddings)
    lines = ["space,class_index,log10_condition,rank_deficient,n_samples"]
    for tag, feats in (("raw", ds.embeddings), ("projected", projected)):
        report = condition_report(usable, feats, tag)
        for c in sorted(report.per_class):
            e = report.per_class[c]
            lines.append(
                f"{tag},{c},{_fmt(e.log10_condition)},{int(e.rank_deficient)},{e.sample_count}"
            )
        for p in skipped:
            lines.append(f"{tag},{p.class_index},insufficient,,{len(p.row_indices)}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / CONDITION_FILE, "\n".join(lines) + "\n")
    print(f"wrote {out / CONDITION_FILE} ({len(usable)} classes, {len(skipped)} skipped)")
    return 0


def cmd_sweep_threshold(args) -> int:
    out = Path(args.out)
    scores_path = out / SCORES_FILE
    if not scores_path.is_file():
        status = cmd_evaluate(args)
        if status != 0:
            return status
    meta = json.loads((out / RUN_META_FILE).read_text(encoding="utf-8"))
    num_classes = int(meta["num_classes"])

    per_method: dict[str, list[tuple[float, bool]]] = {}
    with open(scores_path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        ci = {name: i for i, name in enumerate(header)}
        for line in fh:
            parts = line.rstrip("\n").split(",")
            method = parts[ci["method"]]
            per_method.setdefault(method, []).append(
                (float(parts[ci["confidence"]]), parts[ci["correct"]] == "1")
            )

    taus = default_tau_grid() if args.tau_grid is None else np.linspace(0.0, 1.0, args.tau_grid)
    lines = ["method,tau,f1"]
    for method in sorted(per_method):
        conf = np.array([c for c, _ in per_method[method]])
        unc = uncertainty_from_confidence(method, conf, num_classes)
        samples = [
            ScoredSample(1.0 - u, ok) for u, (_, ok) in zip(unc, per_method[method])
        ]
        for tau, f1 in f1_sweep(samples, taus):
            lines.append(f"{method},{_fmt(tau)},{_fmt(f1)}")
    _write_text(out / F1_CURVE_FILE, "\n".join(lines) + "\n")
    print(f"wrote {out / F1_CURVE_FILE} ({len(taus)} thresholds)")
    return 0


def cmd_make_shift_map(args) -> int:
    query = read_embedding_file(Path(args.query_bank))
    dictionary = read_embedding_file(Path(args.dict_bank))
    super_map = build_superclass_map(query, dictionary, k_override=args.k)
    save_superclass_map(super_map, Path(args.out_file))
    print(f"wrote {args.out_file} (K={super_map.k}, {super_map.n_test} query classes)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlmuncert",
        description="Error detection for contrastive vision-language classifiers.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, manifest=True, bank=False):
        if manifest:
            p.add_argument("--manifest", required=True, help="dataset manifest JSON")
        if bank:
            p.add_argument("--text-bank", required=True, help="class text embeddings (VLME)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--pca-dim", type=int, default=128)
        p.add_argument("--cov", choices=["full", "diag"], default="full")

    p = sub.add_parser("gen-synthetic", help="write a synthetic benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--train-per-class", type=int, default=400)
    p.add_argument("--test-per-class", type=int, default=400)
    p.add_argument("--noise-rate", type=float, default=0.10)
    p.add_argument("--feature-sigma", type=float, default=0.25)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("build-dict", help="fit PCA and the class Gaussian dictionary")
    add_common(p)
    p.add_argument("--max-per-class", type=int, default=None)
    p.add_argument("--subsample", choices=["random", "first"], default="random")
    p.add_argument("--shift-map", default=None, help="superclass map JSON for label shift")
    p.set_defaults(func=cmd_build_dict)

    p = sub.add_parser("evaluate", help="score the test split and write reports")
    add_common(p, bank=True)
    p.add_argument("--logit-scale", type=float, default=100.0)
    p.add_argument("--temp", default="fit", help="'fit' or a fixed temperature")
    p.add_argument("--tau", type=float, default=None, help="also emit reject decisions")
    p.add_argument("--tau-grid", type=int, default=None, help="number of tau grid points")
    p.add_argument("--shift-map", default=None)
    p.add_argument("--train-manifest", default=None,
                   help="fine-grained manifest for label-shift pooling "
                        "(defaults to the one recorded by build-dict)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diagnose", help="per-class covariance condition numbers")
    add_common(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("sweep-threshold", help="F1 vs rejection threshold per method")
    add_common(p, bank=True)
    p.add_argument("--logit-scale", type=float, default=100.0)
    p.add_argument("--temp", default="fit")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--tau-grid", type=int, default=None)
    p.add_argument("--shift-map", default=None)
    p.add_argument("--train-manifest", default=None)
    p.set_defaults(func=cmd_sweep_threshold)

    p = sub.add_parser("make-shift-map", help="top-K text retrieval map")
    p.add_argument("--query-bank", required=True, help="coarse class text embeddings")
    p.add_argument("--dict-bank", required=True, help="fine class text embeddings")
    p.add_argument("--k", type=int, default=None, help="override the class-ratio K")
    p.add_argument("--out-file", required=True)
    p.set_defaults(func=cmd_make_shift_map)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VlmUncertError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
