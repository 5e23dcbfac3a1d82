"""Command-line interface: ``cmifs generate | select | verify | bench | bound``.

Exit codes: 0 success, 1 property failure, 2 usage error, 3 generation
failure, 4 data or numerical failure. Every command writes one run manifest
(JSON) that records the resolved parameters, seeds and input digests.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import linear_subset_bound
from .data import CLASSIFICATION, REGRESSION, Dataset, TaskKind, load_csv, train_test_split, write_csv
from .errors import CmifsError, DataError, GenerationError, OutOfRange, PropertyViolation
from .estimator import KnnConfig, auto_k
from .evaluate import knn_accuracy
from .oracle import TabularJoint
from .selection import KnnScorer, StoppingRule, select
from .synth import COND_GAUSS, EXAMPLE1, LINEAR_GAUSS, SynthSpec, derive_seed, generate
from .verify import format_table, run_file_suite, run_suite

EXIT_OK, EXIT_PROPERTY, EXIT_USAGE, EXIT_GENERATION, EXIT_DATA = 0, 1, 2, 3, 4
MANIFEST_SCHEMA = 1
KINDS = {"cond-gauss": COND_GAUSS, "example1": EXAMPLE1, "linear-gauss": LINEAR_GAUSS}


class UsageError(Exception):
    pass


def _sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def _k_neighbors(text: str, n: int) -> KnnConfig:
    k = auto_k(n) if text == "auto" else int(text)
    return KnnConfig(k)


def _parse_rule(text: str) -> StoppingRule:
    try:
        return StoppingRule.parse(text)
    except OutOfRange as exc:
        raise UsageError(str(exc)) from None


def _task(args) -> TaskKind:
    if args.task == CLASSIFICATION:
        return TaskKind.classification()
    bound = None if args.bound in (None, "auto") else float(args.bound)
    return TaskKind.regression(bound)


# -- commands -------------------------------------------------------------------


def cmd_generate(args) -> dict:
    kind = KINDS[args.kind]
    d = 2 if kind == EXAMPLE1 else args.d
    weights = tuple(float(w) for w in args.weights.split(",")) if args.weights else None
    spec = SynthSpec(kind, n=args.n, d=d, k=args.k if kind == COND_GAUSS else 1, seed=args.seed,
                     a=args.a, b=args.b, sigma_z=args.sigma_z, weights=weights,
                     noise_std=args.noise_std, sampler=args.sampler)
    ds = generate(spec)
    out = Path(args.out)
    write_csv(ds, out)
    sidecar = out.with_name(out.name + ".spec.json")
    sidecar.write_text(spec.to_json() + "\n", encoding="utf-8")
    print(f"wrote {out} ({ds.n_samples} rows, {ds.n_features} features)")
    return {"outputs": [str(out), str(sidecar)], "seeds": {"seed": args.seed}}


def cmd_select(args) -> dict:
    rule = _parse_rule(args.stop)
    ds = load_csv(args.input, args.target, _task(args))
    cfg = _k_neighbors(args.k_neighbors, ds.n_samples)
    trace = select(ds, rule, args.direction, cfg, seed=args.seed,
                   standardize_features=not args.no_standardize)
    out = Path(args.out) if args.out else Path(args.input).with_suffix(".trace.json")
    out.write_text(trace.to_json() + "\n", encoding="utf-8")
    print("selected:", " ".join(ds.feature_names[i] for i in trace.selected))
    return {"outputs": [str(out)], "inputs": [args.input], "seeds": {"seed": args.seed},
            "resolved": {"k_neighbors": cfg.k, "rule": str(rule)}}


def cmd_verify(args) -> dict:
    if args.from_file:
        try:
            joint = TabularJoint.load(args.from_file)
        except PropertyViolation as exc:
            print(f"FAIL normalization: {exc}", file=sys.stderr)
            raise
        results = run_file_suite(joint, args.from_file, seed=args.seed)
    else:
        results = run_suite(n_joints=args.joints, d=args.d, seed=args.seed)
    table = format_table(results)
    print(table)
    for r in results:
        for v in r.violations[:20]:
            print(f"violation [{r.name}] {v}")
    report = {
        "schema_version": MANIFEST_SCHEMA,
        "properties": [
            {"name": r.name, "cases": r.cases, "violations": r.violations,
             "worst_margin": r.worst_margin, "passed": r.passed}
            for r in results
        ],
        "all_pass": all(r.passed for r in results),
    }
    outputs = []
    if args.out:
        _write_json(Path(args.out), report)
        outputs.append(args.out)
    inputs = [args.from_file] if args.from_file else []
    if not report["all_pass"]:
        raise PropertyViolation("one or more properties failed")
    return {"outputs": outputs, "inputs": inputs, "seeds": {"seed": args.seed}}


BENCH_FIELDS = ["problem", "source", "k_useful", "rule", "n_features", "n_selected",
                "fraction_selected", "accuracy", "recall_useful", "guarantee"]


def _bench_problems(args):
    """Yield (label, dataset, k_useful or None, problem seed)."""
    if args.input:
        for i, path in enumerate(args.input):
            ds = load_csv(path, args.target, TaskKind.classification())
            yield path, ds, None, derive_seed(args.seed, "bench-file", i)
        return
    if args.k_list:
        ks = [int(v) for v in args.k_list.split(",")]
    else:
        lo, hi = args.k_uniform
        rng = np.random.default_rng(derive_seed(args.seed, "bench-k"))
        ks = [int(v) for v in rng.integers(lo, hi + 1, size=args.problems)]
    for i, k in enumerate(ks):
        pseed = derive_seed(args.seed, "bench-problem", i)
        spec = SynthSpec(COND_GAUSS, n=args.n, d=args.d, k=k, seed=pseed, sampler=args.sampler)
        yield f"synthetic#{i}", generate(spec), k, pseed


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def cmd_bench(args) -> dict:
    rules = [_parse_rule(r) for r in args.rules.split(",")]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_FIELDS)
    inputs = list(args.input or [])
    for p, (label, ds, k_useful, pseed) in enumerate(_bench_problems(args)):
        train, test = train_test_split(ds, args.test_fraction, derive_seed(pseed, "split"))
        cfg = _k_neighbors(args.k_neighbors, train.n_samples)
        scorer = KnnScorer(train, cfg, standardize_features=not args.no_standardize)
        for rule in rules:
            trace = select(scorer, rule, args.direction, seed=pseed)
            kept = trace.selected
            recall = None if k_useful is None else len(set(kept) & set(range(k_useful))) / k_useful
            w.writerow([_fmt(v) for v in (
                p, label, k_useful, str(rule), ds.n_features, len(kept),
                len(kept) / ds.n_features, knn_accuracy(train, test, kept, 5), recall,
                trace.guarantee,
            )])
    out = Path(args.out)
    out.write_text(buf.getvalue(), encoding="utf-8")
    print(f"wrote {out}")
    return {"outputs": [str(out)], "inputs": inputs, "seeds": {"seed": args.seed}}


def _parse_subset(text: str, ds: Dataset) -> list[int]:
    out = []
    for tok in filter(None, (t.strip() for t in text.split(","))):
        if tok in ds.feature_names:
            out.append(ds.feature_names.index(tok))
        elif tok.lstrip("-").isdigit():
            out.append(int(tok))
        else:
            raise UsageError(f"unknown feature {tok!r}")
    return out


def cmd_bound(args) -> dict:
    ds = load_csv(args.input, args.target, _task(args))
    removed = _parse_subset(args.remove, ds)
    report = linear_subset_bound(ds, removed)
    doc = report.to_dict()
    doc["removed_names"] = [ds.feature_names[i] for i in report.removed]
    if removed and not args.no_cmi:
        cfg = _k_neighbors(args.k_neighbors, ds.n_samples)
        scorer = KnnScorer(ds, cfg)
        kept = tuple(report.kept)
        raw = scorer.raw_mi(tuple(range(ds.n_features))) - scorer.raw_mi(kept)
        doc["cmi_score"] = max(raw, 0.0)
        doc["cmi_config"] = scorer.describe()
    out = Path(args.out) if args.out else Path(args.input).with_suffix(".bound.json")
    _write_json(out, doc)
    print(f"general bound (root-MSE) {report.general_bound:.6g}; "
          f"reduced linear root-MSE {report.reduced_rmse:.6g}; full {report.sigma_full:.6g}")
    return {"outputs": [str(out)], "inputs": [args.input], "seeds": {}}


# -- parser -----------------------------------------------------------------------


def _add_task_args(p):
    p.add_argument("--input", required=True)
    p.add_argument("--target", default="y")
    p.add_argument("--task", choices=[CLASSIFICATION, REGRESSION], default=CLASSIFICATION)
    p.add_argument("--bound", default="auto", help="target bound B for regression, or 'auto'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmifs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset as CSV")
    g.add_argument("--kind", choices=sorted(KINDS), required=True)
    g.add_argument("--n", type=int, default=500)
    g.add_argument("--d", type=int, default=15)
    g.add_argument("--k", type=int, default=5, help="useful features (cond-gauss)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--a", type=float, default=1.0)
    g.add_argument("--b", type=float, default=1.0)
    g.add_argument("--sigma-z", type=float, default=1.0)
    g.add_argument("--weights", default=None, help="comma-separated weights (linear-gauss)")
    g.add_argument("--noise-std", type=float, default=0.1)
    g.add_argument("--sampler", choices=["conditional", "rejection"], default="conditional")
    g.add_argument("--out", required=True)
    g.add_argument("--manifest", default=None)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("select", help="run greedy feature selection on a CSV file")
    _add_task_args(s)
    s.add_argument("--direction", choices=["backward", "forward"], default="backward")
    s.add_argument("--stop", required=True, help="error:D | fscore:D | dfscore:D | nfeat:K")
    s.add_argument("--k-neighbors", default="auto")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-standardize", action="store_true")
    s.add_argument("--out", default=None)
    s.add_argument("--manifest", default=None)
    s.set_defaults(func=cmd_select)

    v = sub.add_parser("verify", help="check the bounds on random exact joints")
    v.add_argument("--joints", type=int, default=200)
    v.add_argument("--d", type=int, default=3)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--from-file", default=None, help="joint distribution JSON to check instead")
    v.add_argument("--out", default=None)
    v.add_argument("--manifest", default=None)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="compare stopping rules on synthetic or given problems")
    b.add_argument("--input", action="append", default=None)
    b.add_argument("--target", default="y")
    b.add_argument("--k-list", default=None, help="comma-separated useful-feature counts")
    b.add_argument("--k-uniform", type=int, nargs=2, default=[3, 15], metavar=("LO", "HI"))
    b.add_argument("--problems", type=int, default=6)
    b.add_argument("--d", type=int, default=30)
    b.add_argument("--n", type=int, default=500)
    b.add_argument("--rules", required=True, help="comma-separated stopping rules")
    b.add_argument("--direction", choices=["backward", "forward"], default="backward")
    b.add_argument("--test-fraction", type=float, default=0.3)
    b.add_argument("--k-neighbors", default="auto")
    b.add_argument("--sampler", choices=["conditional", "rejection"], default="conditional")
    b.add_argument("--no-standardize", action="store_true")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.add_argument("--manifest", default=None)
    b.set_defaults(func=cmd_bench)

    bd = sub.add_parser("bound", help="linear-model bound for removing a feature subset")
    _add_task_args(bd)
    bd.set_defaults(task=REGRESSION)
    bd.add_argument("--remove", default="", help="comma-separated feature names or indices")
    bd.add_argument("--k-neighbors", default="auto")
    bd.add_argument("--no-cmi", action="store_true", help="skip the kNN estimate of the removal score")
    bd.add_argument("--out", default=None)
    bd.add_argument("--manifest", default=None)
    bd.set_defaults(func=cmd_bound)
    return parser


def _manifest_path(args, info: dict) -> Path | None:
    if args.manifest:
        return Path(args.manifest)
    if info.get("outputs"):
        first = Path(info["outputs"][0])
        return first.with_name(first.name + ".manifest.json")
    return None


def _emit_manifest(args, info: dict, started: float, status: int) -> None:
    params = {k: v for k, v in vars(args).items() if k not in ("func", "manifest")}
    doc = {
        "schema_version": MANIFEST_SCHEMA,
        "command": args.command,
        "parameters": params,
        "resolved": info.get("resolved", {}),
        "seeds": info.get("seeds", {}),
        "inputs": {p: _sha256(p) for p in info.get("inputs", []) if Path(p).is_file()},
        "outputs": info.get("outputs", []),
        "tool_version": __version__,
        "exit_code": status,
        "duration_s": round(time.perf_counter() - started, 6),
    }
    path = _manifest_path(args, info)
    if path is None:
        print(json.dumps(doc), file=sys.stderr)
    else:
        _write_json(path, doc)


def argv_from_manifest(doc: dict, **overrides) -> list[str]:
    """Command line that repeats the run a manifest describes.

    ``overrides`` replace recorded parameters (output paths, typically).
    """
    params = {**doc["parameters"], **overrides}
    argv = [doc["command"]]
    for key, value in params.items():
        if key == "command" or value is None or value is False:
            continue
        flag = "--" + key.replace("_", "-")
        if value is True:
            argv.append(flag)
        elif isinstance(value, list) and key == "input":
            for v in value:
                argv += [flag, str(v)]
        elif isinstance(value, list):
            argv += [flag, *map(str, value)]
        else:
            argv += [flag, str(value)]
    return argv


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    info: dict = {}
    try:
        info = args.func(args) or {}
        status = EXIT_OK
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cmifs {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PropertyViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_PROPERTY
    except GenerationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_GENERATION
    except (DataError, CmifsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_DATA
    _emit_manifest(args, info, started, status)
    return status


if __name__ == "__main__":
    sys.exit(main())
