"""Command-line front end: synthesize data, fit/serialize models, predict,
evaluate, and run benchmark matrices emitting plot-ready tables.

Subcommands: ``synth | fit | predict | eval | bench``.  Every randomized
command is driven by an explicit ``--seed``; given the same seed and inputs,
outputs are byte-identical.  Exit codes: 0 success, 1 metric/model error,
2 I/O or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .datasets import (
    FAMILIES,
    SyntheticSpec,
    apply_preprocess,
    fit_preprocess,
    load_csv,
    sample_synthetic,
    true_density,
    PreprocessState,
)
from .evaluation import EPSILON, EvalReport, MetricError, anll, anll_values, kfold_anll, mae
from .forest import Forest, ForestConfig, eval_forest, fit_forest
from .kde import eval_kde, fit_kde

MODEL_FORMAT = "densforest-model"

# CLI mode flags map onto the splitting criteria.
_MODE_BY_FLAG = {
    "pure": "purely_random",
    "axis": "adaptive_axis",
    "oblique": "adaptive_oblique",
}


class ModelError(ValueError):
    """A model file is missing required structure or cannot be applied."""


def sidecar_path(out_path: str) -> str:
    return out_path + ".meta.json"


def _require_file(path: str) -> None:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def _load_sidecar(path: str) -> SyntheticSpec:
    _require_file(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") != "synthetic-truth":
        raise ModelError(f"{path} is not a synthetic truth sidecar")
    return SyntheticSpec.from_dict(doc["spec"])


def _config_from_args(args, seed=None) -> ForestConfig:
    return ForestConfig(
        m=args.trees, k=args.candidates, p=args.splits, t=args.probes,
        mode=_MODE_BY_FLAG[args.mode], cv_folds=args.folds,
        mc_points=args.mc_points, seed=args.seed if seed is None else seed,
        margin=args.margin,
    )


def _emit_report(report: EvalReport, out_path: str | None) -> None:
    line = report.to_json_line()
    if out_path:
        with open(out_path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
    print(line)


# ----------------------------------------------------------------------
# synth
# ----------------------------------------------------------------------

def cmd_synth(args) -> int:
    spec = SyntheticSpec(args.family, args.d)
    data = sample_synthetic(spec, args.n, np.random.default_rng(args.seed))
    with open(args.out, "w", encoding="utf-8") as fh:
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    _write_json(sidecar_path(args.out), {
        "kind": "synthetic-truth",
        "spec": spec.to_dict(),
        "n": args.n,
        "seed": args.seed,
    })
    return 0


# ----------------------------------------------------------------------
# fit / predict
# ----------------------------------------------------------------------

def _model_doc(forest: Forest, preprocess: PreprocessState | None) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": 1,
        "preprocess": None if preprocess is None else preprocess.to_dict(),
        "forest": forest.to_dict(),
    }


def load_model(path: str) -> tuple[Forest, PreprocessState | None]:
    _require_file(path)
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ModelError(f"{path}: not valid JSON ({e})") from None
    if doc.get("format") != MODEL_FORMAT:
        raise ModelError(f"{path}: not a {MODEL_FORMAT} file")
    try:
        forest = Forest.from_dict(doc["forest"])
    except (KeyError, ValueError, TypeError) as e:
        raise ModelError(f"{path}: corrupt model ({e})") from None
    pp = doc.get("preprocess")
    return forest, None if pp is None else PreprocessState.from_dict(pp)


def cmd_fit(args) -> int:
    _require_file(args.data)
    table = load_csv(args.data, header=args.header)
    data = table.data
    state = None
    if args.preprocess:
        state = fit_preprocess(data, np.arange(data.shape[0]),
                               discrete_threshold=args.discrete_threshold,
                               corr_threshold=args.corr_threshold)
        data = apply_preprocess(state, data)
    config = _config_from_args(args)
    forest = fit_forest(data, config, workers=args.workers)
    _write_json(args.out, _model_doc(forest, state))
    return 0


def cmd_predict(args) -> int:
    forest, state = load_model(args.model)
    _require_file(args.data)
    data = load_csv(args.data, header=args.header).data
    if state is not None:
        data = apply_preprocess(state, data)
    dens = eval_forest(forest, data)
    lines = "\n".join(repr(float(v)) for v in np.atleast_1d(dens)) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(lines)
    else:
        sys.stdout.write(lines)
    return 0


# ----------------------------------------------------------------------
# eval
# ----------------------------------------------------------------------

def _build_estimator(args):
    """Resolve --estimator into (callable, config-description)."""
    if args.estimator == "zero":
        return (lambda x: np.zeros(np.atleast_2d(x).shape[0])), {"estimator": "zero"}
    if args.estimator == "truth":
        if not args.truth:
            raise MetricError("truth density unavailable")
        spec = _load_sidecar(args.truth)
        return (lambda x: true_density(spec, x)), {"estimator": "truth",
                                                   "spec": spec.to_dict()}
    if not args.model:
        raise ModelError("--model is required with --estimator model")
    forest, state = load_model(args.model)
    desc = {"estimator": "model", "model": args.model,
            "forest_config": forest.config.to_dict()}

    def estimate(x):
        pts = np.atleast_2d(x)
        if state is not None:
            pts = apply_preprocess(state, pts)
        return eval_forest(forest, pts)

    return estimate, desc


def cmd_eval(args) -> int:
    _require_file(args.data)
    data = load_csv(args.data, header=args.header).data
    estimator, desc = _build_estimator(args)
    config = dict(desc, metric=args.metric, data=args.data)

    if args.metric == "mae":
        if not args.truth:
            raise MetricError("truth density unavailable")
        spec = _load_sidecar(args.truth)
        config["truth"] = spec.to_dict()
        value = mae(estimator, lambda x: true_density(spec, x), data)
        report = EvalReport(metric="mae", value=value, n_test=data.shape[0],
                            config=config)
    else:
        value = anll(estimator, data)
        report = EvalReport(metric="anll", value=value, n_test=data.shape[0],
                            config=config, epsilon_used=EPSILON)
    _emit_report(report, args.out)
    return 0


# ----------------------------------------------------------------------
# bench
# ----------------------------------------------------------------------

def _parse_datasets(tokens: list[str]):
    """Dataset tokens: ``family:d`` for synthetic or ``csv:path``."""
    out = []
    for tok in tokens:
        kind, _, rest = tok.partition(":")
        if kind == "csv":
            if not rest:
                raise ValueError(f"bad dataset token {tok!r}")
            out.append(("csv", rest, os.path.basename(rest)))
        elif kind in FAMILIES:
            try:
                d = int(rest)
            except ValueError:
                raise ValueError(f"bad dataset token {tok!r}") from None
            out.append(("synthetic", SyntheticSpec(kind, d), f"{kind}:{d}"))
        else:
            raise ValueError(f"bad dataset token {tok!r}")
    return out


def _grid_points(d: int, target: int) -> np.ndarray:
    """Lattice over [0, 1]^d with roughly ``target`` points (cell centers)."""
    per_dim = max(2, round(target ** (1.0 / d)))
    axis = (np.arange(per_dim) + 0.5) / per_dim
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _cell_seed(base: int, cell_index: int, repeat: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([base, cell_index, repeat])


def _kde_kfold_anll(data: np.ndarray, folds: int, seed: int) -> float:
    from .evaluation import kfold_assignment
    fold_of = kfold_assignment(data.shape[0], folds, seed)
    scores = []
    for f in range(folds):
        val = fold_of == f
        model = fit_kde(data[~val])
        scores.append(anll(lambda x: eval_kde(model, x), data[val]))
    return float(np.mean(scores))


def _run_bench_cell(args, kind, payload, method, cell_index, repeat):
    """One (dataset, method, repeat) cell: returns a JSONL-ready dict."""
    ss = _cell_seed(args.seed, cell_index, repeat)
    train_ss, test_ss, model_ss = ss.spawn(3)
    model_seed = int(model_ss.generate_state(1, np.uint64)[0])

    if kind == "synthetic":
        spec = payload
        train = sample_synthetic(spec, args.n, np.random.default_rng(train_ss))
        if args.metric == "mae" and args.mae_sampling == "grid":
            test = _grid_points(spec.d, args.test_points)
        else:
            test = sample_synthetic(spec, args.test_points, np.random.default_rng(test_ss))
        if method == "kde":
            t0 = time.perf_counter()
            model = fit_kde(train)
            train_time = time.perf_counter() - t0
            estimator = lambda x: eval_kde(model, x)
            config = {"method": "kde", "factor": model.factor}
        else:
            config_obj = _config_from_args(args, seed=model_seed)
            t0 = time.perf_counter()
            forest = fit_forest(train, config_obj, workers=args.workers)
            train_time = time.perf_counter() - t0
            estimator = lambda x: eval_forest(forest, x)
            config = dict(config_obj.to_dict(), method=f"forest-{args.mode}")
        if args.metric == "mae":
            value = mae(estimator, lambda x: true_density(spec, x), test)
            eps = None
        else:
            value = anll(estimator, test)
            eps = EPSILON
        n_test = test.shape[0]
        n_train = args.n
        d = spec.d
    else:
        data = load_csv(payload, header=args.header).data
        if args.preprocess:
            # Per-fold preprocessing happens inside the k-fold protocol; here
            # the options are only packaged up.
            pp = {"discrete_threshold": args.discrete_threshold,
                  "corr_threshold": args.corr_threshold}
        else:
            pp = None
        if args.metric == "mae":
            raise MetricError("truth density unavailable")
        t0 = time.perf_counter()
        if method == "kde":
            if pp is not None:
                raise ValueError("preprocessed KDE folds are not supported in bench; "
                                 "preprocess the CSV beforehand")
            value = _kde_kfold_anll(data, args.folds, model_seed)
            config = {"method": "kde"}
        else:
            config_obj = _config_from_args(args, seed=model_seed)
            result = kfold_anll(data, config_obj, folds=args.folds,
                                workers=args.workers, preprocess_opts=pp)
            value = result.mean
            config = dict(config_obj.to_dict(), method=f"forest-{args.mode}")
        train_time = time.perf_counter() - t0
        eps = EPSILON
        n_test = data.shape[0]
        n_train = data.shape[0]
        d = data.shape[1]

    report = EvalReport(metric=args.metric, value=value, n_test=n_test,
                        config=config, epsilon_used=eps)
    doc = report.to_dict()
    doc.update({
        "dataset": payload.to_dict() if kind == "synthetic" else payload,
        "dataset_label": None,  # filled by the caller
        "method": config["method"],
        "d": d, "n": n_train, "repeat": repeat, "seed": model_seed,
        "train_time_s": train_time,
    })
    return doc


def cmd_bench(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in ("forest", "kde"):
            raise ValueError(f"unknown method {m!r}; use forest or kde")
    datasets = _parse_datasets([t.strip() for t in args.datasets.split(",") if t.strip()])
    for kind, payload, _ in datasets:
        if kind == "csv":
            _require_file(payload)

    cells = sorted(
        ((label, method, kind, payload)
         for kind, payload, label in datasets for method in methods),
        key=lambda c: (c[0], c[1]),
    )
    rows = []
    out_fh = open(args.out, "a", encoding="utf-8") if args.out else None
    try:
        for cell_index, (label, method, kind, payload) in enumerate(cells):
            for repeat in range(args.repeats):
                try:
                    doc = _run_bench_cell(args, kind, payload, method, cell_index, repeat)
                    doc["dataset_label"] = label
                except (MetricError, ValueError, OSError) as e:
                    doc = {"dataset_label": label, "method": method,
                           "repeat": repeat, "error": str(e)}
                rows.append(doc)
                line = json.dumps(doc, sort_keys=True)
                if out_fh:
                    out_fh.write(line + "\n")
    finally:
        if out_fh:
            out_fh.close()

    _print_summary(rows)
    return 0


def summarize_bench(rows: list[dict]) -> list[dict]:
    """Aggregate bench rows into one record per (dataset, method): repeat
    means/stds of the metric and the mean training time."""
    groups: dict[tuple, list[dict]] = {}
    for doc in rows:
        key = (doc.get("dataset_label"), doc.get("method"))
        groups.setdefault(key, []).append(doc)

    out = []
    for (label, method), docs in sorted(groups.items()):
        good = [d for d in docs if "error" not in d]
        rec = {"dataset": label, "method": method,
               "repeats": len(docs), "errors": len(docs) - len(good)}
        if good:
            vals = np.array([d["value"] for d in good])
            rec.update({
                "d": good[0]["d"], "n": good[0]["n"], "metric": good[0]["metric"],
                "mean": float(vals.mean()), "std": float(vals.std()),
                "time_mean_s": float(np.mean([d["train_time_s"] for d in good])),
            })
        out.append(rec)
    return out


def _print_summary(rows: list[dict]) -> None:
    header = f"{'method':<16} {'dataset':<16} {'d':>3} {'n':>7} {'metric':<6} " \
             f"{'mean':>12} {'std':>12} {'time_mean_s':>12} {'errors':>6}"
    print(header)
    print("-" * len(header))
    for rec in summarize_bench(rows):
        if "mean" in rec:
            print(f"{rec['method']:<16} {rec['dataset']:<16} {rec['d']:>3} {rec['n']:>7} "
                  f"{rec['metric']:<6} {rec['mean']:>12.6f} {rec['std']:>12.6f} "
                  f"{rec['time_mean_s']:>12.4f} {rec['errors']:>6}")
        else:
            print(f"{rec['method']:<16} {rec['dataset']:<16} {'-':>3} {'-':>7} {'-':<6} "
                  f"{'-':>12} {'-':>12} {'-':>12} {rec['errors']:>6}")


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------

def _add_forest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=sorted(_MODE_BY_FLAG), default="axis",
                   help="splitting criterion (default: axis)")
    p.add_argument("--trees", type=int, default=10, metavar="M",
                   help="trees per forest (default: 10; larger is smoother)")
    p.add_argument("--candidates", type=int, default=5, metavar="K",
                   help="candidate partitions per tree (default: 5)")
    p.add_argument("--splits", type=int, default=64, metavar="P",
                   help="splits per partition (default: 64)")
    p.add_argument("--probes", type=int, default=30, metavar="T",
                   help="probe samples per adaptive split (default: 30)")
    p.add_argument("--folds", type=int, default=10,
                   help="cross-validation folds (default: 10)")
    p.add_argument("--mc-points", type=int, default=2000,
                   help="Monte Carlo volume points for oblique cells (default: 2000)")
    p.add_argument("--margin", type=float, default=0.0,
                   help="bounding-box padding as a fraction of each range (default: 0)")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel workers for tree building (default: 1)")


def _add_preprocess_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preprocess", action="store_true",
                   help="drop discrete/correlated columns and z-score")
    p.add_argument("--discrete-threshold", type=int, default=10,
                   help="max distinct values for a column to count as discrete")
    p.add_argument("--corr-threshold", type=float, default=0.98,
                   help="absolute Pearson correlation above which a pair loses a column")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="densforest",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with known truth")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="CSV output path; a truth sidecar "
                   "is written next to it")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit a forest and write a model file")
    p.add_argument("data", help="training CSV")
    p.add_argument("--header", action="store_true", help="CSV has a header row")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model JSON output path")
    _add_forest_flags(p)
    _add_preprocess_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="evaluate a fitted model on rows of a CSV")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--header", action="store_true")
    p.add_argument("--out", help="write densities here instead of stdout")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score an estimator with MAE or ANLL")
    p.add_argument("--data", required=True, help="test points CSV")
    p.add_argument("--header", action="store_true")
    p.add_argument("--metric", choices=("mae", "anll"), required=True)
    p.add_argument("--model", help="model JSON (with --estimator model)")
    p.add_argument("--truth", help="synthetic truth sidecar (required for MAE)")
    p.add_argument("--estimator", choices=("model", "truth", "zero"), default="model",
                   help="what to score: the model, the sidecar truth, or a zero stub")
    p.add_argument("--out", help="append the report to this JSON-lines file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="run a methods x datasets x seeds matrix")
    p.add_argument("--methods", default="forest,kde",
                   help="comma list of methods: forest, kde")
    p.add_argument("--datasets", required=True,
                   help="comma list: family:d for synthetic (e.g. type1:2) or csv:PATH")
    p.add_argument("--n", type=int, default=2000, help="training rows per synthetic repeat")
    p.add_argument("--test-points", type=int, default=10000)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--metric", choices=("mae", "anll"), default="mae")
    p.add_argument("--mae-sampling", choices=("draws", "grid"), default="draws",
                   help="MAE test points: fresh draws from the truth, or a lattice")
    p.add_argument("--seed", type=int, required=True,
                   help="base seed; every cell derives its own sub-seed")
    p.add_argument("--header", action="store_true", help="CSV datasets have a header")
    p.add_argument("--out", help="append one JSON line per cell repeat here")
    _add_forest_flags(p)
    _add_preprocess_flags(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args) or 0
    except (MetricError, ModelError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
