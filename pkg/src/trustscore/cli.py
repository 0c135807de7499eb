"""Command-line front end: gen, train, score, stratify, verify-theory, report.

Each subcommand is one pipeline stage that reads files, writes files into
--out, and drops a resolved-config JSON next to its outputs so every run is
reproducible from disk alone. Summaries go to stdout as single JSON objects;
failures exit nonzero with an error JSON on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import baselines, data, geometry, metrics, plots, scoring, training
from .nn import MlpConfig, forward, init_mlp, load_checkpoint, save_checkpoint
from .scoring import TrustConfig, TrustResult

METHODS = ("trust", "mc_dropout", "msp")
DEFAULT_SEED = 42
STRATIFY_FRACTIONS = [k / 10 for k in range(1, 11)]


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# gen


def cmd_gen(args) -> int:
    out = _out_dir(args)
    raw = _load_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    raw.setdefault("seed", DEFAULT_SEED)
    spec = data.SyntheticSpec(**raw)
    train_set, test_set = data.gen_microclusters(spec)
    ood_n = args.ood_n if args.ood_n is not None else len(test_set)
    ood_set = data.gen_ood(ood_n, spec.d, spec.radius, spec.seed, spec.k)

    files = {}
    for name, ds in (("train", train_set), ("test", test_set), ("ood", ood_set)):
        path = out / f"{name}.ds"
        data.save_dataset(ds, str(path))
        files[name] = str(path)

    resolved = {"command": "gen", "spec": vars(spec).copy(), "ood_n": ood_n, "files": files}
    resolved["spec"]["seed"] = spec.seed
    _write_json(out / "gen_config.json", resolved)
    _print_json(
        {
            "train_n": len(train_set),
            "test_n": len(test_set),
            "ood_n": len(ood_set),
            "d": spec.d,
            "k": spec.k,
            "files": files,
        }
    )
    return 0


# ---------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    out = _out_dir(args)
    dataset = data.load_any(args.data)
    raw = _load_config(args.config)
    seed = args.seed if args.seed is not None else raw.get("seed", DEFAULT_SEED)

    model_raw = dict(raw.get("model", {}))
    model_raw.setdefault("layer_dims", [dataset.dim, 128, 64, dataset.num_classes])
    model_raw.setdefault("dropout_rate", 0.2)
    model_raw.setdefault("seed", seed)
    model_cfg = MlpConfig(
        layer_dims=tuple(model_raw["layer_dims"]),
        dropout_rate=float(model_raw["dropout_rate"]),
        seed=int(model_raw["seed"]),
    )

    train_raw = dict(raw.get("train", {}))
    train_raw.setdefault("seed", seed)
    train_cfg = training.TrainConfig(**train_raw)

    model = init_mlp(model_cfg)
    model, history = training.train(model, dataset, train_cfg)

    ckpt = out / "checkpoint.mlp"
    save_checkpoint(model, str(ckpt))
    history.write_csv(str(out / "history.csv"))
    plots.history_figure(history.losses, history.accuracies, str(out / "history.png"))

    resolved = {
        "command": "train",
        "data": str(args.data),
        "seed": seed,
        "model": {
            "layer_dims": list(model_cfg.layer_dims),
            "dropout_rate": model_cfg.dropout_rate,
            "seed": model_cfg.seed,
        },
        "train": vars(train_cfg).copy(),
        "files": {"checkpoint": str(ckpt), "history": str(out / "history.csv")},
    }
    _write_json(out / "train_config.json", resolved)
    _print_json(
        {
            "checkpoint": str(ckpt),
            "epochs": train_cfg.epochs,
            "final_train_loss": history.losses[-1],
            "final_train_accuracy": history.accuracies[-1],
        }
    )
    return 0


# ---------------------------------------------------------------------------
# score


def _trust_results_for(model, dataset, cfg: TrustConfig, workers: int) -> list[TrustResult]:
    return scoring.batch_trust_scores(model, list(dataset.features), cfg, workers=workers)


def _score_one_method(model, dataset, method: str, cfg_raw: dict, workers: int, seed: int):
    """Returns (results, resolved_config) where results mimic TrustResult rows."""
    if method == "trust":
        cfg = TrustConfig.from_dict(cfg_raw) if cfg_raw else TrustConfig()
        results = _trust_results_for(model, dataset, cfg, workers)
        return results, cfg.to_dict()
    if method == "mc_dropout":
        cfg = baselines.DropoutConfig(passes=int(cfg_raw.get("passes", 50)), seed=seed)
        results = []
        for i in range(len(dataset)):
            # per-sample substream keeps batches deterministic in any order
            rng = np.random.default_rng([seed, i])
            score, mean_probs = baselines.mc_dropout_score(
                model, dataset.features[i], cfg, rng=rng
            )
            results.append(
                TrustResult(
                    predicted_label=int(np.argmax(mean_probs)),
                    delta_x=np.zeros(0),
                    score=score,
                    iterations_run=cfg.passes,
                    final_loss=0.0,
                    initial_loss=0.0,
                )
            )
        return results, {"passes": cfg.passes, "seed": seed}
    if method == "msp":
        results = []
        for i in range(len(dataset)):
            x = dataset.features[i]
            logits, _ = forward(model, x)
            results.append(
                TrustResult(
                    predicted_label=int(np.argmax(logits)),
                    delta_x=np.zeros(0),
                    score=baselines.msp_score(model, x),
                    iterations_run=1,
                    final_loss=0.0,
                    initial_loss=0.0,
                )
            )
        return results, {}
    raise ValueError(f"unknown method {method!r}")


def _parse_sweep(text: str) -> tuple[str, list]:
    key, _, values = text.partition("=")
    if not key or not values:
        raise ValueError("--sweep expects key=v1,v2,...")
    return key, [json.loads(v) for v in values.split(",")]


def cmd_score(args) -> int:
    out = _out_dir(args)
    model = load_checkpoint(args.model)
    dataset = data.load_any(args.data)
    cfg_raw = _load_config(args.config)
    seed = args.seed if args.seed is not None else DEFAULT_SEED

    runs: list[tuple[str, dict]] = []
    if args.sweep:
        key, values = _parse_sweep(args.sweep)
        for value in values:
            override = dict(cfg_raw)
            override[key] = value
            runs.append((f"scores_{key}-{value:g}.csv" if isinstance(value, float)
                         else f"scores_{key}-{value}.csv", override))
    else:
        runs.append(("scores.csv", cfg_raw))

    summaries = []
    resolved_runs = []
    for filename, raw in runs:
        results, resolved_cfg = _score_one_method(
            model, dataset, args.method, raw, args.workers, seed
        )
        path = out / filename
        scoring.write_scores_csv(
            str(path),
            results,
            dataset.labels,
            method=None if args.method == "trust" else args.method,
        )
        accuracy = sum(
            r.predicted_label == int(t) for r, t in zip(results, dataset.labels)
        ) / len(results)
        summaries.append(
            {
                "file": str(path),
                "n": len(results),
                "mean_score": sum(r.score for r in results) / len(results),
                "accuracy": accuracy,
            }
        )
        resolved_runs.append({"file": str(path), "config": resolved_cfg})

    resolved = {
        "command": "score",
        "method": args.method,
        "model": str(args.model),
        "data": str(args.data),
        "seed": seed,
        "workers": args.workers,
        "sweep": args.sweep,
        "runs": resolved_runs,
    }
    _write_json(out / "score_config.json", resolved)
    _print_json({"method": args.method, "runs": summaries})
    return 0


# ---------------------------------------------------------------------------
# stratify


def cmd_stratify(args) -> int:
    out = _out_dir(args)
    preds, _ = metrics.read_scores_csv(args.scores)

    rows = [(f, metrics.accuracy_at_top(preds, f)) for f in STRATIFY_FRACTIONS]
    with open(out / "stratify.csv", "w", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["top_fraction", "accuracy"])
        for f, acc in rows:
            writer.writerow([repr(f), repr(acc)])

    curve = metrics.risk_coverage_curve(preds)
    curve.write_csv(str(out / "risk_coverage.csv"))
    spars = metrics.sparsification_curve(preds, args.steps)
    metrics.write_sparsification_csv(str(out / "sparsification.csv"), spars)

    summary = {
        "n": len(preds),
        "accuracy": metrics.accuracy_at_top(preds, 1.0),
        "aurc": metrics.aurc(preds),
        "ause": metrics.ause(preds, args.steps),
    }
    _write_json(out / "summary.json", summary)

    plots.stratification_figure(
        [f for f, _ in rows], [a for _, a in rows], str(out / "stratify.png")
    )
    plots.risk_coverage_figure(
        [c for c, _ in curve.points], [r for _, r in curve.points],
        str(out / "risk_coverage.png"),
    )
    plots.sparsification_figure(
        [f for f, _, _ in spars],
        [m for _, m, _ in spars],
        [o for _, _, o in spars],
        str(out / "sparsification.png"),
    )

    resolved = {
        "command": "stratify",
        "scores": str(args.scores),
        "steps": args.steps,
        "files": {
            "stratify": str(out / "stratify.csv"),
            "risk_coverage": str(out / "risk_coverage.csv"),
            "sparsification": str(out / "sparsification.csv"),
            "summary": str(out / "summary.json"),
        },
    }
    _write_json(out / "stratify_config.json", resolved)
    _print_json(summary)
    return 0


# ---------------------------------------------------------------------------
# verify-theory


def _theory_checks(seed: int) -> list[dict]:
    checks: list[dict] = []

    rng = np.random.default_rng([seed, 0])
    report = geometry.norm_concentration(d=10_000, sigma=1.0, samples=10_000, eps=0.02, rng=rng)
    checks.append(
        {
            "name": "norm_concentration",
            "criterion": "empirical >= 0.99 and empirical >= chebyshev bound",
            "passed": report.empirical_value >= 0.99
            and report.empirical_value >= report.theoretical_value,
            **report.to_dict(),
        }
    )

    mean_by_d = {}
    for idx, dim in enumerate((128, 512)):
        rng = np.random.default_rng([seed, 1 + idx])
        mins = [
            geometry.min_pairwise_cos(geometry.sample_sphere(1000, dim, rng))
            for _ in range(50)
        ]
        mean = float(np.mean(mins))
        mean_by_d[dim] = mean
        report = geometry.McReport.compare(50, mean, geometry.expected_min_cos(1000, dim))
        checks.append(
            {
                "name": f"min_pairwise_cos_d{dim}",
                "criterion": "mean < 0 and relative error <= 0.25",
                "passed": mean < 0.0 and report.rel_error <= 0.25,
                **report.to_dict(),
            }
        )
    ratio = abs(mean_by_d[512]) / abs(mean_by_d[128])
    checks.append(
        {
            "name": "min_pairwise_cos_scaling",
            "criterion": "magnitude shrinks as dimension grows (theory ratio 0.5)",
            "passed": ratio < 1.0,
            **geometry.McReport.compare(100, ratio, 0.5).to_dict(),
        }
    )

    rng = np.random.default_rng([seed, 3])
    report = geometry.mc_sorting_error(1.0, 1.0, 100_000, rng)
    checks.append(
        {
            "name": "sorting_error",
            "criterion": "absolute error <= 0.005",
            "passed": report.abs_error <= 0.005,
            **report.to_dict(),
        }
    )

    rng = np.random.default_rng([seed, 4])
    report = geometry.cos_noise_bound_check(math.pi / 2, 0.05, 100_000, rng)
    checks.append(
        {
            "name": "cos_noise_variance",
            "criterion": "relative error <= 0.05",
            "passed": report.rel_error <= 0.05,
            **report.to_dict(),
        }
    )

    trials = 100_000
    for idx, degrees in enumerate((15, 30, 45, 60, 75, 90)):
        rng = np.random.default_rng([seed, 5 + idx])
        p_cos, p_direct = geometry.sorting_error_cos_vs_direct(
            math.radians(degrees), 0.05, 0.05, trials, rng
        )
        margin = 2.0 * math.sqrt(max(p_direct * (1.0 - p_direct), 1e-12) / trials)
        report = geometry.McReport.compare(trials, p_cos, p_direct)
        checks.append(
            {
                "name": f"sorting_cos_vs_direct_{degrees}deg",
                "criterion": "p_cos <= p_direct + 2 binomial sd",
                "passed": p_cos <= p_direct + margin,
                **report.to_dict(),
            }
        )
    return checks


def cmd_verify_theory(args) -> int:
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    checks = _theory_checks(seed)
    all_passed = all(c["passed"] for c in checks)
    payload = {"seed": seed, "all_passed": all_passed, "checks": checks}
    _write_json(out / "theory.json", payload)
    _write_json(
        out / "verify_theory_config.json",
        {"command": "verify-theory", "seed": seed, "files": {"theory": str(out / "theory.json")}},
    )
    _print_json(payload)
    return 0 if all_passed else 1


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    out = _out_dir(args)
    model = load_checkpoint(args.model)
    clean = data.load_any(args.data)
    ref_preds, ref_rows = metrics.read_scores_csv(args.ref_scores)
    ref_scores = [row["trust_score"] for row in ref_rows]
    cfg = TrustConfig.from_dict(_load_config(args.config)) if args.config else TrustConfig()
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    levels = [float(v) for v in args.levels.split(",")]

    baseline_accuracy = training.evaluate(model, clean)
    hist_range = (-1.0, 1.0)
    named_hists = {"ref": metrics.histogram(ref_scores, args.bins, hist_range)}
    table = []

    for i, level in enumerate(levels):
        spec = data.CorruptionSpec(kind=args.kind, level=level, seed=seed + i)
        corrupted = data.corrupt(clean, spec)
        results = _trust_results_for(model, corrupted, cfg, args.workers)
        scores = [r.score for r in results]
        accuracy = sum(
            r.predicted_label == int(t) for r, t in zip(results, corrupted.labels)
        ) / len(results)
        label = f"{args.kind}{level:g}"
        named_hists[label] = metrics.histogram(scores, args.bins, hist_range)
        table.append(
            {
                "name": label,
                "kind": args.kind,
                "level": level,
                "n": len(results),
                "accuracy": accuracy,
                "accuracy_drop": baseline_accuracy - accuracy,
                "mmd": metrics.mmd(scores, ref_scores),
            }
        )

    if args.ood:
        ood_set = data.load_any(args.ood)
        results = _trust_results_for(model, ood_set, cfg, args.workers)
        scores = [r.score for r in results]
        accuracy = sum(
            r.predicted_label == int(t) for r, t in zip(results, ood_set.labels)
        ) / len(results)
        named_hists["ood"] = metrics.histogram(scores, args.bins, hist_range)
        table.append(
            {
                "name": "ood",
                "kind": "ood",
                "level": None,
                "n": len(results),
                "accuracy": accuracy,
                "accuracy_drop": baseline_accuracy - accuracy,
                "mmd": metrics.mmd(scores, ref_scores),
            }
        )

    import csv as _csv

    with open(out / "mmd_vs_drop.csv", "w", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", "kind", "level", "n", "accuracy", "accuracy_drop", "mmd"])
        for row in table:
            writer.writerow(
                [
                    row["name"],
                    row["kind"],
                    "" if row["level"] is None else repr(row["level"]),
                    row["n"],
                    repr(row["accuracy"]),
                    repr(row["accuracy_drop"]),
                    repr(row["mmd"]),
                ]
            )
    for name, rows in named_hists.items():
        metrics.write_histogram_csv(str(out / f"hist_{name}.csv"), rows)

    plots.mmd_drop_figure(
        [row["mmd"] for row in table],
        [row["accuracy_drop"] for row in table],
        [row["name"] for row in table],
        str(out / "report_mmd.png"),
    )
    plots.histograms_figure(named_hists, str(out / "report_hist.png"))

    resolved = {
        "command": "report",
        "model": str(args.model),
        "data": str(args.data),
        "ref_scores": str(args.ref_scores),
        "ood": str(args.ood) if args.ood else None,
        "kind": args.kind,
        "levels": levels,
        "seed": seed,
        "bins": args.bins,
        "workers": args.workers,
        "trust_config": cfg.to_dict(),
    }
    _write_json(out / "report_config.json", resolved)
    _print_json({"baseline_accuracy": baseline_accuracy, "rows": table})
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trustscore",
        description="Generate data, train, score, and evaluate trust-based confidence.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate synthetic train/test/OOD datasets")
    p.add_argument("--config", help="JSON file with generator fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--ood-n", type=int, dest="ood_n")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a classifier checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--config", help='JSON file: {"model": {...}, "train": {...}}')
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a dataset with a confidence method")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=METHODS, default="trust")
    p.add_argument("--config", help="JSON config for the chosen method")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--sweep", help="key=v1,v2,... rescore once per value")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("stratify", help="risk metrics and curves from a score CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stratify)

    p = sub.add_parser("verify-theory", help="Monte-Carlo checks of the geometry results")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify_theory)

    p = sub.add_parser("report", help="corruption sweep: accuracy drop vs score MMD")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--ref-scores", required=True, dest="ref_scores")
    p.add_argument("--kind", choices=data.CORRUPTION_KINDS, default="gaussian")
    p.add_argument("--levels", default="0,0.1,0.2,0.4,0.8")
    p.add_argument("--ood")
    p.add_argument("--config", help="trust config JSON")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single reporting funnel
        json.dump({"error": str(exc), "type": type(exc).__name__}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
