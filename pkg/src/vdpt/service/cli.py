"""Command-line entry point: simulate, train, evaluate, search, explain,
drift, and serve.

Every subcommand is deterministic given --seed, writes JSON artifacts, and
exits non-zero with a machine-readable JSON error on stderr when something
goes wrong.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from ..data import (
    ChainedImputer,
    ShiftSpec,
    generate_synthetic_cohort,
    load_csv,
    save_csv,
    standardize_fit,
)
from ..numeric import SeededRng
from ..profiles import (
    DEFAULT_SYNTHETIC_MISSING_RATE,
    DEFAULT_SYNTHETIC_N,
    DEFAULT_SYNTHETIC_PREVALENCE,
    profile_for,
)


def _fail(message: str, code: int = 1):
    json.dump({"error": message}, sys.stderr)
    sys.stderr.write("\n")
    raise SystemExit(code)


def _load_config_overrides(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _build_train_config(args):
    profile = profile_for(args.model, args.profile, seed=args.seed)
    overrides = _load_config_overrides(args.config)
    if overrides:
        from dataclasses import asdict

        doc = asdict(profile)
        doc.update(overrides)
        doc["widths"] = tuple(doc["widths"])
        doc["seed"] = args.seed
        profile = type(profile)(**doc)
    return profile


def cmd_simulate(args):
    rng = SeededRng(args.seed)
    shift = ShiftSpec(
        feature_shifts={k: float(v) for k, v in (s.split("=") for s in args.shift)},
        prevalence=args.shift_prevalence,
    )
    cohort = generate_synthetic_cohort(
        args.n, args.prevalence, shift_spec=shift, missing_rate=args.missing_rate, rng=rng
    )
    save_csv(cohort, args.out)
    print(json.dumps({"written": str(args.out), "rows": cohort.n_rows,
                      "prevalence": float(cohort.y.mean())}))


def _prepare_training(cohort):
    imputer = ChainedImputer()
    imputed = imputer.fit_transform(cohort) if cohort.mask.any() else cohort
    processed = standardize_fit(imputed)
    return processed


def cmd_train(args):
    from ..mlp import MlpModel, train as train_mlp
    from ..uncertainty import fit_variance_cdf
    from ..vdp import VdpModel, train_vdp
    from .artifacts import MLP_FILE, VDP_FILE, save_training_reference

    cohort = load_csv(args.data)
    processed = _prepare_training(cohort)
    config = _build_train_config(args)
    out_dir = Path(args.artifacts_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.model == "mlp":
        params, losses = train_mlp(processed, config)
        model = MlpModel(params, processed.standardization, config,
                         list(cohort.feature_names))
        model.save(out_dir / MLP_FILE)
        artifact = MLP_FILE
    else:
        params, losses = train_vdp(processed, config)
        cdf = fit_variance_cdf(params, processed)
        model = VdpModel(params, processed.standardization, config,
                         list(cohort.feature_names), cdf.values)
        model.save(out_dir / VDP_FILE)
        artifact = VDP_FILE
    save_training_reference(out_dir, cohort, processed)
    with open(out_dir / f"{args.model}_losses.json", "w", encoding="utf-8") as fh:
        json.dump({"format": "vdpt.loss-curve/1", "losses": losses}, fh)
    print(json.dumps({"artifact": str(out_dir / artifact), "epochs": len(losses),
                      "final_loss": losses[-1] if losses else None}))


_TABLE_COLUMNS = (
    ("Precision", "precision"),
    ("Sensitivity", "sensitivity"),
    ("Specificity", "specificity"),
    ("ROC AUC", "roc_auc"),
    ("PRC AUC", "prc_auc"),
    ("Balanced Accuracy", "balanced_accuracy"),
)


def render_metric_table(label: str, mean: dict, stderr: dict) -> str:
    header = [""] + [c for c, _ in _TABLE_COLUMNS]
    row = [label]
    for _, key in _TABLE_COLUMNS:
        m, s = mean[key], stderr[key]
        row.append(f"{m:.2f}+-({s:.2f})" if math.isfinite(m) else "inf")
    widths = [max(len(header[i]), len(row[i])) + 2 for i in range(len(header))]
    line = lambda cells: "|" + "|".join(c.center(w) for c, w in zip(cells, widths)) + "|"
    sep = "|" + "|".join("-" * w for w in widths) + "|"
    return "\n".join([line(header), sep, line(row)])


def cmd_evaluate(args):
    from ..evaluation import cross_validate

    cohort = load_csv(args.data)
    config = _build_train_config(args)
    result = cross_validate(args.model, cohort, config, k=args.k, seed=args.seed)
    print(render_metric_table(f"{args.model} ({args.k}-fold CV)", result.mean, result.stderr))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(result.to_dict(), fh, sort_keys=True)
        print(json.dumps({"written": str(args.out)}))


def cmd_search(args):
    from dataclasses import asdict

    from ..evaluation import SearchSpace, random_search

    cohort = load_csv(args.data)
    overrides = _load_config_overrides(args.config)
    space = SearchSpace(**overrides) if overrides else SearchSpace()
    if args.model == "vdp":
        space.imbalance_choices = tuple(
            s for s in space.imbalance_choices if s != "pos_weight"
        ) or ("undersample",)
    best, board = random_search(args.model, cohort, space, args.budget,
                                seed=args.seed, k=args.k)
    doc = {
        "format": "vdpt.leaderboard/1",
        "model": args.model,
        "entries": [e.to_dict() for e in board],
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
    best_doc = asdict(best)
    best_doc["widths"] = list(best_doc["widths"])
    print(json.dumps({"best_config": best_doc, "leaderboard": str(args.out)}))


def cmd_explain(args):
    from ..influence import fi_local, make_adapter
    from .app import _service_influence_config
    from .artifacts import ModelBundle

    bundle = ModelBundle.load(args.artifacts_dir)
    model = bundle.mlp if args.model == "mlp" else bundle.vdp
    adapter = make_adapter(model)
    ref = bundle.reference.processed
    if not 0 <= args.index < ref.n_rows:
        _fail(f"--index must be in [0, {ref.n_rows})")
    icfg = _service_influence_config(_load_config_overrides(args.config))
    report = fi_local(
        adapter,
        (ref.x[args.index], float(ref.y[args.index])),
        (ref.x, ref.y),
        icfg,
        feature_names=ref.feature_names,
        test_id=str(args.index),
    )
    doc = report.to_dict()
    out = json.dumps(doc, sort_keys=True)
    if args.out:
        Path(args.out).write_text(out, encoding="utf-8")
    print(out)


def cmd_drift(args):
    from ..drift import drift_report
    from ..uncertainty import VarianceCdf

    reference = load_csv(args.reference)
    current = load_csv(args.current)
    vdp_model = cdf = None
    if args.artifacts_dir:
        from ..vdp import VdpModel
        from .artifacts import VDP_FILE

        vdp_model = VdpModel.load(Path(args.artifacts_dir) / VDP_FILE)
        cdf = VarianceCdf(vdp_model.variance_cdf_values)
    report = drift_report(reference, current, vdp_model=vdp_model, variance_cdf=cdf)
    doc = report.to_dict()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True)
    flagged = report.flagged_features
    print(json.dumps({
        "flagged_features": flagged,
        "label_p": report.label_p,
        "label_flagged": report.label_flagged,
        "confidence_p": report.confidence_p,
    }))


def cmd_serve(args):
    import uvicorn

    from .app import create_app

    app = create_app(
        args.artifacts_dir,
        args.store_dir or os.environ.get("VDPT_DATA_DIR", "./vdpt-store"),
        ranges_path=args.ranges,
        influence_config=_load_config_overrides(args.config),
        static_dir=args.static_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vdpt", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic cohort CSV")
    sim.add_argument("--out", required=True)
    sim.add_argument("--n", type=int, default=DEFAULT_SYNTHETIC_N)
    sim.add_argument("--prevalence", type=float, default=DEFAULT_SYNTHETIC_PREVALENCE)
    sim.add_argument("--missing-rate", type=float, default=DEFAULT_SYNTHETIC_MISSING_RATE)
    sim.add_argument("--shift", action="append", default=[],
                     metavar="FEATURE=SIGMA", help="mean shift in population-sigma units")
    sim.add_argument("--shift-prevalence", type=float, default=None)
    sim.add_argument("--seed", type=int, default=0)
    sim.set_defaults(func=cmd_simulate)

    tr = sub.add_parser("train", help="train a model and write artifacts")
    tr.add_argument("--model", choices=("mlp", "vdp"), required=True)
    tr.add_argument("--data", required=True)
    tr.add_argument("--artifacts-dir", default="./artifacts")
    tr.add_argument("--profile", choices=("deployed", "synthetic"), default="synthetic")
    tr.add_argument("--config", default=None, help="JSON file overriding profile fields")
    tr.add_argument("--seed", type=int, default=0)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("evaluate", help="stratified cross-validation metrics")
    ev.add_argument("--model", choices=("mlp", "vdp"), required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--k", type=int, default=10)
    ev.add_argument("--profile", choices=("deployed", "synthetic"), default="synthetic")
    ev.add_argument("--config", default=None)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out", default=None)
    ev.set_defaults(func=cmd_evaluate)

    se = sub.add_parser("search", help="seeded random hyperparameter search")
    se.add_argument("--model", choices=("mlp", "vdp"), required=True)
    se.add_argument("--data", required=True)
    se.add_argument("--budget", type=int, required=True)
    se.add_argument("--k", type=int, default=10)
    se.add_argument("--config", default=None, help="JSON overriding SearchSpace fields")
    se.add_argument("--seed", type=int, default=0)
    se.add_argument("--out", default="leaderboard.json")
    se.set_defaults(func=cmd_search)

    ex = sub.add_parser("explain", help="influence explanation for a training row")
    ex.add_argument("--model", choices=("mlp", "vdp"), required=True)
    ex.add_argument("--artifacts-dir", default="./artifacts")
    ex.add_argument("--index", type=int, required=True)
    ex.add_argument("--config", default=None)
    ex.add_argument("--out", default=None)
    ex.set_defaults(func=cmd_explain)

    dr = sub.add_parser("drift", help="dataset-shift battery between two CSVs")
    dr.add_argument("--reference", required=True)
    dr.add_argument("--current", required=True)
    dr.add_argument("--artifacts-dir", default=None,
                    help="include the confidence-distribution test")
    dr.add_argument("--out", default=None)
    dr.set_defaults(func=cmd_drift)

    sv = sub.add_parser("serve", help="run the prediction service")
    sv.add_argument("--artifacts-dir", default="./artifacts")
    sv.add_argument("--store-dir", default=None)
    sv.add_argument("--ranges", default=None)
    sv.add_argument("--config", default=None)
    sv.add_argument("--static-dir", default=None, help="built web UI assets")
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8000)
    sv.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except SystemExit:
        raise
    except Exception as exc:
        _fail(f"{type(exc).__name__}: {exc}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
