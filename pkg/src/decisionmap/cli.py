"""Command-line entry points.

Subcommands: train (fit a built-in classifier on a CSV), map (build and save
a decision map), eval (print the quality report), adversarial (append FGSM
points to a dataset), serve (start the HTTP service).  Exit codes: 0 on
success, 2 on validation errors, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import app as app_mod
from .classifier import ClassifierHandle, fgsm, predict_batch, train_mlp, train_softmax
from .datasets import Dataset, load_csv, save_csv
from .embedding import UmapParams
from .errors import DecisionMapError, ParameterError
from .fisher_metric import FisherMetricConfig
from .pipeline import GridParams, PipelineConfig, run_artifacts
from .render import render_png


def _add_pipeline_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", type=float, default=0.65,
                   help="Euclidean regularization weight")
    p.add_argument("--segments", type=int, default=8, help="path discretization count")
    p.add_argument("--divergence", choices=["sqrt_js", "sym_kl"], default="sqrt_js")
    p.add_argument("--k", type=int, default=15, help="neighbors for calibration")
    p.add_argument("--epochs", type=int, default=500, help="layout optimization epochs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-dist", type=float, default=0.1)
    p.add_argument("--spread", type=float, default=1.0)
    p.add_argument("--grid", type=int, nargs=2, default=(100, 100), metavar=("GW", "GH"))
    p.add_argument("--margin", type=float, default=0.05)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--cache", type=Path, default=None,
                   help="distance-matrix cache file (reused when config matches)")
    p.add_argument("--euclidean-baseline", action="store_true",
                   help="also compute q_knn on a Euclidean-metric embedding")


def _config_from_args(args) -> PipelineConfig:
    return PipelineConfig(
        metric=FisherMetricConfig(lam=args.lam, n_segments=args.segments,
                                  divergence=args.divergence),
        umap=UmapParams(k=args.k, epochs=args.epochs, seed=args.seed,
                        min_dist=args.min_dist, spread=args.spread),
        grid=GridParams(width=args.grid[0], height=args.grid[1],
                        margin_fraction=args.margin),
        parallelism=args.parallelism,
        quality_seed=args.seed,
        euclidean_baseline=args.euclidean_baseline,
    )


def _load_inputs(args) -> tuple[Dataset, ClassifierHandle]:
    data_path = Path(args.data)
    model_path = Path(args.model)
    if not data_path.exists():
        raise ParameterError(f"data file not found: {data_path}")
    if not model_path.exists():
        raise ParameterError(f"model file not found: {model_path}")
    return load_csv(data_path), ClassifierHandle.from_json(model_path.read_text())


def cmd_train(args) -> int:
    data_path = Path(args.data)
    if not data_path.exists():
        raise ParameterError(f"data file not found: {data_path}")
    data = load_csv(data_path)
    if args.kind == "softmax":
        handle = train_softmax(data, epochs=args.epochs, learning_rate=args.lr,
                               seed=args.seed)
    else:
        hidden = tuple(args.hidden) if args.hidden else (16,)
        handle = train_mlp(data, hidden_sizes=hidden, epochs=args.epochs,
                           learning_rate=args.lr, seed=args.seed)
    pred = predict_batch(handle, data.points).argmax(axis=1)
    acc = float((pred == data.labels).mean())
    Path(args.out).write_text(handle.to_json())
    print(json.dumps({"training_accuracy": acc, "classes": handle.class_count,
                      "model": str(args.out)}))
    return 0


def cmd_map(args) -> int:
    data, handle = _load_inputs(args)
    config = _config_from_args(args)
    artifacts = run_artifacts(data, handle, config, cache_path=args.cache)
    out = Path(args.out)
    map_path = out.with_name(out.name + ".map.json")
    png_path = out.with_name(out.name + ".png")
    map_path.write_bytes(artifacts.decision_map.to_json_bytes())
    png_path.write_bytes(render_png(artifacts.decision_map))
    print(artifacts.decision_map.quality.to_json())
    return 0


def cmd_eval(args) -> int:
    data, handle = _load_inputs(args)
    config = _config_from_args(args)
    artifacts = run_artifacts(data, handle, config, cache_path=args.cache)
    report = artifacts.decision_map.quality.to_dict()
    if args.ground_truth_knn and data.labels is not None:
        from .evaluation import q_knn

        report["q_knn_ground_truth"] = q_knn(
            artifacts.embedding_model.coords, data.labels, k=5
        )
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_adversarial(args) -> int:
    data, handle = _load_inputs(args)
    if data.labels is None:
        raise ParameterError("adversarial generation needs labels")
    if args.epsilon < 0:
        raise ParameterError("epsilon must be nonnegative")
    pred = predict_batch(handle, data.points).argmax(axis=1)
    correct = np.flatnonzero(pred == data.labels)
    if correct.size == 0:
        raise ParameterError("no correctly classified points to perturb")
    chosen = correct[: args.count]
    adv = np.array([
        fgsm(handle, data.points[i], int(data.labels[i]), args.epsilon) for i in chosen
    ])
    points = np.vstack([data.points, adv])
    labels = np.concatenate([data.labels, data.labels[chosen]])
    save_csv(args.out, Dataset(points, labels, feature_names=data.feature_names,
                               image_shape=data.image_shape))
    flipped = predict_batch(handle, adv).argmax(axis=1) != data.labels[chosen]
    print(json.dumps({"added": int(chosen.size), "flipped": int(flipped.sum()),
                      "epsilon": args.epsilon, "out": str(args.out)}))
    return 0


def cmd_serve(args) -> int:
    data, handle = _load_inputs(args)
    config = _config_from_args(args)
    session = app_mod.Session(data, handle, config)
    app_mod.serve(session, host=args.host, port=args.port, static_dir=args.static_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decisionmap",
                                     description="decision maps for classifiers")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a built-in classifier on a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--kind", choices=["softmax", "mlp"], default="softmax")
    p.add_argument("--hidden", type=int, nargs="*", default=None)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("map", help="build a decision map, write .map.json and .png")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output name stem")
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("eval", help="print the quality report")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--ground-truth-knn", action="store_true",
                   help="also score q_knn against ground-truth labels")
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("adversarial", help="append FGSM points to a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_adversarial)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static-dir", default=None, help="directory with the built UI")
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DecisionMapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
