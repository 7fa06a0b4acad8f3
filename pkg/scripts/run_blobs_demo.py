"""End-to-end demo on synthetic blobs with one injected adversarial point.

Trains a softmax classifier, crafts a confidently misclassified FGSM point,
builds the decision map with a scale-free regularization weight, and writes
demo.map.json / demo.png next to this script.
"""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))
from acceptance_experiments import FGSM_RUNS  # noqa: E402

from decisionmap.classifier import fgsm, predict_batch, train_softmax
from decisionmap.datasets import Dataset, make_blobs
from decisionmap.embedding import UmapParams
from decisionmap.evaluation import scale_free_lambda_grid
from decisionmap.fisher_metric import (
    FisherMetricConfig,
    distance_matrix,
    euclidean_distance_matrix,
)
from decisionmap.pipeline import GridParams, PipelineConfig, probe, run_artifacts
from decisionmap.render import render_png

OUT = Path(__file__).resolve().parent


def main():
    data = make_blobs(n=120, classes=3, dim=10, center_spread=5.0, noise=2.0, seed=0)
    f = train_softmax(data, epochs=300, learning_rate=1.0)

    # craft one confidently misclassified point and append it
    pred = predict_batch(f, data.points).argmax(axis=1)
    adv, true_label = None, None
    for eps in FGSM_RUNS["epsilons"]:
        for i in np.flatnonzero(pred == data.labels):
            cand = fgsm(f, data.points[i], int(data.labels[i]), eps)
            probs = predict_batch(f, cand[None])[0]
            if probs.argmax() != data.labels[i] and probs.max() >= 0.8:
                adv, true_label = cand, int(data.labels[i])
                break
        if adv is not None:
            break
    augmented = Dataset(np.vstack([data.points, adv]),
                        np.concatenate([data.labels, [true_label]]))

    # scale-free lambda from the median sqrt-JS / Euclidean ratio
    js_only = distance_matrix(augmented, f, FisherMetricConfig(lam=0.0))
    iu = np.triu_indices(augmented.n, k=1)
    lam = scale_free_lambda_grid(js_only.values[iu],
                                 euclidean_distance_matrix(augmented).values[iu])[3]

    config = PipelineConfig(
        metric=FisherMetricConfig(lam=lam, n_segments=8),
        umap=UmapParams(k=15, epochs=500, seed=0),
        grid=GridParams(width=100, height=100),
        euclidean_baseline=True,
    )
    artifacts = run_artifacts(augmented, f, config)
    dm = artifacts.decision_map

    (OUT / "demo.map.json").write_bytes(dm.to_json_bytes())
    (OUT / "demo.png").write_bytes(render_png(dm))

    adv_xy = dm.scatter[-1, :2]
    x, probs, label, entropy = probe(dm, artifacts.inverse, f, adv_xy)
    print(json.dumps({
        "lambda": lam,
        "quality": dm.quality.to_dict(),
        "adversarial": {
            "true_label": true_label,
            "probe_label": label,
            "probe_entropy": round(entropy, 4),
            "position": [round(float(v), 3) for v in adv_xy],
        },
        "outputs": ["scripts/demo.map.json", "scripts/demo.png"],
    }, indent=2))


if __name__ == "__main__":
    main()
