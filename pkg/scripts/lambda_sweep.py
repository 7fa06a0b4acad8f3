"""Regularization-weight selection demo.

Evaluates q_knn over the scale-free candidate grid and applies the
largest-without-significant-drop rule; prints one line per candidate.
"""

import json

import numpy as np

from decisionmap.classifier import predict_batch, train_softmax
from decisionmap.datasets import make_blobs
from decisionmap.embedding import UmapParams, calibrate, fit_ab, optimize
from decisionmap.evaluation import q_knn, scale_free_lambda_grid, select_lambda
from decisionmap.fisher_metric import (
    DistanceMatrix,
    FisherMetricConfig,
    distance_matrix,
    euclidean_distance_matrix,
)


def main():
    data = make_blobs(n=120, classes=3, dim=10, center_spread=5.0, noise=2.5, seed=1)
    f = train_softmax(data, epochs=300, learning_rate=1.0)
    model_labels = predict_batch(f, data.points).argmax(axis=1)

    # the arc-length part is independent of lambda, so one JS-only matrix
    # plus the Euclidean matrix spans the whole candidate grid
    js_only = distance_matrix(data, f, FisherMetricConfig(lam=0.0, n_segments=8))
    eucl = euclidean_distance_matrix(data)
    iu = np.triu_indices(data.n, k=1)
    candidates = scale_free_lambda_grid(js_only.values[iu], eucl.values[iu])
    a, b = fit_ab(0.1, 1.0)

    def q_knn_for(lam: float) -> float:
        dist = DistanceMatrix(values=js_only.values + lam * eucl.values,
                              config=FisherMetricConfig(lam=lam, n_segments=8),
                              classifier_id=f.fingerprint())
        emb = optimize(calibrate(dist, k=15), a, b, epochs=400, seed=0)
        return q_knn(emb.coords, model_labels)

    scores = {lam: q_knn_for(lam) for lam in candidates}
    chosen = select_lambda(candidates, scores.__getitem__, workers=1)
    for lam, score in scores.items():
        marker = " <- selected" if lam == chosen else ""
        print(f"lambda={lam:10.5f}  q_knn={score:.4f}{marker}")
    print(json.dumps({"selected_lambda": chosen}))


if __name__ == "__main__":
    main()
