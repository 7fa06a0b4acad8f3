"""Shared definitions for the acceptance experiments.

Both the fixture-pinning script and the acceptance test suite import these,
so the pinned thresholds and the asserted runs use identical procedures.
"""

import numpy as np

from decisionmap.classifier import fgsm, predict_batch, train_softmax
from decisionmap.datasets import Dataset, make_blobs
from decisionmap.embedding import UmapParams, calibrate, fit_ab, optimize
from decisionmap.fisher_metric import (
    DistanceMatrix,
    FisherMetricConfig,
    distance_matrix,
    euclidean_distance_matrix,
)
from decisionmap.pipeline import GridParams, PipelineConfig

E2E = {
    "n_total": 270,
    "n_train": 150,
    "classes": 3,
    "dim": 10,
    "center_spread": 5.0,
    "noise": 2.5,
    "data_seed": 42,
    "split_seed": 7,
    "lambda": 0.65,
    "n_segments": 8,
    "k": 15,
    "epochs": 500,
    "umap_seed": 0,
    "grid": [100, 100],
}

FGSM_RUNS = {
    "seeds": [0, 1, 2, 3, 4],
    "n": 75,
    "classes": 3,
    "dim": 10,
    "center_spread": 5.0,
    "noise": 2.0,
    "epsilons": [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0],
    "flip_confidence": 0.8,
    "lambda_base": 1.0,  # scaled by median(sqrt-JS) / median(Euclidean)
    "k": 10,
    "epochs": 300,
}


def e2e_dataset():
    full = make_blobs(n=E2E["n_total"], classes=E2E["classes"], dim=E2E["dim"],
                      center_spread=E2E["center_spread"], noise=E2E["noise"],
                      seed=E2E["data_seed"])
    perm = np.random.default_rng(E2E["split_seed"]).permutation(E2E["n_total"])
    tr, te = perm[: E2E["n_train"]], perm[E2E["n_train"]:]
    return (Dataset(full.points[tr], full.labels[tr]),
            Dataset(full.points[te], full.labels[te]))


def e2e_config(parallelism=1):
    return PipelineConfig(
        metric=FisherMetricConfig(lam=E2E["lambda"], n_segments=E2E["n_segments"]),
        umap=UmapParams(k=E2E["k"], epochs=E2E["epochs"], seed=E2E["umap_seed"]),
        grid=GridParams(width=E2E["grid"][0], height=E2E["grid"][1]),
        parallelism=parallelism,
        euclidean_baseline=True,
    )


def fgsm_placement_run(seed):
    """One seeded adversarial run; returns (epsilon, lambda, placement success).

    Sweeps epsilon until some perturbed point is confidently misclassified,
    then embeds the augmented set under the scale-free regularization weight
    and compares the adversarial point's 2D distance to the centroids of its
    predicted and true classes.
    """
    p = FGSM_RUNS
    data = make_blobs(n=p["n"], classes=p["classes"], dim=p["dim"],
                      center_spread=p["center_spread"], noise=p["noise"], seed=seed)
    f = train_softmax(data, epochs=300, learning_rate=1.0)
    pred = predict_batch(f, data.points).argmax(axis=1)
    correct = np.flatnonzero(pred == data.labels)
    adv = None
    eps_used = None
    for eps in p["epsilons"]:
        for i in correct:
            cand = fgsm(f, data.points[i], int(data.labels[i]), eps)
            probs = predict_batch(f, cand[None])[0]
            if probs.argmax() != data.labels[i] and probs.max() >= p["flip_confidence"]:
                adv, eps_used, true_label = cand, eps, int(data.labels[i])
                break
        if adv is not None:
            break
    if adv is None:
        return None, None, False
    augmented = Dataset(np.vstack([data.points, adv]),
                        np.concatenate([data.labels, [true_label]]))
    js_only = distance_matrix(augmented, f,
                              FisherMetricConfig(lam=0.0, n_segments=E2E["n_segments"]))
    eucl = euclidean_distance_matrix(augmented)
    iu = np.triu_indices(augmented.n, k=1)
    lam = p["lambda_base"] * float(
        np.median(js_only.values[iu]) / np.median(eucl.values[iu])
    )
    dist = DistanceMatrix(values=js_only.values + lam * eucl.values,
                          config=FisherMetricConfig(lam=lam, n_segments=E2E["n_segments"]),
                          classifier_id=f.fingerprint())
    graph = calibrate(dist, k=p["k"])
    a, b = fit_ab(0.1, 1.0)
    emb = optimize(graph, a, b, epochs=p["epochs"], seed=0)
    coords = emb.coords
    model_labels = predict_batch(f, augmented.points).argmax(axis=1)
    adv_pred = int(model_labels[-1])
    centroids = {
        c: coords[:-1][model_labels[:-1] == c].mean(axis=0)
        for c in np.unique(model_labels[:-1])
    }
    d_pred = np.linalg.norm(coords[-1] - centroids[adv_pred])
    d_true = np.linalg.norm(coords[-1] - centroids[true_label])
    return eps_used, lam, bool(d_pred < d_true)
