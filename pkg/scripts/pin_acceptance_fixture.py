"""One-time oracle run that pins the acceptance thresholds.

Runs the end-to-end blobs analog and the seeded adversarial-placement runs,
then freezes the achieved values into tests/fixtures/ so the acceptance
suite can assert against stable, recorded numbers.
"""

import hashlib
import json
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "tests" / "fixtures"
sys.path.insert(0, str(Path(__file__).resolve().parent))

from acceptance_experiments import E2E, FGSM_RUNS, e2e_config, e2e_dataset, fgsm_placement_run

from decisionmap.classifier import predict_batch, train_softmax
from decisionmap.pipeline import run_artifacts
from decisionmap.render import render_png


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    train, test = e2e_dataset()
    f = train_softmax(train, epochs=300, learning_rate=1.0)
    test_acc = float((predict_batch(f, test.points).argmax(1) == test.labels).mean())

    t0 = time.perf_counter()
    artifacts = run_artifacts(train, f, e2e_config(parallelism=1))
    single_s = time.perf_counter() - t0
    q = artifacts.decision_map.quality
    map_bytes = artifacts.decision_map.to_json_bytes()
    png_bytes = render_png(artifacts.decision_map)

    fgsm_outcomes = []
    for seed in FGSM_RUNS["seeds"]:
        eps, lam, ok = fgsm_placement_run(seed)
        fgsm_outcomes.append({"seed": seed, "epsilon": eps, "lambda": lam,
                              "placed_with_predicted": ok})

    fixture = {
        "e2e": dict(E2E, **{
            "test_accuracy": test_acc,
            "q_knn": q.q_knn,
            "q_knn_eucl": q.q_knn_eucl,
            "q_d": q.q_d,
            "q_nd": q.q_nd,
            "single_thread_seconds": round(single_s, 3),
            "map_sha256": hashlib.sha256(map_bytes).hexdigest(),
            "png_sha256": hashlib.sha256(png_bytes).hexdigest(),
        }),
        "fgsm": dict(FGSM_RUNS, outcomes=fgsm_outcomes),
    }
    (FIXTURES / "acceptance_blobs.json").write_text(json.dumps(fixture, indent=2))
    (FIXTURES / "golden_map.png").write_bytes(png_bytes)
    print(json.dumps(fixture["e2e"], indent=2))
    print("fgsm outcomes:", fgsm_outcomes)


if __name__ == "__main__":
    sys.exit(main())
