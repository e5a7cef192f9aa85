"""Record API fixtures for the UI contract suite.

Trains tiny deterministic/stochastic models on a seeded synthetic cohort,
runs the real service in-process, and captures the exact JSON payloads the
UI consumes. Rerun after any wire-format change:

    python3 frontend/scripts/record_fixtures.py
"""

import json
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def main():
    from vdpt.data import generate_synthetic_cohort, save_csv
    from vdpt.numeric import SeededRng
    from vdpt.service.app import create_app
    from vdpt.service.cli import main as cli_main

    FIXTURES.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        data = tmp / "train.csv"
        save_csv(generate_synthetic_cohort(400, 0.25, missing_rate=0.05,
                                           rng=SeededRng(42)), data)
        art = tmp / "artifacts"
        for model, cfg in (
            ("mlp", {"widths": [8], "epochs": 40, "batch_size": 0, "learning_rate": 0.2,
                     "weight_decay": 0.001, "momentum": 0.9, "pos_weight": 3.0}),
            ("vdp", {"widths": [8], "epochs": 40, "batch_size": 128, "learning_rate": 0.01,
                     "jitter": 0.01, "weight_decay": 0.001, "momentum": 0.9}),
        ):
            cfg_path = tmp / f"{model}.cfg.json"
            cfg_path.write_text(json.dumps(cfg))
            assert cli_main([
                "train", "--model", model, "--data", str(data),
                "--artifacts-dir", str(art), "--config", str(cfg_path), "--seed", "7",
            ]) == 0

        app = create_app(art, tmp / "store",
                         influence_config={"subsample": 100, "cg_max_iter": 40,
                                           "damping": 0.5})
        client = TestClient(app)

        def dump(name, payload):
            path = FIXTURES / name
            path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
            print("wrote", path)

        dump("ranges.json", client.get("/api/ranges").json())
        dump("stats.json", client.get("/api/stats").json())

        cohort = generate_synthetic_cohort(1, 0.5, rng=SeededRng(1))
        feats = {n: float(cohort.x[0, j]) for j, n in enumerate(cohort.feature_names)}
        record = client.post(
            "/api/records",
            json={"features": feats, "clinician_prediction": "survive",
                  "idempotency_key": "fixture-1"},
        ).json()
        dump("record.json", record)

        rejection = client.post("/api/records", json={"features": feats})
        dump("rejection_422.json",
             {"status": rejection.status_code, "body": rejection.json()})
    return 0


if __name__ == "__main__":
    sys.exit(main())
