"""HTTP prediction service with the clinician-in-the-loop record workflow.

The workflow rule is absolute: no endpoint ever returns model output for a
record that lacks a clinician prediction; a POST without one is rejected
with 422 before any inference runs. Outcomes are write-once. Model
artifacts are loaded once at startup and shared read-only; record writes
are serialized by the store's lock.
"""

from __future__ import annotations

import math
import os
from typing import Optional

import numpy as np
from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from ..data import Cohort
from ..drift import drift_report
from ..influence import InfluenceConfig, MlpAdapter, VdpAdapter, fi_local
from ..uncertainty import VarianceCdf, confidence
from .artifacts import ModelBundle
from .store import OutcomeAlreadySet, RecordStore, UnknownRecord

CLINICIAN_CHOICES = ("survive", "die")
OUTCOME_CHOICES = ("survived", "died")


def _service_influence_config(doc: Optional[dict] = None) -> InfluenceConfig:
    doc = doc or {}
    return InfluenceConfig(
        damping=doc.get("damping", 0.3),
        cg_tol=doc.get("cg_tol", 1e-8),
        cg_max_iter=doc.get("cg_max_iter", 100),
        h_theta=doc.get("h_theta", 1e-5),
        h_x=doc.get("h_x", 1e-3),
        subsample=doc.get("subsample", 500),
        subsample_seed=doc.get("subsample_seed", 0),
    )


class PredictionService:
    """Inference + explanation assembly on top of the loaded artifacts."""

    def __init__(self, bundle: ModelBundle, influence_config: Optional[InfluenceConfig] = None,
                 explanations: bool = True):
        self.bundle = bundle
        self.icfg = influence_config or _service_influence_config()
        self.explanations = explanations
        self.feature_names = bundle.reference.feature_names
        self.cdf = VarianceCdf(bundle.vdp.variance_cdf_values)
        self._mlp_adapter = MlpAdapter.from_model(bundle.mlp)
        self._vdp_adapter = VdpAdapter.from_model(
            bundle.vdp, n_train=bundle.reference.processed.n_rows
        )
        self._train_x = bundle.reference.processed.x
        self._train_y = bundle.reference.processed.y

    def feature_vector(self, features: dict) -> np.ndarray:
        return np.array([features[n] for n in self.feature_names], dtype=np.float64)

    def predict(self, features: dict) -> dict:
        x_raw = self.feature_vector(features)[None, :]
        p_mlp = float(self.bundle.mlp.predict_raw(x_raw)[0])
        p_vdp_arr, var_arr = self.bundle.vdp.predict_raw(x_raw)
        p_vdp, sigma2 = float(p_vdp_arr[0]), float(var_arr[0])
        out = {
            "mlp": {"probability": p_mlp},
            "vdp": {
                "probability": p_vdp,
                "variance": sigma2,
                "confidence": confidence(self.cdf, sigma2),
            },
        }
        if self.explanations:
            out["mlp"]["explanation"] = self._explanation(
                self._mlp_adapter, self.bundle.mlp.standardize_input(x_raw), p_mlp
            )
            out["vdp"]["explanation"] = self._explanation(
                self._vdp_adapter, self.bundle.vdp.standardize(x_raw), p_vdp
            )
        return out

    def _explanation(self, adapter, x_std: np.ndarray, probability: float) -> dict:
        predicted = 1 if probability >= 0.5 else 0
        report = fi_local(
            adapter,
            (x_std[0], float(predicted)),
            (self._train_x, self._train_y),
            self.icfg,
            feature_names=self.feature_names,
        )
        # sign-to-sentiment mapping: positive = contributes toward predicted
        # mortality; flip when the gradient label was the negative class
        sentiment = report.values if predicted == 1 else -report.values
        doc = report.to_dict()
        doc["predicted_class"] = predicted
        doc["sentiment_values"] = sentiment.tolist()
        return doc


def _training_stats(bundle: ModelBundle) -> dict:
    raw = bundle.reference.raw
    stats = {}
    for j, name in enumerate(raw.feature_names):
        vals = raw.x[~raw.mask[:, j], j]
        q1, q2, q3 = np.quantile(vals, [0.25, 0.5, 0.75])
        entry = {
            "mean": float(vals.mean()),
            "std": float(vals.std(ddof=0)),
            "q1": float(q1),
            "median": float(q2),
            "q3": float(q3),
            "n_observed": int(vals.size),
        }
        if name in bundle.ranges.ranges:
            entry["healthy_range"] = bundle.ranges.ranges[name]
        stats[name] = entry
    return {
        "format": "vdpt.training-stats/1",
        "n_rows": raw.n_rows,
        "prevalence": float(raw.y.mean()),
        "features": stats,
    }


def create_app(artifacts_dir, store_dir, ranges_path=None,
               influence_config: Optional[dict] = None,
               drift_min_outcomes: int = 10,
               explanations: bool = True,
               static_dir=None) -> FastAPI:
    bundle = ModelBundle.load(artifacts_dir, ranges_path)
    service = PredictionService(
        bundle, _service_influence_config(influence_config), explanations
    )
    store = RecordStore(store_dir)
    stats_payload = _training_stats(bundle)
    app = FastAPI(title="vdpt prediction service")
    token = os.environ.get("VDPT_API_TOKEN")

    async def check_token(request: Request):
        if token and request.headers.get("authorization") != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or invalid token")

    dep = [Depends(check_token)]

    def _error(status: int, message: str):
        return JSONResponse(status_code=status, content={"error": message})

    @app.post("/api/records", dependencies=dep)
    async def create_record(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "body must be JSON")
        if not isinstance(body, dict):
            return _error(400, "body must be a JSON object")
        clinician = body.get("clinician_prediction")
        if clinician not in CLINICIAN_CHOICES:
            # workflow rule: no model output may be computed, let alone leaked
            return _error(
                422, "clinician_prediction (survive|die) is required before model output"
            )
        features = body.get("features")
        if not isinstance(features, dict):
            return _error(400, "features object is required")
        missing = [n for n in service.feature_names if n not in features]
        if missing:
            return _error(400, f"missing features: {missing}")
        clean = {}
        for name in service.feature_names:
            v = features[name]
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                return _error(400, f"feature {name!r} must be a finite number")
            lo, hi = bundle.ranges.hard_bounds(name)
            if not lo <= v <= hi:
                return _error(
                    400, f"feature {name!r}={v} outside plausible bounds [{lo:g}, {hi:g}]"
                )
            clean[name] = float(v)
        outputs = service.predict(clean)
        record = {
            "format": "vdpt.record/1",
            "features": clean,
            "clinician_prediction": clinician,
            "models": outputs,
            "outcome": None,
            "cohort_tag": body.get("cohort_tag", ""),
        }
        stored = store.create(record, idempotency_key=body.get("idempotency_key"))
        return stored

    @app.patch("/api/records/{record_id}/outcome", dependencies=dep)
    async def set_outcome(record_id: str, request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "body must be JSON")
        outcome = body.get("outcome")
        if outcome not in OUTCOME_CHOICES:
            return _error(400, "outcome must be 'survived' or 'died'")
        try:
            return store.set_outcome(record_id, outcome)
        except UnknownRecord:
            return _error(404, f"no record {record_id}")
        except OutcomeAlreadySet:
            return _error(409, "outcome already set; outcomes are write-once")

    @app.get("/api/records", dependencies=dep)
    async def list_records():
        return {"records": store.list_records()}

    @app.get("/api/records/{record_id}", dependencies=dep)
    async def get_record(record_id: str):
        try:
            return store.get(record_id)
        except UnknownRecord:
            return _error(404, f"no record {record_id}")

    @app.get("/api/ranges", dependencies=dep)
    async def get_ranges():
        return bundle.ranges.to_payload()

    @app.get("/api/stats", dependencies=dep)
    async def get_stats():
        return stats_payload

    @app.get("/api/drift", dependencies=dep)
    async def get_drift():
        records = [r for r in store.list_records() if r.get("outcome") in OUTCOME_CHOICES]
        if len(records) < drift_min_outcomes:
            return _error(
                409,
                f"need at least {drift_min_outcomes} records with outcomes, "
                f"have {len(records)}",
            )
        names = service.feature_names
        x = np.array([[r["features"][n] for n in names] for r in records])
        y = np.array([1 if r["outcome"] == "died" else 0 for r in records])
        current = Cohort(names, x, np.zeros_like(x, dtype=bool), y)
        report = drift_report(
            bundle.reference.raw, current, vdp_model=bundle.vdp, variance_cdf=service.cdf
        )
        return report.to_dict()

    if static_dir is not None and os.path.isdir(static_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="webui")

    app.state.store = store
    app.state.bundle = bundle
    app.state.service = service
    return app
