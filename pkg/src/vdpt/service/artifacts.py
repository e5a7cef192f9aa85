"""Training-artifact bundle shared by the CLI and the HTTP service.

``train`` writes three files into the artifacts directory:

- mlp.json / vdp.json: model parameters, preprocessing stats, config echo
- training_reference.json: the processed training split (imputed and
  standardized feature matrix plus the raw observed values and mask), which
  serves as the influence-aggregation set, the drift reference, and the
  source of the statistics pane.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
import numpy as np

from ..data import Cohort
from ..errors import VdptError

REFERENCE_FORMAT = "vdpt.training-reference/1"
MLP_FILE = "mlp.json"
VDP_FILE = "vdp.json"
REFERENCE_FILE = "training_reference.json"


@dataclass
class ReferenceRanges:
    ranges: dict[str, dict]  # name -> {low, high, unit}

    def __post_init__(self):
        for name, r in self.ranges.items():
            if not r["low"] < r["high"]:
                raise ValueError(f"range for {name!r} must have low < high")

    @classmethod
    def load(cls, path=None) -> "ReferenceRanges":
        if path is None:
            with resources.files("vdpt.config").joinpath("reference_ranges.json").open() as fh:
                doc = json.load(fh)
        else:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        if doc.get("format") != "vdpt.ranges/1":
            raise ValueError(f"unexpected ranges format {doc.get('format')!r}")
        return cls(doc["ranges"])

    def hard_bounds(self, name: str) -> tuple[float, float]:
        """Plausibility window: the healthy range widened to 10x its span,
        centered on it."""
        r = self.ranges[name]
        span = r["high"] - r["low"]
        return r["low"] - 4.5 * span, r["high"] + 4.5 * span

    def to_payload(self) -> dict:
        return {"format": "vdpt.ranges/1", "ranges": self.ranges}


def save_training_reference(path_dir, raw: Cohort, processed: Cohort) -> None:
    doc = {
        "format": REFERENCE_FORMAT,
        "feature_names": list(raw.feature_names),
        "raw_x": [
            [None if raw.mask[i, j] else raw.x[i, j] for j in range(raw.n_features)]
            for i in range(raw.n_rows)
        ],
        "processed_x": processed.x.tolist(),
        "y": raw.y.tolist(),
    }
    with open(Path(path_dir) / REFERENCE_FILE, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)


@dataclass
class TrainingReference:
    feature_names: list[str]
    raw: Cohort  # raw clinical units, missing cells masked
    processed: Cohort  # imputed + standardized

    @classmethod
    def load(cls, path_dir) -> "TrainingReference":
        with open(Path(path_dir) / REFERENCE_FILE, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("format") != REFERENCE_FORMAT:
            raise ValueError(f"unexpected reference format {doc.get('format')!r}")
        names = list(doc["feature_names"])
        raw_cells = doc["raw_x"]
        n, d = len(raw_cells), len(names)
        raw_x = np.full((n, d), np.nan)
        mask = np.zeros((n, d), dtype=bool)
        for i, row in enumerate(raw_cells):
            for j, cell in enumerate(row):
                if cell is None:
                    mask[i, j] = True
                else:
                    raw_x[i, j] = cell
        y = np.asarray(doc["y"], dtype=np.int64)
        raw = Cohort(names, raw_x, mask, y)
        processed = Cohort(
            names, np.asarray(doc["processed_x"], dtype=np.float64),
            np.zeros((n, d), dtype=bool), y.copy(),
        )
        return cls(names, raw, processed)


class ArtifactsMissing(VdptError):
    pass


@dataclass
class ModelBundle:
    """Everything the service needs, loaded once and treated as immutable."""

    mlp: object
    vdp: object
    reference: TrainingReference
    ranges: ReferenceRanges

    @classmethod
    def load(cls, artifacts_dir, ranges_path=None) -> "ModelBundle":
        from ..mlp import MlpModel
        from ..vdp import VdpModel

        d = Path(artifacts_dir)
        missing = [f for f in (MLP_FILE, VDP_FILE, REFERENCE_FILE) if not (d / f).exists()]
        if missing:
            raise ArtifactsMissing(f"missing artifact files in {d}: {missing}")
        return cls(
            mlp=MlpModel.load(d / MLP_FILE),
            vdp=VdpModel.load(d / VDP_FILE),
            reference=TrainingReference.load(d),
            ranges=ReferenceRanges.load(ranges_path),
        )
