"""Deployment layer: HTTP API, record store, artifacts, CLI."""

from .app import create_app
from .artifacts import ModelBundle, ReferenceRanges, TrainingReference
from .store import RecordStore

__all__ = ["create_app", "ModelBundle", "ReferenceRanges", "TrainingReference", "RecordStore"]
