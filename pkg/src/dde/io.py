"""File formats: JSON model files and header-free CSV matrices.

Model JSON schema ("dde/v1")::

    {"schema": "dde/v1", "D": int, "K": [...], "J": int,
     "family": {"kind": "bernoulli"|"poisson"|"normal"},
     "p": [...], "B": [[[row-major matrix]], ...], "gamma": [...]}

Coefficient matrices are stored row-major with the intercept column first.
Datasets are header-free N x J numeric CSV grids.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .model import Dataset, DdeModel, LatentAssignment, ObservedFamily

SCHEMA = "dde/v1"


def model_to_dict(model: DdeModel) -> dict:
    d = {
        "schema": SCHEMA,
        "D": model.D,
        "K": list(model.K),
        "J": model.J,
        "family": {"kind": model.family.kind},
        "p": model.p.tolist(),
        "B": [b.tolist() for b in model.B],
    }
    if model.gamma is not None:
        d["gamma"] = model.gamma.tolist()
    return d


def model_from_dict(d: dict) -> DdeModel:
    try:
        family = ObservedFamily(d["family"]["kind"])
        model = DdeModel(
            K=[int(k) for k in d["K"]], J=int(d["J"]),
            p=np.asarray(d["p"], dtype=float),
            B=[np.asarray(b, dtype=float) for b in d["B"]],
            family=family,
            gamma=(np.asarray(d["gamma"], dtype=float)
                   if "gamma" in d else None))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed model file: {exc}") from exc
    model.validate()
    return model


def save_model(model: DdeModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")


def load_model(path: str | Path) -> DdeModel:
    return model_from_dict(json.loads(Path(path).read_text()))


def save_matrix(M: np.ndarray, path: str | Path) -> None:
    np.savetxt(path, np.asarray(M), delimiter=",", fmt="%.12g")


def load_matrix(path: str | Path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=","))


def load_dataset(path: str | Path, family: ObservedFamily) -> Dataset:
    return Dataset(load_matrix(path), family)


def save_latents(latents: LatentAssignment, path: str | Path) -> None:
    """All layers side by side in one CSV, shallowest layer first."""
    save_matrix(np.hstack(latents.A), path)


def load_latents(path: str | Path, K: list[int]) -> LatentAssignment:
    M = load_matrix(path)
    if M.shape[1] != sum(K):
        raise ValidationError(
            f"latent CSV has {M.shape[1]} columns, expected {sum(K)}")
    splits = np.cumsum(K)[:-1]
    return LatentAssignment(list(np.hsplit(M, splits)))


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]
