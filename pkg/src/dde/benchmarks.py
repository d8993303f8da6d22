"""Construction of the simulation-benchmark parameter sets.

Two coefficient layouts are provided per layer, both built from three
stacked K x K blocks (rows = K^(d-1) = 3 K^(d)):

* "strict": identity blocks worth 4 on top of a banded third block
  (diagonal 4, plus 4/3 where |k - j| = K/2), intercepts -2 / -4 / -2.
  Every latent variable gets two pure children.
* "generic": the identity blocks are replaced by a triangular band
  (diagonal 4, plus 4/3 for 0 < k - j <= ceil(K/3)) and its transpose,
  so no latent variable has a pure child.

Top-layer proportions are 0.5 and Normal dispersions are 1.  For the
generic Poisson layout the observed-layer intercepts are lowered to keep
the rates from exploding.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import ValidationError
from .model import DdeModel, ObservedFamily


def _banded_block(K: int) -> np.ndarray:
    """Diagonal 4 with 4/3 where |k - j| = K/2 (no-op for odd K)."""
    b = 4.0 * np.eye(K)
    if K % 2 == 0:
        h = K // 2
        for j in range(K):
            for k in range(K):
                if abs(k - j) == h:
                    b[j, k] = 4.0 / 3.0
    return b


def _triangular_block(K: int) -> np.ndarray:
    """Diagonal 4 with 4/3 for 0 < k - j <= ceil(K/3)."""
    w = math.ceil(K / 3)
    b = 4.0 * np.eye(K)
    for j in range(K):
        for k in range(K):
            if 0 < k - j <= w:
                b[j, k] = 4.0 / 3.0
    return b


def _layer_matrix(kind: str, K: int) -> np.ndarray:
    third = _banded_block(K)
    if kind == "strict":
        top, mid = 4.0 * np.eye(K), 4.0 * np.eye(K)
    else:
        tri = _triangular_block(K)
        top, mid = tri, tri.T
    slopes = np.vstack([top, mid, third])
    intercepts = np.concatenate([
        -2.0 * np.ones(K), -4.0 * np.ones(K), -2.0 * np.ones(K)])
    return np.column_stack([intercepts, slopes])


def make_benchmark_params(kind: str, J: int, K: list[int],
                          family: ObservedFamily) -> DdeModel:
    """Build the strict or generic benchmark model for the given layout."""
    if kind not in ("strict", "generic"):
        raise ValidationError(f"unknown benchmark kind {kind!r}")
    K = [int(k) for k in K]
    sizes = [J] + K
    for lower, upper in zip(sizes, sizes[1:]):
        if lower != 3 * upper:
            raise ValidationError(
                f"benchmark layout needs each layer to be 3x the one above; "
                f"got {lower} over {upper}")
    if J != 3 * K[0]:
        warnings.warn("benchmark layout expects J = 3 K^(1)", stacklevel=2)
    B = [_layer_matrix(kind, k) for k in K]
    if kind == "generic" and family.kind == "poisson":
        B[0] = B[0].copy()
        B[0][:, 0] = _generic_poisson_intercepts(B[0], K)
    gamma = np.ones(J) if family.has_dispersion else None
    model = DdeModel(K=K, J=J, p=0.5 * np.ones(K[-1]), B=B,
                     family=family, gamma=gamma)
    model.validate()
    return model


def _generic_poisson_intercepts(B1: np.ndarray, K: list[int]) -> np.ndarray:
    K1 = K[0]
    K2 = K[1] if len(K) > 1 else None
    J = B1.shape[0]
    if K2 == 6:
        slope_sums = B1[:, 1:].sum(axis=1)
        return np.where(slope_sums >= 8.0, -10.0, -5.0)
    out = np.empty(J)
    out[:K1] = -3.0
    out[K1:2 * K1] = -5.0
    out[2 * K1:] = -2.0
    return out
