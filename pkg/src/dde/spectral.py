"""Layerwise double-SVD initialization and spectral-ratio dimension selection.

Each layer is initialized by: denoise the (treated-as-)observed matrix with
a first SVD, linearize through the inverse mean map, column-center, take a
rank-K second SVD, Varimax-rotate the right factor, threshold it to a
sparsity pattern, read binary latents off the signs of the projected left
factor, and re-estimate coefficients by masked least squares.  Deeper
layers repeat the procedure on the estimated binary latents with a
logistic link.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError, ValidationError
from .model import (BERNOULLI, Dataset, DdeModel, GraphSet, LatentAssignment,
                    ObservedFamily)


@dataclass
class SpectralConfig:
    """Truncation and scaling constants for the initializer.

    delta_thresh defaults to 1/(2.5 sqrt(J)) at call time; c_g defaults to
    1 for the identity link and 1/2 for the logistic and exponential links.
    """

    eps_trunc: float = 1e-4
    delta_thresh: float | None = None
    c_g: float | None = None
    singular_floor_mult: float = 1.01
    varimax_tol: float = 1e-6
    varimax_max_sweeps: int = 100

    def __post_init__(self):
        if not 0.0 < self.eps_trunc < 0.5:
            raise ValidationError("eps_trunc must lie in (0, 0.5)")
        if self.delta_thresh is not None and self.delta_thresh <= 0:
            raise ValidationError("delta_thresh must be positive")

    def delta_for(self, J: int) -> float:
        return self.delta_thresh if self.delta_thresh is not None \
            else 1.0 / (2.5 * math.sqrt(J))

    def cg_for(self, family: ObservedFamily) -> float:
        if self.c_g is not None:
            return self.c_g
        return 1.0 if family.kind == "normal" else 0.5


@dataclass
class SpectralInit:
    """Initializer output: rough parameters, latents, graphs, and spectra."""

    model0: DdeModel
    A0: LatentAssignment
    G0: GraphSet
    singular_values: list[np.ndarray] = field(default_factory=list)


def varimax_criterion(V: np.ndarray) -> float:
    """Sum over columns of the variance of the squared loadings."""
    V2 = V ** 2
    return float(((V2 ** 2).mean(axis=0) - V2.mean(axis=0) ** 2).sum())


def varimax(V: np.ndarray, max_iter: int = 100,
            tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Varimax rotation by cyclic pairwise Kaiser updates.

    Returns (V @ R, R) with R orthogonal; terminates when a full sweep
    improves the criterion by less than tol (relative) or after max_iter
    sweeps.  K = 1 returns the input unchanged.
    """
    V = np.asarray(V, dtype=float)
    J, K = V.shape
    R = np.eye(K)
    if K == 1:
        return V.copy(), R
    W = V.copy()
    crit = varimax_criterion(W)
    for _ in range(max_iter):
        for p in range(K - 1):
            for q in range(p + 1, K):
                x, y = W[:, p], W[:, q]
                u = x ** 2 - y ** 2
                v = 2.0 * x * y
                a, b = u.sum(), v.sum()
                c = (u ** 2 - v ** 2).sum()
                d = 2.0 * (u * v).sum()
                num = d - 2.0 * a * b / J
                den = c - (a ** 2 - b ** 2) / J
                phi = 0.25 * math.atan2(num, den)
                if abs(phi) < 1e-12:
                    continue
                cs, sn = math.cos(phi), math.sin(phi)
                rot = np.array([[cs, -sn], [sn, cs]])
                W[:, [p, q]] = W[:, [p, q]] @ rot
                R[:, [p, q]] = R[:, [p, q]] @ rot
        new_crit = varimax_criterion(W)
        if new_crit - crit <= tol * max(abs(crit), 1e-12):
            crit = new_crit
            break
        crit = new_crit
    return W, R


def denoise_and_linearize(Y: np.ndarray, K: int, family: ObservedFamily,
                          cfg: SpectralConfig | None = None) -> np.ndarray:
    """First-SVD denoising, range truncation, and inverse mean map.

    The retained rank is max(K+1, #{sigma_k >= mult * sqrt(N)}).  The
    identity link passes through untouched.
    """
    cfg = cfg or SpectralConfig()
    Y = np.asarray(Y, dtype=float)
    if K < 1:
        raise ValidationError("K must be at least 1")
    N, J = Y.shape
    if family.kind == "normal":
        return Y.copy()
    try:
        U, s, Vt = np.linalg.svd(Y, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD failed during denoising: {exc}") from exc
    k_tilde = max(K + 1, int((s >= cfg.singular_floor_mult * math.sqrt(N)).sum()))
    if k_tilde > min(N, J):
        warnings.warn("retained rank clipped to min(N, J)", stacklevel=2)
        k_tilde = min(N, J)
    low_rank = (U[:, :k_tilde] * s[:k_tilde]) @ Vt[:k_tilde]
    clamped = family.clamp_to_range(low_rank, cfg.eps_trunc)
    return family.inverse_mean(clamped)


def _threshold(V: np.ndarray, delta: float) -> np.ndarray:
    return np.where(np.abs(V) > delta, V, 0.0)


def _solve_maybe_ridge(M: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    try:
        cond = np.linalg.cond(M)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > 1e12:
        warnings.warn(f"ridge-regularizing singular {what}", stacklevel=3)
        M = M + 1e-8 * np.trace(M) * np.eye(M.shape[0]) + 1e-12 * np.eye(M.shape[0])
    return np.linalg.solve(M, rhs)


def init_layer(Z: np.ndarray, K: int, cfg: SpectralConfig | None = None
               ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Second SVD + Varimax on a linearized matrix.

    Returns (A_hat N x K binary, B_hat J x (K+1) with intercepts first,
    G_hat J x K binary, singular values of the centered matrix).
    """
    cfg = cfg or SpectralConfig()
    Z = np.asarray(Z, dtype=float)
    N, J = Z.shape
    if K < 1 or K > min(N, J):
        raise ValidationError(f"K={K} out of range for a {N} x {J} matrix")
    zbar = Z.mean(axis=0)
    Z0 = Z - zbar[None, :]
    try:
        _, s, Vt = np.linalg.svd(Z0, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD failed on centered matrix: {exc}") from exc
    V = Vt[:K].T  # J x K
    V_rot, _ = varimax(V, cfg.varimax_max_sweeps, cfg.varimax_tol)
    V_thr = _threshold(V_rot, cfg.delta_for(J))
    flip = V_thr.sum(axis=0) < 0
    V_thr[:, flip] *= -1.0
    G_hat = (V_thr != 0).astype(int)
    gram = V_thr.T @ V_thr
    A0 = Z0 @ _solve_maybe_ridge(gram, V_thr.T, "loading gram matrix").T
    A_hat = (A0 > 0).astype(float)
    A_long = np.column_stack([np.ones(N), A_hat])
    coef = _solve_maybe_ridge(A_long.T @ A_long, A_long.T @ Z0,
                              "latent design matrix")
    slopes = coef[1:].T * G_hat  # J x K, masked
    # Re-express the column sign convention on the final slopes: a negative
    # mean column corresponds to the label-flipped latent variable.
    for k in range(K):
        if slopes[:, k].sum() < 0:
            A_hat[:, k] = 1.0 - A_hat[:, k]
            slopes[:, k] *= -1.0
    cg_placeholder = 1.0  # caller scales slopes by C_g
    intercept = zbar - slopes @ A_hat.mean(axis=0)
    B_hat = np.column_stack([intercept, slopes]) * cg_placeholder
    return A_hat, B_hat, G_hat, s.copy()


def _scale_slopes(B_hat: np.ndarray, A_hat: np.ndarray, Z: np.ndarray,
                  c_g: float) -> np.ndarray:
    slopes = B_hat[:, 1:] * c_g
    intercept = Z.mean(axis=0) - slopes @ A_hat.mean(axis=0)
    return np.column_stack([intercept, slopes])


def spectral_init(Y: Dataset, K: list[int], cfg: SpectralConfig | None = None
                  ) -> SpectralInit:
    """Full layerwise initialization of a D-latent-layer DDE."""
    cfg = cfg or SpectralConfig()
    K = [int(k) for k in K]
    if len(K) < 1:
        raise ValidationError("need at least one latent layer size")
    family = Y.family
    N = Y.N
    A_list: list[np.ndarray] = []
    B_list: list[np.ndarray] = []
    G_list: list[np.ndarray] = []
    spectra: list[np.ndarray] = []
    X = Y.Y
    fam_d = family
    for d, Kd in enumerate(K, start=1):
        if d > 1 and not np.isin(X, (0.0, 1.0)).all():
            raise ValidationError("deeper-layer input must be binary")
        Z = denoise_and_linearize(X, Kd, fam_d, cfg)
        A_hat, B_hat, G_hat, s = init_layer(Z, Kd, cfg)
        B_hat = _scale_slopes(B_hat, A_hat, Z, cfg.cg_for(fam_d))
        A_list.append(A_hat)
        B_list.append(B_hat)
        G_list.append(G_hat)
        spectra.append(s)
        X = A_hat
        fam_d = BERNOULLI
    p_hat = np.clip(A_list[-1].mean(axis=0), 1.0 / (2 * N), 1.0 - 1.0 / (2 * N))
    gamma = None
    if family.has_dispersion:
        fitted = (np.column_stack([np.ones(N), A_list[0]]) @ B_list[0].T)
        gamma = np.maximum(np.std(Y.Y - fitted, axis=0), 0.05)
    model0 = DdeModel(K=K, J=Y.J, p=p_hat, B=B_list, family=family,
                      gamma=gamma)
    return SpectralInit(model0=model0, A0=LatentAssignment(A_list),
                        G0=GraphSet(G_list), singular_values=spectra)


def select_latent_dims(Y: Dataset, D: int, cfg: SpectralConfig | None = None,
                       grid_override: list[list[int]] | None = None
                       ) -> list[int]:
    """Spectral-ratio selection of the latent sizes, layer by layer.

    Per layer the candidate grid is {ceil(K_prev/4), ..., floor(K_prev/2)}
    and the winner maximizes sigma_k / sigma_{k+1} - 1 on the centered
    spectrum of the denoised/linearized matrix (smallest k on ties).
    """
    cfg = cfg or SpectralConfig()
    if D < 1:
        raise ValidationError("D must be at least 1")
    X = Y.Y
    fam_d = Y.family
    K_prev = Y.J
    chosen: list[int] = []
    for d in range(1, D + 1):
        override = grid_override[d - 1] if grid_override else None
        if override:
            grid = sorted(int(k) for k in override)
        else:
            lo, hi = math.ceil(K_prev / 4), K_prev // 2
            if K_prev < 4 or lo > hi:
                warnings.warn(f"layer {d}: grid empty, defaulting to K=1",
                              stacklevel=2)
                grid = [1]
            else:
                grid = list(range(lo, hi + 1))
        Z = denoise_and_linearize(X, max(grid), fam_d, cfg)
        s = np.linalg.svd(Z - Z.mean(axis=0), compute_uv=False)
        best_k, best_ratio = grid[0], -np.inf
        for k in grid:
            if k >= len(s):
                continue
            denom = s[k]
            ratio = np.inf if denom <= 1e-12 * s[0] else s[k - 1] / denom - 1.0
            if ratio > best_ratio:
                best_k, best_ratio = k, ratio
        chosen.append(best_k)
        A_hat, _, _, _ = init_layer(Z, best_k, cfg)
        X = A_hat
        fam_d = BERNOULLI
        K_prev = best_k
    return chosen
