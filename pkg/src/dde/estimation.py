"""Penalized EM and stochastic-approximation EM for deep discrete encoders.

Both algorithms share the same penalized M-step, built from per-row GLM
problems over parent-configuration sufficient statistics:

* PEM computes exact posterior statistics by collapsing the latent chain
  (feasible while the total latent bit count stays under the enumeration
  cap) and stops when the marginal log-likelihood stabilizes.
* SAEM replaces the E-step with Gibbs sweeps through the complete
  conditionals and averages the sufficient statistics with Robbins-Monro
  weight 1/t, so it scales past the enumeration cap.

Sparsity is induced on slope coefficients only, via either a truncated-L1
penalty (solved exactly by an active-set subset search for small rows) or
hard thresholding of the unpenalized row optimum followed by a refit on
the surviving support.
"""

from __future__ import annotations

import itertools
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

from .errors import CapacityError, NumericError, ValidationError
from .model import (ENUM_CAP, Dataset, DdeModel, GraphSet, LatentAssignment,
                    emission_log_table, enumerate_configs,
                    graphs_from_coefficients, linear_predictors, loglik,
                    softplus, top_log_prior, transition_log_table)
from .spectral import SpectralInit, spectral_init

_BOX = 15.0           # box bound on every coefficient during row solves
_TLP_MAX_DIM = 12     # exact subset search only up to this many slopes
_DENSE_MAX_BITS = 12  # dense sufficient-statistic tables up to 2^12 configs


# ---------------------------------------------------------------------------
# tuning defaults and penalty values


def default_lambda(N: int) -> float:
    return float(N) ** 0.25


def default_tau(N: int) -> float:
    return max(3.0 * float(N) ** (-0.3), 0.3)


def tuning_grid(N: int) -> tuple[list[float], list[float]]:
    """(lambda choices, tau choices) for the data-driven grid."""
    lams = [float(N) ** (e / 8.0) for e in (1, 2, 3)]
    taus = [2.0 * float(N) ** (-e / 8.0) for e in (1, 2, 3)]
    return lams, taus


def penalty_value(slopes: np.ndarray, penalty: str, lam: float,
                  tau: float) -> float:
    """Penalty mass of one slope block."""
    s = np.abs(np.asarray(slopes, dtype=float))
    if penalty == "none":
        return 0.0
    if penalty == "tlp":
        return float(lam * np.minimum(s, tau).sum())
    if penalty == "hard":
        return float(0.5 * tau ** 2 * np.count_nonzero(s))
    raise ValidationError(f"unknown penalty {penalty!r}")


def penalized_loglik(model: DdeModel, data: Dataset, penalty: str,
                     lam: float | list[float], tau: float) -> float:
    """Exact marginal log-likelihood minus the total slope penalty."""
    lams = _per_layer(lam, model.D)
    pen = sum(penalty_value(b[:, 1:], penalty, l, tau)
              for b, l in zip(model.B, lams))
    return loglik(model, data) - pen


def _per_layer(lam: float | list[float], D: int) -> list[float]:
    if np.isscalar(lam):
        return [float(lam)] * D
    lam = [float(v) for v in lam]
    if len(lam) != D:
        raise ValidationError(f"need one lambda per layer, got {len(lam)}")
    return lam


# ---------------------------------------------------------------------------
# configuration / report containers


@dataclass
class FitConfig:
    """Knobs for a single penalized fit.

    lam / tau default to N^(1/4) and max(3 N^(-0.3), 0.3) at fit time.
    tol_scale loosens the stopping rule (used during model selection).
    """

    algorithm: str = "saem"
    penalty: str = "hard"
    lam: float | list[float] | None = None
    tau: float | None = None
    max_iter: int = 0          # 0 = per-algorithm default
    min_iter: int = 80
    step_decay: float = 0.6
    tol_scale: float = 1.0
    gibbs_sweeps: int = 1
    init: str = "spectral"
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ("pem", "saem"):
            raise ValidationError(f"unknown algorithm {self.algorithm!r}")
        if self.penalty not in ("tlp", "hard", "none"):
            raise ValidationError(f"unknown penalty {self.penalty!r}")
        if self.init not in ("spectral", "random"):
            raise ValidationError(f"unknown init scheme {self.init!r}")

    def resolved(self, N: int, D: int) -> tuple[list[float], float, int]:
        lam = default_lambda(N) if self.lam is None else self.lam
        tau = default_tau(N) if self.tau is None else float(self.tau)
        iters = self.max_iter or (200 if self.algorithm == "pem" else 120)
        return _per_layer(lam, D), tau, iters


@dataclass
class FitReport:
    """A fitted model with its estimation trace."""

    model: DdeModel
    graphs: GraphSet
    loglik: float | None
    trace: list[float] = field(default_factory=list)
    converged: bool = False
    n_iter: int = 0
    algorithm: str = ""
    seconds: float = 0.0
    latents: LatentAssignment | None = None


# ---------------------------------------------------------------------------
# per-row penalized M-step


def _q_glm(eta: np.ndarray, W: np.ndarray, c: np.ndarray, kind: str) -> float:
    if kind == "bernoulli":
        return float(c @ eta - W @ softplus(eta))
    return float(c @ eta - W @ np.exp(np.minimum(eta, 30.0)))


def _newton_glm(X: np.ndarray, W: np.ndarray, c: np.ndarray, kind: str,
                b0: np.ndarray) -> np.ndarray:
    """Damped Newton ascent of a weighted GLM row, box-bounded at +-15."""
    b = np.clip(b0, -_BOX, _BOX)
    scale = max(1.0, float(W.sum()))
    for _ in range(60):
        eta = X @ b
        if kind == "bernoulli":
            mu = expit(eta)
            w = W * mu * (1.0 - mu)
        else:
            mu = np.exp(np.minimum(eta, 30.0))
            w = W * mu
        grad = X.T @ (c - W * mu)
        if np.abs(grad).max() < 1e-9 * scale:
            break
        H = X.T @ (X * w[:, None]) + 1e-10 * np.eye(X.shape[1])
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = grad / max(w.sum(), 1e-10)
        q0 = _q_glm(eta, W, c, kind)
        t = 1.0
        while t >= 1e-4:
            cand = np.clip(b + t * step, -_BOX, _BOX)
            if _q_glm(X @ cand, W, c, kind) >= q0:
                break
            t *= 0.5
        else:
            break
        b = np.clip(b + t * step, -_BOX, _BOX)
    return b


def _solve_support_glm(P: np.ndarray, W: np.ndarray, c: np.ndarray, kind: str,
                       support: np.ndarray, b_init: np.ndarray) -> np.ndarray:
    """Row optimum with inactive slopes pinned at zero."""
    cols = np.concatenate([[0], 1 + np.flatnonzero(support)])
    X = np.column_stack([np.ones(P.shape[0]), P])[:, cols]
    b_sub = _newton_glm(X, W, c, kind, b_init[cols])
    b = np.zeros(b_init.size)
    b[cols] = b_sub
    return b


def _solve_support_normal(P: np.ndarray, W: np.ndarray, sy: np.ndarray,
                          syy: float, support: np.ndarray
                          ) -> tuple[np.ndarray, float]:
    """Weighted least squares on a support; returns (row, residual SS)."""
    cols = np.concatenate([[0], 1 + np.flatnonzero(support)])
    X = np.column_stack([np.ones(P.shape[0]), P])[:, cols]
    G = X.T @ (X * W[:, None])
    rhs = X.T @ sy
    try:
        b_sub = np.linalg.solve(G + 1e-10 * np.eye(G.shape[0]), rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular normal equations: {exc}") from exc
    b = np.zeros(P.shape[1] + 1)
    b[cols] = b_sub
    rss = float(syy - b_sub @ rhs)
    return b, max(rss, 0.0)


def mstep_row(P: np.ndarray, W: np.ndarray, c: np.ndarray, kind: str,
              penalty: str, lam: float, tau: float, b_init: np.ndarray,
              syy: float | None = None, N: float | None = None
              ) -> tuple[np.ndarray, float | None]:
    """Penalized maximization of one child row.

    P is the S x K parent-configuration matrix, W the posterior (or
    averaged) config weights, c the matching child sums.  For the Normal
    kind, syy = sum of squared responses and N the sample size; the
    second return value is then the updated dispersion.
    """
    K = P.shape[1]
    full = np.ones(K, dtype=bool)

    def solve(support):
        if kind == "normal":
            return _solve_support_normal(P, W, c, syy, support)
        return _solve_support_glm(P, W, c, kind, support, b_init), None

    def q_of(b, rss):
        if kind == "normal":
            return -0.5 * N * math.log(max(rss, 1e-12) / N)
        eta = b[0] + P @ b[1:]
        return _q_glm(eta, W, c, kind)

    b_full, rss_full = solve(full)
    if penalty == "none":
        gamma = math.sqrt(max(rss_full, 1e-12) / N) if kind == "normal" else None
        return b_full, gamma
    if penalty == "hard":
        support = np.abs(b_full[1:]) > tau
        b, rss = solve(support)
        gamma = math.sqrt(max(rss, 1e-12) / N) if kind == "normal" else None
        return b, gamma
    # truncated-L1: exact search over active sets for small rows
    if K > _TLP_MAX_DIM:
        warnings.warn(
            f"row dimension {K} exceeds the exact TLP search cap; "
            "falling back to hard thresholding", stacklevel=2)
        return mstep_row(P, W, c, kind, "hard", lam, tau, b_init, syy, N)
    best_b, best_rss, best_obj = None, None, -np.inf
    for bits in itertools.product((False, True), repeat=K):
        support = np.array(bits)
        b, rss = solve(support)
        obj = q_of(b, rss) - lam * np.minimum(np.abs(b[1:]), tau).sum()
        if obj > best_obj + 1e-10:
            best_b, best_rss, best_obj = b, rss, obj
    gamma = (math.sqrt(max(best_rss, 1e-12) / N)
             if kind == "normal" else None)
    return best_b, gamma


def _mstep_layer(model: DdeModel, d: int, P: np.ndarray, W: np.ndarray,
                 C: np.ndarray, lam: float, tau: float, penalty: str,
                 N: int, SYY: np.ndarray | None) -> None:
    """Update the layer-d coefficient rows (and gamma for layer 1) in place."""
    kind = model.family.kind if d == 1 else "bernoulli"
    B = model.B[d - 1]
    gamma_new = None if kind != "normal" else np.empty(model.J)
    for j in range(B.shape[0]):
        syy_j = None if SYY is None else float(SYY[j])
        b, g = mstep_row(P, W, C[:, j], kind, penalty, lam, tau,
                         B[j].copy(), syy=syy_j, N=float(N))
        B[j] = b
        if g is not None:
            gamma_new[j] = max(g, 1e-3)
    if gamma_new is not None:
        model.gamma = gamma_new


# ---------------------------------------------------------------------------
# PEM: exact E-step by collapsing the chain


def _pem_estep(model: DdeModel, data: Dataset):
    """Exact posterior sufficient statistics and the marginal log-likelihood.

    Returns (ll, stats) where stats[d-1] = (configs_d, W_d, C_d) pairs the
    layer-d parent configurations with their posterior weights and expected
    child sums; the chain structure lets every cross-layer table factorize
    through the per-row upward messages.
    """
    cfgs = [enumerate_configs(k) for k in model.K]
    T = [transition_log_table(model.B[d], cfgs[d - 1], cfgs[d])
         for d in range(1, model.D)]
    g = [None] * model.D
    g[-1] = top_log_prior(model, cfgs[-1])
    for d in range(model.D - 1, 0, -1):
        g[d - 1] = logsumexp(T[d - 1] + g[d][None, :], axis=1)

    f = emission_log_table(data.Y, model, cfgs[0])     # N x S_1
    ll_rows = logsumexp(f + g[0][None, :], axis=1)
    ll = float(ll_rows.sum())

    stats = []
    # layer 1: posterior over its own configurations, children = observations
    post1 = np.exp(f + g[0][None, :] - ll_rows[:, None])
    W1 = post1.sum(axis=0)
    C1 = post1.T @ data.Y
    stats.append((cfgs[0], W1, C1))
    # deeper layers: pairwise tables factorize through u = sum_i e^{f - ll}
    for d in range(2, model.D + 1):
        u = np.exp(f - ll_rows[:, None]).sum(axis=0)    # over S_{d-1}
        M = u[:, None] * np.exp(T[d - 2] + g[d - 1][None, :])
        W = M.sum(axis=0)
        C = M.T @ cfgs[d - 2]
        stats.append((cfgs[d - 1], W, C))
        if d < model.D:
            f = logsumexp(f[:, :, None] + T[d - 2][None, :, :], axis=1)
    # top-layer weights for the proportion update
    top_cfgs, W_top, _ = stats[-1]
    if model.D == 1:
        W_top = W1
        top_cfgs = cfgs[0]
    p_new = (W_top @ top_cfgs) / data.N
    return ll, stats, p_new


def pem_fit(data: Dataset, model0: DdeModel, config: FitConfig | None = None
            ) -> FitReport:
    """Penalized EM with exact E-steps.  Needs sum(K) within the cap."""
    config = config or FitConfig(algorithm="pem")
    t0 = time.perf_counter()
    model = model0.copy()
    model.validate()
    N = data.N
    lams, tau, max_iter = config.resolved(N, model.D)
    tol = N / 25000.0 * config.tol_scale
    SYY = (data.Y ** 2).sum(axis=0) if model.family.kind == "normal" else None
    trace: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        ll, stats, p_new = _pem_estep(model, data)
        trace.append(ll)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
        model.p = np.clip(p_new, 1.0 / (2 * N), 1.0 - 1.0 / (2 * N))
        for d in range(1, model.D + 1):
            P, W, C = stats[d - 1]
            _mstep_layer(model, d, P, W, C, lams[d - 1], tau, config.penalty,
                         N, SYY if d == 1 else None)
    final_ll = loglik(model, data)
    return FitReport(model=model, graphs=graphs_from_coefficients(model),
                     loglik=final_ll, trace=trace, converged=converged,
                     n_iter=it, algorithm="pem",
                     seconds=time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Gibbs sampling of the complete conditionals


class GibbsSampler:
    """Systematic-scan Gibbs over all latent bits, vectorized across rows.

    Scan order is deepest layer first and ascending coordinates within a
    layer; per-layer linear predictors toward the children are maintained
    incrementally so one sweep costs O(N * sum_d K^(d) K^(d-1)).
    """

    def __init__(self, model: DdeModel, data: Dataset,
                 A: LatentAssignment | list[np.ndarray]):
        self.model = model
        self.Y = data.Y
        self.A = [np.array(a, dtype=float, copy=True)
                  for a in (A.A if isinstance(A, LatentAssignment) else A)]
        if len(self.A) != model.D:
            raise ValidationError("need one latent matrix per layer")
        self.refresh()

    def refresh(self) -> None:
        """Recompute the cached child linear predictors from scratch."""
        self.eta = [linear_predictors(self.model.B[d], self.A[d])
                    for d in range(self.model.D)]

    def set_model(self, model: DdeModel) -> None:
        self.model = model
        self.refresh()

    def _child_delta(self, d: int, eta0: np.ndarray, eta1: np.ndarray
                     ) -> np.ndarray:
        """Row-wise log-likelihood gain of the children when the bit is 1."""
        X = self.Y if d == 1 else self.A[d - 2]
        if d == 1 and self.model.family.kind == "normal":
            g = self.model.gamma[None, :]
            return (0.5 * (((X - eta0) / g) ** 2
                           - ((X - eta1) / g) ** 2)).sum(axis=1)
        if d == 1 and self.model.family.kind == "poisson":
            return (X * (eta1 - eta0)
                    - np.exp(np.minimum(eta1, 30.0))
                    + np.exp(np.minimum(eta0, 30.0))).sum(axis=1)
        return (X * (eta1 - eta0) - softplus(eta1)
                + softplus(eta0)).sum(axis=1)

    def sweep(self, rng: np.random.Generator) -> None:
        model = self.model
        for d in range(model.D, 0, -1):
            A_d = self.A[d - 1]
            for k in range(model.K[d - 1]):
                slope = model.B[d - 1][:, 1 + k]
                cur = A_d[:, k]
                eta0 = self.eta[d - 1] - cur[:, None] * slope[None, :]
                eta1 = eta0 + slope[None, :]
                if d == model.D:
                    p_k = model.p[k]
                    prior = math.log(p_k) - math.log1p(-p_k)
                else:
                    prior = self.eta[d][:, k]
                logit = prior + self._child_delta(d, eta0, eta1)
                new = (rng.random(A_d.shape[0]) < expit(logit)).astype(float)
                changed = new != cur
                if changed.any():
                    A_d[:, k] = new
                    self.eta[d - 1][changed] = np.where(
                        new[changed, None] > 0, eta1[changed], eta0[changed])

    def latents(self) -> LatentAssignment:
        return LatentAssignment([a.copy() for a in self.A])


def gibbs_sweep(model: DdeModel, data: Dataset, A: LatentAssignment,
                rng: np.random.Generator, n_sweeps: int = 1
                ) -> LatentAssignment:
    """Run n_sweeps full systematic scans and return the new latents."""
    sampler = GibbsSampler(model, data, A)
    for _ in range(n_sweeps):
        sampler.sweep(rng)
    return sampler.latents()


# ---------------------------------------------------------------------------
# SAEM: averaged sufficient statistics


class _LayerStats:
    """Running parent-config table (weight, child sums) for one layer.

    Dense (indexed by the config integer) up to 2^12 parent configurations,
    sparse dict-of-rows beyond that.
    """

    def __init__(self, K_parent: int, K_child: int):
        self.K = K_parent
        self.Kc = K_child
        self.dense = K_parent <= _DENSE_MAX_BITS
        if self.dense:
            S = 1 << K_parent
            self.W = np.zeros(S)
            self.C = np.zeros((S, K_child))
        else:
            self.table: dict[bytes, np.ndarray] = {}
        self._weights = 2 ** np.arange(K_parent - 1, -1, -1)

    def update(self, theta: float, A_parent: np.ndarray,
               X_child: np.ndarray) -> None:
        if self.dense:
            idx = (A_parent @ self._weights).astype(int)
            W_new = np.bincount(idx, minlength=self.W.size).astype(float)
            C_new = np.zeros_like(self.C)
            np.add.at(C_new, idx, X_child)
            self.W *= 1.0 - theta
            self.W += theta * W_new
            self.C *= 1.0 - theta
            self.C += theta * C_new
            return
        for row in self.table.values():
            row *= 1.0 - theta
        u, inv = np.unique(A_parent.astype(np.uint8), axis=0,
                           return_inverse=True)
        sums = np.zeros((u.shape[0], self.Kc))
        np.add.at(sums, inv, X_child)
        counts = np.bincount(inv, minlength=u.shape[0]).astype(float)
        for s in range(u.shape[0]):
            key = u[s].tobytes()
            row = self.table.setdefault(key, np.zeros(1 + self.Kc))
            row[0] += theta * counts[s]
            row[1:] += theta * sums[s]

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(configs, weights, child sums) over configs with positive mass."""
        if self.dense:
            keep = np.flatnonzero(self.W > 1e-12)
            bits = (keep[:, None] >> np.arange(self.K - 1, -1, -1)) & 1
            return bits.astype(float), self.W[keep], self.C[keep]
        keys = sorted(self.table)
        P = np.array([np.frombuffer(k, dtype=np.uint8) for k in keys],
                     dtype=float)
        rows = np.array([self.table[k] for k in keys])
        return P, rows[:, 0], rows[:, 1:]


def saem_fit(data: Dataset, model0: DdeModel, A0: LatentAssignment,
             config: FitConfig | None = None) -> FitReport:
    """Stochastic-approximation EM with Gibbs E-steps."""
    config = config or FitConfig(algorithm="saem")
    t0 = time.perf_counter()
    model = model0.copy()
    model.validate()
    N = data.N
    lams, tau, max_iter = config.resolved(N, model.D)
    sizes = model.layer_sizes()
    SYY = (data.Y ** 2).sum(axis=0) if model.family.kind == "normal" else None
    rng = np.random.default_rng(config.seed)
    sampler = GibbsSampler(model, data, A0)
    stats = [_LayerStats(sizes[d], sizes[d - 1]) for d in range(1, model.D + 1)]
    p_bar = np.zeros(model.K[-1])
    tol = model.K[-1] / 2.0 * config.tol_scale
    trace: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        for _ in range(config.gibbs_sweeps):
            sampler.sweep(rng)
        # polynomial Robbins-Monro steps: forget the rough start quickly
        # while still averaging out the Gibbs noise
        theta_t = float(it) ** (-config.step_decay)
        for d in range(1, model.D + 1):
            X = data.Y if d == 1 else sampler.A[d - 2]
            stats[d - 1].update(theta_t, sampler.A[d - 1], X)
        p_bar = (1.0 - theta_t) * p_bar + theta_t * sampler.A[-1].mean(axis=0)

        theta_old = model.theta_vector()
        model.p = np.clip(p_bar, 1.0 / (2 * N), 1.0 - 1.0 / (2 * N))
        for d in range(1, model.D + 1):
            P, W, C = stats[d - 1].arrays()
            _mstep_layer(model, d, P, W, C, lams[d - 1], tau, config.penalty,
                         N, SYY if d == 1 else None)
        sampler.set_model(model)
        delta = float(np.linalg.norm(model.theta_vector() - theta_old))
        trace.append(delta)
        if it >= config.min_iter and delta < tol:
            converged = True
            break
    final_ll = (loglik(model, data)
                if model.total_latent_bits() <= ENUM_CAP else None)
    return FitReport(model=model, graphs=graphs_from_coefficients(model),
                     loglik=final_ll, trace=trace, converged=converged,
                     n_iter=it, algorithm="saem",
                     seconds=time.perf_counter() - t0,
                     latents=sampler.latents())


# ---------------------------------------------------------------------------
# initialization helpers and the one-call front end


def _sample_latents(model: DdeModel, N: int,
                    rng: np.random.Generator) -> LatentAssignment:
    A: list[np.ndarray | None] = [None] * model.D
    A[-1] = (rng.random((N, model.K[-1])) < model.p[None, :]).astype(float)
    for d in range(model.D - 1, 0, -1):
        prob = expit(linear_predictors(model.B[d], A[d]))
        A[d - 1] = (rng.random(prob.shape) < prob).astype(float)
    return LatentAssignment([a for a in A])


def random_init(data: Dataset, K: list[int], seed: int
                ) -> tuple[DdeModel, LatentAssignment]:
    """Dense uniform starting values: slopes U(0,1), intercepts U(-1,0),
    proportions U(0,1), dispersions U(0.5,1.5)."""
    rng = np.random.default_rng(seed)
    sizes = [data.J] + [int(k) for k in K]
    B = []
    for d in range(1, len(sizes)):
        b = np.empty((sizes[d - 1], sizes[d] + 1))
        b[:, 0] = rng.uniform(-1.0, 0.0, size=sizes[d - 1])
        b[:, 1:] = rng.uniform(0.0, 1.0, size=(sizes[d - 1], sizes[d]))
        B.append(b)
    N = data.N
    p = np.clip(rng.uniform(0.0, 1.0, size=sizes[-1]),
                1.0 / (2 * N), 1.0 - 1.0 / (2 * N))
    gamma = (rng.uniform(0.5, 1.5, size=data.J)
             if data.family.has_dispersion else None)
    model = DdeModel(K=list(K), J=data.J, p=p, B=B, family=data.family,
                     gamma=gamma)
    A = _sample_latents(model, N, rng)
    return model, A


def fit(data: Dataset, K: list[int], config: FitConfig | None = None,
        init: SpectralInit | tuple[DdeModel, LatentAssignment] | None = None
        ) -> FitReport:
    """Initialize (spectrally unless told otherwise) and run PEM or SAEM."""
    config = config or FitConfig()
    if init is None:
        if config.init == "random":
            init = random_init(data, K, config.seed + 1)
        else:
            init = spectral_init(data, K)
    if isinstance(init, SpectralInit):
        model0, A0 = init.model0, init.A0
    else:
        model0, A0 = init
    if config.algorithm == "pem":
        if sum(model0.K) > ENUM_CAP:
            raise CapacityError("PEM needs sum(K) within the enumeration cap")
        return pem_fit(data, model0, config)
    return saem_fit(data, model0, A0, config)


def grid_fit(data: Dataset, K: list[int], config: FitConfig | None = None,
             per_layer: bool = False) -> tuple[FitReport, dict]:
    """Fit over the (lambda, tau) tuning grid and keep the lowest EBIC.

    per_layer crosses the lambda choices independently across layers
    (3^D x 3 fits) instead of sharing one lambda (3 x 3 fits).
    """
    from .evaluation import ebic  # local import to avoid a cycle

    config = config or FitConfig()
    lams, taus = tuning_grid(data.N)
    D = len(K)
    lam_choices = (itertools.product(lams, repeat=D) if per_layer
                   else [(l,) * D for l in lams])
    base_init = (spectral_init(data, K) if config.init == "spectral"
                 else random_init(data, K, config.seed + 1))
    best, best_score, best_tuning = None, np.inf, {}
    for lam_vec in lam_choices:
        for tau in taus:
            cfg = FitConfig(
                algorithm=config.algorithm, penalty=config.penalty,
                lam=list(lam_vec), tau=tau, max_iter=config.max_iter,
                min_iter=config.min_iter, tol_scale=config.tol_scale,
                gibbs_sweeps=config.gibbs_sweeps, init=config.init,
                seed=config.seed)
            rep = fit(data, K, cfg, init=base_init)
            score = ebic(rep.model, data, loglik_value=rep.loglik)
            if score < best_score:
                best, best_score = rep, score
                best_tuning = {"lam": list(lam_vec), "tau": tau,
                               "ebic": float(score)}
    return best, best_tuning
