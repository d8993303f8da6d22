"""Core model types, exact sampling, and enumerated marginal likelihood.

A deep discrete encoder (DDE) stacks D binary latent layers above a
J-dimensional observed layer.  The top layer is independent Bernoulli(p_k);
each shallower latent layer is conditionally Bernoulli through a logistic
link; the observed layer follows a single parametric family (Bernoulli,
Poisson, or Normal) through its canonical mean map.

Layer d coefficients live in a K^(d-1) x (K^(d)+1) matrix whose column 0
holds intercepts, with K^(0) = J.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, gammaln, logsumexp

from .errors import CapacityError, ShapeError, UnsupportedFamilyError, ValidationError

# Exact enumeration is limited to this many total latent bits.
ENUM_CAP = 20

_SOFTPLUS_LIM = 35.0


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + e^x), stable for large |x|."""
    x = np.asarray(x, dtype=float)
    return np.where(x > _SOFTPLUS_LIM, x, np.log1p(np.exp(np.minimum(x, _SOFTPLUS_LIM))))


@dataclass(frozen=True)
class ObservedFamily:
    """Observed-layer distribution with its canonical mean map.

    kind is one of "bernoulli", "poisson", "normal".  The mean map (mu o g)
    is logistic / exp / identity respectively; only the Normal family
    carries a dispersion parameter (the conditional standard deviation).
    """

    kind: str

    _KINDS = ("bernoulli", "poisson", "normal")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValidationError(f"unknown observed family {self.kind!r}")

    @property
    def has_dispersion(self) -> bool:
        return self.kind == "normal"

    def mean(self, eta: np.ndarray) -> np.ndarray:
        """Apply the mean map mu o g elementwise to linear predictors."""
        if self.kind == "bernoulli":
            return expit(eta)
        if self.kind == "poisson":
            return np.exp(eta)
        return np.asarray(eta, dtype=float)

    def inverse_mean(self, m: np.ndarray) -> np.ndarray:
        """Invert the mean map (logit / log / identity)."""
        m = np.asarray(m, dtype=float)
        if self.kind == "bernoulli":
            return np.log(m) - np.log1p(-m)
        if self.kind == "poisson":
            return np.log(m)
        return m

    def clamp_to_range(self, m: np.ndarray, eps: float) -> np.ndarray:
        """Truncate a denoised mean matrix into the family's sample range."""
        if self.kind == "bernoulli":
            return np.clip(m, eps, 1.0 - eps)
        if self.kind == "poisson":
            return np.maximum(m, eps)
        return m

    def sample(self, rng: np.random.Generator, eta: np.ndarray,
               gamma: np.ndarray | None) -> np.ndarray:
        mu = self.mean(eta)
        if self.kind == "bernoulli":
            return (rng.random(mu.shape) < mu).astype(float)
        if self.kind == "poisson":
            return rng.poisson(mu).astype(float)
        return mu + rng.standard_normal(mu.shape) * np.asarray(gamma)[None, :]

    def logpdf(self, y: np.ndarray, eta: np.ndarray,
               gamma: np.ndarray | None) -> np.ndarray:
        """Elementwise log density of y under linear predictor eta.

        Shapes broadcast; gamma is indexed along the last axis for Normal.
        """
        y = np.asarray(y, dtype=float)
        if self.kind == "bernoulli":
            return y * eta - softplus(eta)
        if self.kind == "poisson":
            return y * eta - np.exp(eta) - gammaln(y + 1.0)
        g = np.asarray(gamma, dtype=float)
        return (-0.5 * ((y - eta) / g) ** 2
                - np.log(g) - 0.5 * np.log(2.0 * np.pi))

    def in_sample_space(self, Y: np.ndarray) -> bool:
        if self.kind == "bernoulli":
            return bool(np.isin(Y, (0.0, 1.0)).all())
        if self.kind == "poisson":
            return bool((Y >= 0).all() and np.array_equal(Y, np.round(Y)))
        return bool(np.isfinite(Y).all())


BERNOULLI = ObservedFamily("bernoulli")
POISSON = ObservedFamily("poisson")
NORMAL = ObservedFamily("normal")


def family_from_name(name: str) -> ObservedFamily:
    return ObservedFamily(name.lower())


@dataclass
class Dataset:
    """An N x J observed-response matrix with its family metadata."""

    Y: np.ndarray
    family: ObservedFamily

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=float)
        if self.Y.ndim != 2:
            raise ShapeError("data matrix must be two-dimensional")
        if not self.family.in_sample_space(self.Y):
            raise ValidationError(
                f"data values outside the {self.family.kind} sample space")

    @property
    def N(self) -> int:
        return self.Y.shape[0]

    @property
    def J(self) -> int:
        return self.Y.shape[1]


@dataclass
class LatentAssignment:
    """Binary latent matrices A^(1), ..., A^(D), each N x K^(d)."""

    A: list[np.ndarray]

    def __post_init__(self):
        self.A = [np.asarray(a, dtype=float) for a in self.A]
        for a in self.A:
            if not np.isin(a, (0.0, 1.0)).all():
                raise ValidationError("latent entries must be 0/1")


@dataclass
class DdeModel:
    """All continuous DDE parameters plus layer sizes and family.

    B[d-1] is the layer-d coefficient matrix of shape K^(d-1) x (K^(d)+1)
    (intercepts in column 0); p has length K^(D); gamma (length J) is
    present only for families with a dispersion parameter.
    """

    K: list[int]
    J: int
    p: np.ndarray
    B: list[np.ndarray]
    family: ObservedFamily
    gamma: np.ndarray | None = None

    def __post_init__(self):
        self.K = [int(k) for k in self.K]
        self.p = np.asarray(self.p, dtype=float)
        self.B = [np.asarray(b, dtype=float) for b in self.B]
        if self.gamma is not None:
            self.gamma = np.asarray(self.gamma, dtype=float)

    @property
    def D(self) -> int:
        return len(self.K)

    def layer_sizes(self) -> list[int]:
        """[K^(0)=J, K^(1), ..., K^(D)]."""
        return [self.J] + self.K

    def validate(self, strict_monotone: bool = False) -> None:
        """Check structural invariants; raise ValidationError on failure.

        strict_monotone additionally requires positive non-intercept column
        sums (the sign-fixing assumption used by the identifiability theory).
        """
        if self.D < 1:
            raise ValidationError("at least one latent layer is required")
        sizes = self.layer_sizes()
        if len(self.B) != self.D:
            raise ShapeError("need one coefficient matrix per latent layer")
        for d in range(1, self.D + 1):
            b = self.B[d - 1]
            if b.shape != (sizes[d - 1], sizes[d] + 1):
                raise ShapeError(
                    f"layer {d} coefficients must be "
                    f"{sizes[d - 1]} x {sizes[d] + 1}, got {b.shape}")
            if not np.isfinite(b).all():
                raise ValidationError(f"layer {d} coefficients must be finite")
            if strict_monotone and (b[:, 1:].sum(axis=0) <= 0).any():
                raise ValidationError(
                    f"layer {d} has a non-positive slope column sum")
        if self.p.shape != (self.K[-1],):
            raise ShapeError("top-layer proportions must have length K^(D)")
        if ((self.p <= 0) | (self.p >= 1)).any():
            raise ValidationError("top-layer proportions must lie in (0, 1)")
        if self.family.has_dispersion:
            if self.gamma is None or self.gamma.shape != (self.J,):
                raise ShapeError("Normal models need a length-J dispersion vector")
            if (self.gamma <= 0).any():
                raise ValidationError("dispersion parameters must be positive")
        elif self.gamma is not None:
            raise ValidationError(
                f"{self.family.kind} family carries no dispersion parameter")
        if any(k2 >= k1 for k1, k2 in zip(sizes, sizes[1:])):
            warnings.warn("layer sizes do not strictly shrink upward",
                          stacklevel=2)

    def total_latent_bits(self) -> int:
        return sum(self.K)

    def n_parameters(self) -> int:
        """Total continuous parameter count |Theta|."""
        n = self.p.size + sum(b.size for b in self.B)
        if self.gamma is not None:
            n += self.gamma.size
        return n

    def theta_vector(self) -> np.ndarray:
        """All continuous parameters concatenated into one vector."""
        parts = [self.p.ravel()] + [b.ravel() for b in self.B]
        if self.gamma is not None:
            parts.append(self.gamma.ravel())
        return np.concatenate(parts)

    def copy(self) -> "DdeModel":
        return DdeModel(
            K=list(self.K), J=self.J, p=self.p.copy(),
            B=[b.copy() for b in self.B], family=self.family,
            gamma=None if self.gamma is None else self.gamma.copy())


@dataclass
class GraphSet:
    """Per-layer binary adjacency matrices read off coefficient sparsity."""

    G: list[np.ndarray]

    def __post_init__(self):
        self.G = [np.asarray(g, dtype=int) for g in self.G]


def linear_predictors(B: np.ndarray, A_parent: np.ndarray) -> np.ndarray:
    """Row-wise eta = intercept + slopes . parent bits.

    B is K_child x (K_parent+1); A_parent is N x K_parent; returns
    N x K_child.
    """
    B = np.asarray(B, dtype=float)
    A_parent = np.atleast_2d(np.asarray(A_parent, dtype=float))
    if A_parent.shape[1] != B.shape[1] - 1:
        raise ShapeError(
            f"parent has {A_parent.shape[1]} columns but coefficients "
            f"expect {B.shape[1] - 1}")
    return B[None, :, 0] + A_parent @ B[:, 1:].T


def sample(model: DdeModel, N: int, seed: int) -> tuple[Dataset, LatentAssignment]:
    """Exact top-down forward sampling, deterministic given the seed.

    Draw order is fixed: top latent layer first, then each shallower layer,
    then the observed layer, each as one row-major matrix draw.
    """
    model.validate()
    if N < 1:
        raise ValidationError("sample size must be at least 1")
    rng = np.random.default_rng(seed)
    A: list[np.ndarray | None] = [None] * model.D
    A[model.D - 1] = (rng.random((N, model.K[-1])) < model.p[None, :]).astype(float)
    for d in range(model.D - 1, 0, -1):
        prob = expit(linear_predictors(model.B[d], A[d]))
        A[d - 1] = (rng.random(prob.shape) < prob).astype(float)
    eta = linear_predictors(model.B[0], A[0])
    Y = model.family.sample(rng, eta, model.gamma)
    return Dataset(Y, model.family), LatentAssignment(list(A))


def enumerate_configs(K: int) -> np.ndarray:
    """All binary configurations of length K in lexicographic order."""
    if K > ENUM_CAP:
        raise CapacityError(f"cannot enumerate 2^{K} configurations")
    return np.array(list(itertools.product((0, 1), repeat=K)), dtype=float)


def _check_cap(model: DdeModel) -> None:
    if model.total_latent_bits() > ENUM_CAP:
        raise CapacityError(
            f"model has {model.total_latent_bits()} latent bits, above the "
            f"exact-enumeration cap of {ENUM_CAP}; use the SAEM-based tools")


def transition_log_table(B: np.ndarray, child_configs: np.ndarray,
                         parent_configs: np.ndarray) -> np.ndarray:
    """log P(child config | parent config) under the logistic layer model.

    Returns an S_child x S_parent table.
    """
    eta = B[None, :, 0] + parent_configs @ B[:, 1:].T  # S_parent x K_child
    return child_configs @ eta.T - softplus(eta).sum(axis=1)[None, :]


def emission_log_table(Y: np.ndarray, model: DdeModel,
                       configs1: np.ndarray) -> np.ndarray:
    """log P(Y_i | A^(1) = alpha) for every row i and config alpha (N x S1)."""
    eta = model.B[0][None, :, 0] + configs1 @ model.B[0][:, 1:].T  # S1 x J
    Y = np.atleast_2d(Y)
    fam = model.family
    if fam.kind == "normal":
        g = model.gamma
        const = -(np.log(g) + 0.5 * np.log(2 * np.pi)).sum()
        quad = (Y ** 2 / g[None, :] ** 2) @ np.ones(model.J)
        cross = (Y / g[None, :] ** 2) @ eta.T
        sq = ((eta ** 2) / g[None, :] ** 2).sum(axis=1)
        return const - 0.5 * (quad[:, None] - 2.0 * cross + sq[None, :])
    if fam.kind == "bernoulli":
        return Y @ eta.T - softplus(eta).sum(axis=1)[None, :]
    # Poisson
    return (Y @ eta.T - np.exp(eta).sum(axis=1)[None, :]
            - gammaln(Y + 1.0).sum(axis=1)[:, None])


def top_log_prior(model: DdeModel, configs_top: np.ndarray) -> np.ndarray:
    p = model.p
    return configs_top @ np.log(p) + (1.0 - configs_top) @ np.log1p(-p)


def first_layer_log_marginal(model: DdeModel) -> tuple[np.ndarray, np.ndarray]:
    """(configs1, log P(A^(1) = alpha)) by collapsing the latent chain."""
    _check_cap(model)
    cfgs = [enumerate_configs(k) for k in model.K]
    v = top_log_prior(model, cfgs[-1])  # over layer-D configs
    for d in range(model.D, 1, -1):
        T = transition_log_table(model.B[d - 1], cfgs[d - 2], cfgs[d - 1])
        v = logsumexp(T + v[None, :], axis=1)
    return cfgs[0], v


def marginal_logprob(model: DdeModel, y: np.ndarray) -> float:
    """log P(y) by exact marginalization over all latent configurations."""
    y = np.asarray(y, dtype=float).reshape(1, -1)
    if y.shape[1] != model.J:
        raise ShapeError(f"observation has {y.shape[1]} entries, expected {model.J}")
    configs1, logpa = first_layer_log_marginal(model)
    e = emission_log_table(y, model, configs1)
    return float(logsumexp(e[0] + logpa))


def loglik(model: DdeModel, data: Dataset) -> float:
    """Marginal log-likelihood of a dataset (sum over rows)."""
    if data.J != model.J:
        raise ShapeError("dataset and model disagree on J")
    configs1, logpa = first_layer_log_marginal(model)
    e = emission_log_table(data.Y, model, configs1)
    return float(logsumexp(e + logpa[None, :], axis=1).sum())


def row_logliks(model: DdeModel, data: Dataset) -> np.ndarray:
    configs1, logpa = first_layer_log_marginal(model)
    e = emission_log_table(data.Y, model, configs1)
    return logsumexp(e + logpa[None, :], axis=1)


def graphs_from_coefficients(model: DdeModel, tol: float = 0.0) -> GraphSet:
    """Read the sparsity pattern of the slope coefficients.

    Estimation produces exact zeros, so the default tolerance is 0; models
    loaded from files may pass a small tol instead.
    """
    return GraphSet([(np.abs(b[:, 1:]) > tol).astype(int) for b in model.B])
