"""Alignment, accuracy metrics, information criteria, latent inference,
reconstruction, and topic metrics.

Estimated models are identified only up to per-layer relabelings of the
latent variables, so every comparison first resolves the label switching
bottom-up: a minimum-cost assignment on the squared distances between
first-layer slope columns, chained upward through the deeper layers.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import gammaln, logsumexp
from scipy.stats import chi2

from .errors import (CapacityError, ShapeError, UnsupportedFamilyError,
                     ValidationError)
from .model import (ENUM_CAP, Dataset, DdeModel, GraphSet, LatentAssignment,
                    emission_log_table, enumerate_configs, linear_predictors,
                    loglik, top_log_prior, transition_log_table)

_GIBBS_FALLBACK_SWEEPS = 500


# ---------------------------------------------------------------------------
# label alignment


def hungarian(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost assignment; ties broken by lexicographically smallest
    permutation.  Returns pi with pi[k] the column assigned to row k."""
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ShapeError("cost matrix must be square")
    if not np.isfinite(cost).all():
        raise ValidationError("cost matrix must be finite")
    K = cost.shape[0]
    rows, cols = linear_sum_assignment(cost)
    best = float(cost[rows, cols].sum())
    slack = 1e-9 * (1.0 + abs(best))
    # fix rows one at a time to the smallest column that still permits an
    # optimal completion
    pi = np.empty(K, dtype=int)
    used = np.zeros(K, dtype=bool)
    fixed_cost = 0.0
    for k in range(K):
        for c in np.flatnonzero(~used):
            rest_cols = [cc for cc in range(K) if not used[cc] and cc != c]
            rest = 0.0
            if k + 1 < K:
                sub = cost[np.ix_(range(k + 1, K), rest_cols)]
                r_i, c_i = linear_sum_assignment(sub)
                rest = float(sub[r_i, c_i].sum())
            if fixed_cost + cost[k, c] + rest <= best + slack:
                pi[k] = c
                used[c] = True
                fixed_cost += cost[k, c]
                break
        else:
            raise ValidationError("assignment refinement failed")
    return pi


@dataclass
class Alignment:
    """Per-layer permutations: perms[d-1][k] is the estimated latent index
    matched to true latent k of layer d."""

    perms: list[np.ndarray]

    def __post_init__(self):
        self.perms = [np.asarray(p, dtype=int) for p in self.perms]
        for p in self.perms:
            if sorted(p.tolist()) != list(range(p.size)):
                raise ValidationError("each alignment must be a permutation")


def _slope_cost(B_star: np.ndarray, B_hat: np.ndarray) -> np.ndarray:
    """cost[k, l] = squared L2 distance between true column k and
    estimated column l of the slope block."""
    S, H = B_star[:, 1:], B_hat[:, 1:]
    return ((S.T[:, None, :] - H.T[None, :, :]) ** 2).sum(axis=2)


def align(model_hat: DdeModel, model_star: DdeModel) -> Alignment:
    """Resolve label switching bottom-up through the layers."""
    if model_hat.K != model_star.K or model_hat.J != model_star.J:
        raise ShapeError("models must share all layer sizes")
    perms = []
    B_hat = [b.copy() for b in model_hat.B]
    for d in range(1, model_hat.D + 1):
        pi = hungarian(_slope_cost(model_star.B[d - 1], B_hat[d - 1]))
        perms.append(pi)
        B_hat[d - 1] = np.column_stack([B_hat[d - 1][:, 0],
                                        B_hat[d - 1][:, 1:][:, pi]])
        if d < model_hat.D:
            B_hat[d] = B_hat[d][pi]
    return Alignment(perms)


def apply_alignment(model_hat: DdeModel, a: Alignment) -> DdeModel:
    """Return a copy of the estimated model with latents relabeled."""
    m = model_hat.copy()
    for d in range(1, m.D + 1):
        pi = a.perms[d - 1]
        m.B[d - 1] = np.column_stack([m.B[d - 1][:, 0],
                                      m.B[d - 1][:, 1:][:, pi]])
        if d < m.D:
            m.B[d] = m.B[d][pi]
    m.p = m.p[a.perms[-1]]
    return m


def align_latents(A: LatentAssignment, a: Alignment) -> LatentAssignment:
    return LatentAssignment([A.A[d][:, a.perms[d]] for d in range(len(A.A))])


def accuracy_G(G_hat: GraphSet, G_star: GraphSet, a: Alignment) -> list[float]:
    """Per-layer entrywise agreement after alignment."""
    out = []
    for d in range(len(G_star.G)):
        g_hat = G_hat.G[d][:, a.perms[d]]
        if d > 0:
            g_hat = g_hat[a.perms[d - 1]]
        out.append(float((g_hat == G_star.G[d]).mean()))
    return out


def rmse_theta(model_hat: DdeModel, model_star: DdeModel, a: Alignment) -> float:
    """Root mean squared error over all continuous parameters after
    alignment."""
    diff = (apply_alignment(model_hat, a).theta_vector()
            - model_star.theta_vector())
    return float(np.sqrt((diff ** 2).mean()))


# ---------------------------------------------------------------------------
# information criteria and dimension selection


def ebic(model_hat: DdeModel, data: Dataset,
         loglik_value: float | None = None) -> float:
    """-2 loglik + df log N + 2 log C(|Theta|, df), df = nonzero count."""
    ll = loglik(model_hat, data) if loglik_value is None else loglik_value
    theta = model_hat.theta_vector()
    df = int(np.count_nonzero(theta))
    total = theta.size
    log_binom = (gammaln(total + 1) - gammaln(df + 1)
                 - gammaln(total - df + 1))
    return float(-2.0 * ll + df * math.log(data.N) + 2.0 * log_binom)


def _fit_for_selection(data: Dataset, K: list[int], algorithm: str,
                       penalty: str, seed: int):
    from .estimation import FitConfig, fit

    cfg = FitConfig(algorithm=algorithm, penalty=penalty, tol_scale=3.0,
                    seed=seed)
    return fit(data, K, cfg)


def lrt_select(data: Dataset, grid: list, alpha: float = 0.01,
               algorithm: str = "pem", seed: int = 0) -> list[int]:
    """Sequential likelihood-ratio tests along an ascending grid.

    Tests H0: K = grid[i] against H1: K = grid[i+1]; the first
    non-rejection wins.  Grid entries may be ints (one latent layer) or
    full K lists.
    """
    grid = [[g] if np.isscalar(g) else list(g) for g in grid]
    if len(grid) == 1:
        return grid[0]
    reports = [_fit_for_selection(data, K, algorithm, "none", seed)
               for K in grid]
    for i in range(len(grid) - 1):
        ll0, ll1 = reports[i].loglik, reports[i + 1].loglik
        df = (reports[i + 1].model.n_parameters()
              - reports[i].model.n_parameters())
        stat = max(2.0 * (ll1 - ll0), 0.0)
        if df <= 0 or stat <= chi2.ppf(1.0 - alpha, df):
            return grid[i]
    return grid[-1]


def ebic_select(data: Dataset, grid: list, algorithm: str = "pem",
                penalty: str = "hard", seed: int = 0) -> list[int]:
    """Pick the grid entry minimizing EBIC of its penalized fit."""
    grid = [[g] if np.isscalar(g) else list(g) for g in grid]
    scores = []
    for K in grid:
        rep = _fit_for_selection(data, K, algorithm, penalty, seed)
        scores.append(ebic(rep.model, data, loglik_value=rep.loglik))
    return grid[int(np.argmin(scores))]


# ---------------------------------------------------------------------------
# latent inference and reconstruction


def posterior_latents(model: DdeModel, data: Dataset,
                      seed: int = 0) -> LatentAssignment:
    """Per-row joint posterior mode over all latent layers.

    Exact max-product on the latent chain under the enumeration cap (ties
    resolved toward the lexicographically smallest configuration); above
    the cap, an approximate Gibbs majority vote with a warning.
    """
    if data.J != model.J:
        raise ShapeError("dataset and model disagree on J")
    if model.total_latent_bits() > ENUM_CAP:
        return _gibbs_majority(model, data, seed)
    cfgs = [enumerate_configs(k) for k in model.K]
    v = top_log_prior(model, cfgs[-1])
    back: list[np.ndarray] = [None] * model.D  # argmax pointers upward
    for d in range(model.D - 1, 0, -1):
        T = transition_log_table(model.B[d], cfgs[d - 1], cfgs[d])
        scores = T + v[None, :]
        back[d] = np.argmax(scores, axis=1)
        v = scores[np.arange(scores.shape[0]), back[d]]
    e = emission_log_table(data.Y, model, cfgs[0])
    idx1 = np.argmax(e + v[None, :], axis=1)
    idx = [idx1]
    for d in range(1, model.D):
        idx.append(back[d][idx[-1]])
    return LatentAssignment([cfgs[d][idx[d]] for d in range(model.D)])


def _gibbs_majority(model: DdeModel, data: Dataset,
                    seed: int) -> LatentAssignment:
    from .estimation import GibbsSampler, _sample_latents

    warnings.warn("model exceeds the enumeration cap; returning an "
                  "approximate Gibbs majority vote", stacklevel=3)
    rng = np.random.default_rng(seed)
    sampler = GibbsSampler(model, data, _sample_latents(model, data.N, rng))
    votes = [np.zeros_like(a) for a in sampler.A]
    for _ in range(_GIBBS_FALLBACK_SWEEPS):
        sampler.sweep(rng)
        for v, a in zip(votes, sampler.A):
            v += a
    half = _GIBBS_FALLBACK_SWEEPS / 2.0
    return LatentAssignment([(v > half).astype(float) for v in votes])


def reconstruct(model: DdeModel, A: LatentAssignment) -> np.ndarray:
    """Conditional mean of the observations given the first latent layer."""
    eta = linear_predictors(model.B[0], A.A[0])
    return model.family.mean(eta)


# ---------------------------------------------------------------------------
# topic-model metrics


def perplexity(model: DdeModel, data: Dataset,
               A: LatentAssignment | None = None,
               heldout_frac: float = 0.0, seed: int = 0) -> float:
    """exp of the negative mean log word-emission probability.

    With heldout_frac > 0, each document's word tokens are split at random,
    the latents are inferred from the retained part, and the criterion is
    evaluated on the held-out counts.
    """
    if model.family.kind != "poisson":
        raise UnsupportedFamilyError("perplexity requires a Poisson model")
    Y_eval = data.Y
    if heldout_frac > 0.0:
        if not 0.0 < heldout_frac < 1.0:
            raise ValidationError("heldout_frac must lie in (0, 1)")
        rng = np.random.default_rng(seed)
        Y_test = rng.binomial(data.Y.astype(int), heldout_frac).astype(float)
        Y_train = data.Y - Y_test
        A = posterior_latents(model, Dataset(Y_train, model.family), seed)
        Y_eval = Y_test
    elif A is None:
        A = posterior_latents(model, data, seed)
    eta = linear_predictors(model.B[0], A.A[0])
    log_ratio = eta - logsumexp(eta, axis=1, keepdims=True)
    total = Y_eval.sum()
    if total <= 0:
        raise ValidationError("perplexity needs a positive total word count")
    return float(np.exp(-(Y_eval * log_ratio).sum() / total))


@dataclass
class TopicMetrics:
    representatives: list[list[int]]
    neg_coherence: float
    similarity: int
    scores: np.ndarray = field(repr=False, default=None)


def topic_metrics(B1: np.ndarray, docs: np.ndarray,
                  top_m: int = 15) -> TopicMetrics:
    """Representative words, negative UMass coherence, and topic overlap.

    B1 is the first-layer coefficient matrix (intercepts in column 0);
    docs is a document-by-word count (or presence) matrix used for the
    co-document frequencies.
    """
    B1 = np.asarray(B1, dtype=float)
    slopes = B1[:, 1:]
    J, K = slopes.shape
    present = (np.asarray(docs) > 0)
    if present.shape[1] != J:
        raise ShapeError("document matrix and coefficients disagree on J")
    doc_freq = present.sum(axis=0)
    if K == 1:
        scores = np.maximum(slopes, 0.0)
    else:
        scores = np.empty_like(slopes)
        for k in range(K):
            others = np.delete(slopes, k, axis=1)
            scores[:, k] = np.maximum(slopes[:, k] - others.max(axis=1), 0.0)
    m = min(top_m, J)
    ranked = [np.argsort(-scores[:, k], kind="stable")[:m].tolist()
              for k in range(K)]
    coh_terms = []
    for words in ranked:
        usable = [w for w in words if doc_freq[w] > 0]
        if len(usable) < len(words):
            warnings.warn("words with zero document frequency excluded "
                          "from coherence", stacklevel=2)
        for i in range(1, len(usable)):
            for l in range(i):
                v1, v2 = usable[i], usable[l]
                co = float((present[:, v1] & present[:, v2]).sum())
                coh_terms.append(math.log((co + 1.0) / doc_freq[v2]))
    neg_coherence = -(sum(coh_terms) / K) if coh_terms else 0.0
    similarity = sum(len(set(a) & set(b))
                     for a, b in itertools.combinations(ranked, 2))
    return TopicMetrics(representatives=ranked, neg_coherence=neg_coherence,
                        similarity=similarity, scores=scores)
