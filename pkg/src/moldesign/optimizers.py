"""Black-box maximizers over a box: GP-based BO (with PCA pre-reduction)
and a real-valued genetic algorithm.

The BO surrogate is an exact GP with a Matern 5/2 kernel; batches of 10
come from Thompson sampling on a uniform candidate cloud plus one
multi-start refinement of the expected-improvement maximizer. The GA
uses elitism, a top-30% parent pool, uniform crossover, and per-gene
uniform-resample mutation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky
from scipy.stats import norm

PENALTY_SCORE = -1000.0


class OptimizerError(Exception):
    pass


class CholeskyFailure(OptimizerError):
    pass


class DimensionMismatch(OptimizerError):
    pass


class RankDeficientWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

@dataclass
class PcaModel:
    mean: np.ndarray
    axes: np.ndarray              # (r, d), rows orthonormal
    explained_variance: np.ndarray
    explained_ratio: np.ndarray

    @property
    def r(self):
        return self.axes.shape[0]

    def project(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.mean.shape[0]:
            raise DimensionMismatch("point dim %d != model dim %d"
                                    % (z.shape[-1], self.mean.shape[0]))
        return (z - self.mean) @ self.axes.T

    def lift(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.r:
            raise DimensionMismatch("reduced dim %d != r %d" % (v.shape[-1], self.r))
        return self.mean + v @ self.axes


def pca_fit(points, target_ratio=0.999):
    """PCA by eigendecomposition of the sample covariance.

    Keeps the smallest r whose cumulative explained-variance ratio
    reaches target_ratio, capped at the data rank.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or len(x) < 2:
        raise OptimizerError("need at least 2 points for PCA")
    if not (0 < target_ratio <= 1):
        raise OptimizerError("target ratio must be in (0, 1]")
    mean = x.mean(axis=0)
    cov = np.cov(x - mean, rowvar=False, bias=False)
    cov = np.atleast_2d(cov)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.maximum(evals[order], 0.0)
    evecs = evecs[:, order]
    total = evals.sum()
    if total <= 0:
        raise OptimizerError("degenerate point cloud: zero total variance")
    ratio = evals / total
    rank = int(np.sum(evals > 1e-12 * evals[0]))
    cum = np.cumsum(ratio)
    r = int(np.searchsorted(cum, target_ratio - 1e-12) + 1)
    if r > rank:
        warnings.warn("target ratio %.4g needs rank beyond data rank %d"
                      % (target_ratio, rank), RankDeficientWarning)
        r = rank
    return PcaModel(
        mean=mean,
        axes=evecs[:, :r].T.copy(),
        explained_variance=evals[:r].copy(),
        explained_ratio=ratio[:r].copy(),
    )


# ---------------------------------------------------------------------------
# Gaussian process with Matern 5/2 kernel
# ---------------------------------------------------------------------------

def matern52(a, b, signal_var, lengthscale):
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    sq = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
          - 2.0 * a @ b.T)
    r = np.sqrt(np.maximum(sq, 0.0)) / lengthscale
    s5 = np.sqrt(5.0)
    return signal_var * (1.0 + s5 * r + 5.0 / 3.0 * r ** 2) * np.exp(-s5 * r)


@dataclass
class GpSurrogate:
    x_train: np.ndarray
    y_train: np.ndarray
    signal_var: float
    lengthscale: float
    noise_var: float
    chol: tuple = field(repr=False, default=None)
    weights: np.ndarray = field(repr=False, default=None)


def gp_fit(x, y, signal_var=1.0, lengthscale=1.0, noise_var=0.0):
    """Exact GP regression (zero prior mean) via Cholesky."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(x) < 1:
        raise OptimizerError("need at least one training point")
    k = matern52(x, x, signal_var, lengthscale)
    k[np.diag_indices_from(k)] += noise_var
    chol = None
    for jitter in (1e-8, 1e-6, 1e-4):
        try:
            chol = cho_factor(k + jitter * np.eye(len(x)), lower=True)
            break
        except np.linalg.LinAlgError:
            continue
    if chol is None:
        raise CholeskyFailure("kernel matrix not positive definite")
    weights = cho_solve(chol, y)
    return GpSurrogate(x, y, signal_var, lengthscale, noise_var, chol, weights)


def gp_posterior(s, x):
    """Posterior (mean, variance) at query points."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    kq = matern52(x, s.x_train, s.signal_var, s.lengthscale)
    mean = kq @ s.weights
    v = cho_solve(s.chol, kq.T)
    var = s.signal_var - np.sum(kq * v.T, axis=1)
    var = np.where(var < 0, 0.0, var)
    return mean, var


def default_gp_params(x, y):
    """Median-distance heuristic for kernel hyperparameters."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    signal_var = float(np.var(y))
    if signal_var <= 0:
        signal_var = 1.0
    if len(x) > 1:
        d = np.sqrt(np.maximum(
            np.sum(x * x, 1)[:, None] + np.sum(x * x, 1)[None, :] - 2 * x @ x.T,
            0.0))
        med = float(np.median(d[np.triu_indices(len(x), 1)]))
    else:
        med = 0.0
    lengthscale = med if med > 0 else 1.0
    return signal_var, lengthscale, 1e-6 * signal_var


def expected_improvement(s, x, best):
    """EI for maximization; always >= 0."""
    mean, var = gp_posterior(s, x)
    sigma = np.sqrt(var)
    ei = np.where(sigma > 1e-12,
                  _ei_closed(mean, np.maximum(sigma, 1e-12), best),
                  np.maximum(mean - best, 0.0))
    out = np.maximum(ei, 0.0)
    return out if np.ndim(x) > 1 else float(out[0])


def _ei_closed(mean, sigma, best):
    u = (mean - best) / sigma
    return (mean - best) * norm.cdf(u) + sigma * norm.pdf(u)


def _pattern_search(fn, x0, lo, hi, min_step=1e-4):
    """Derivative-free coordinate search with step halving."""
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    fx = fn(x)
    step = 0.1 * (hi - lo)
    while np.max(step) > min_step:
        improved = False
        for i in range(len(x)):
            for sgn in (1.0, -1.0):
                trial = x.copy()
                trial[i] = np.clip(trial[i] + sgn * step[i], lo[i], hi[i])
                ft = fn(trial)
                if ft > fx:
                    x, fx = trial, ft
                    improved = True
        if not improved:
            step *= 0.5
    return x, fx


def propose_batch(s, bounds, batch_size=10, rng=None, n_candidates=2048,
                  thompson_rank=64, n_restarts=20):
    """Thompson-sampled batch plus one refined EI maximizer.

    Posterior function draws are rank-limited: values are sampled jointly
    at anchor points and kriged onto the rest of the candidate cloud.
    """
    rng = rng or np.random.default_rng()
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    cloud = rng.uniform(lo, hi, size=(n_candidates, len(lo)))
    mean, _ = gp_posterior(s, cloud)

    r = min(len(s.x_train), thompson_rank, n_candidates)
    anchor_idx = rng.choice(n_candidates, size=r, replace=False)
    anchors = cloud[anchor_idx]
    mean_a, _ = gp_posterior(s, anchors)
    cov_a = _posterior_cov(s, anchors, anchors)
    cov_a[np.diag_indices_from(cov_a)] += 1e-10 * max(s.signal_var, 1.0)
    try:
        la = cholesky(cov_a, lower=True)
    except np.linalg.LinAlgError:
        la = np.diag(np.sqrt(np.maximum(np.diag(cov_a), 0.0)))
    cross = _posterior_cov(s, cloud, anchors)
    solve = np.linalg.lstsq(cov_a, cross.T, rcond=None)[0]

    picks = []
    for _ in range(batch_size):
        fa = mean_a + la @ rng.standard_normal(r)
        draw = mean + solve.T @ (fa - mean_a)
        picks.append(cloud[int(np.argmax(draw))])

    # EI refinement with multi-start pattern search
    best = float(np.max(s.y_train))
    ei_fn = lambda x: expected_improvement(s, x, best)
    ei_cloud = expected_improvement(s, cloud, best)
    starts = [cloud[int(np.argmax(ei_cloud))]]
    starts.extend(rng.uniform(lo, hi, size=(n_restarts - 1, len(lo))))
    best_x, best_ei = None, -np.inf
    for x0 in starts:
        x, v = _pattern_search(ei_fn, x0, lo, hi)
        if v > best_ei:
            best_x, best_ei = x, v
    picks.insert(0, best_x)

    batch = []
    for p in picks:
        if not any(np.array_equal(p, q) for q in batch):
            batch.append(p)
        if len(batch) == batch_size:
            break
    # top up from the cloud by EI if deduplication removed too many
    if len(batch) < batch_size:
        for i in np.argsort(ei_cloud)[::-1]:
            p = cloud[int(i)]
            if not any(np.array_equal(p, q) for q in batch):
                batch.append(p)
            if len(batch) == batch_size:
                break
    return [np.array(p) for p in batch]


def _posterior_cov(s, a, b):
    kab = matern52(a, b, s.signal_var, s.lengthscale)
    ka = matern52(a, s.x_train, s.signal_var, s.lengthscale)
    kb = matern52(b, s.x_train, s.signal_var, s.lengthscale)
    return kab - ka @ cho_solve(s.chol, kb.T)


# ---------------------------------------------------------------------------
# Genetic algorithm
# ---------------------------------------------------------------------------

@dataclass
class GaConfig:
    population_size: int = 50
    mutation_prob: float = 0.1
    crossover_prob: float = 0.5
    elite_ratio: float = 0.01
    parents_portion: float = 0.3


def ga_step(genes, fitness, bounds, rng, cfg=None):
    """One generation: elitism, parent pool, crossover, mutation."""
    cfg = cfg or GaConfig()
    genes = np.asarray(genes, dtype=float)
    fitness = np.asarray(fitness, dtype=float)
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    pop = len(genes)
    order = np.argsort(fitness, kind="stable")[::-1]
    n_elite = max(1, round(cfg.elite_ratio * pop))
    n_parents = max(2, round(cfg.parents_portion * pop))
    parents = genes[order[:n_parents]]

    out = [genes[i].copy() for i in order[:n_elite]]
    while len(out) < pop:
        ia, ib = rng.integers(0, n_parents, size=2)
        pa, pb = parents[ia], parents[ib]
        if rng.random() < cfg.crossover_prob:
            pick = rng.random(genes.shape[1]) < 0.5
            child = np.where(pick, pa, pb)
        else:
            child = pa.copy()
        mut = rng.random(genes.shape[1]) < cfg.mutation_prob
        if mut.any():
            child = np.where(mut, rng.uniform(lo, hi), child)
        out.append(child)
    return np.array(out)


# ---------------------------------------------------------------------------
# Optimization drivers
# ---------------------------------------------------------------------------

@dataclass
class RunHistory:
    points: list
    scores: list
    seed: int

    def best_so_far(self):
        return np.maximum.accumulate(self.scores)

    def __len__(self):
        return len(self.scores)


def _make_stop(stop):
    if callable(stop):
        return stop
    max_evals = int(stop)
    return lambda n_evals: n_evals >= max_evals


def run_ga(objective, bounds, n_dims, stop, seed=0, cfg=None):
    """GA maximization; history holds every objective evaluation in order."""
    cfg = cfg or GaConfig()
    stop_fn = _make_stop(stop)
    rng = np.random.default_rng(seed)
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    if lo.shape == ():
        lo = np.full(n_dims, float(lo))
        hi = np.full(n_dims, float(hi))
    history = RunHistory([], [], seed)
    genes = rng.uniform(lo, hi, size=(cfg.population_size, n_dims))
    cache = {}

    def evaluate(pop):
        fits = np.empty(len(pop))
        for i, z in enumerate(pop):
            if stop_fn(len(history)):
                return None
            key = z.tobytes()
            if key not in cache:
                cache[key] = float(objective(z))
            fits[i] = cache[key]
            history.points.append(z.copy())
            history.scores.append(fits[i])
        return fits

    while True:
        fits = evaluate(genes)
        if fits is None or stop_fn(len(history)):
            return history
        genes = ga_step(genes, fits, (lo, hi), rng, cfg)


def run_bo(objective, bounds, n_dims, stop, seed=0, n_init=10, batch_size=10,
           penalty_threshold=PENALTY_SCORE + 0.5):
    """Bayesian optimization; penalized scores are logged but kept out of
    the GP training set."""
    stop_fn = _make_stop(stop)
    rng = np.random.default_rng(seed)
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    if lo.shape == ():
        lo = np.full(n_dims, float(lo))
        hi = np.full(n_dims, float(hi))
    history = RunHistory([], [], seed)

    def evaluate(z):
        score = float(objective(z))
        history.points.append(np.asarray(z, dtype=float).copy())
        history.scores.append(score)
        return score

    for z in rng.uniform(lo, hi, size=(n_init, n_dims)):
        if stop_fn(len(history)):
            return history
        evaluate(z)

    while not stop_fn(len(history)):
        pts = np.array(history.points)
        scores = np.array(history.scores)
        ok = scores > penalty_threshold
        if ok.sum() >= 2:
            sv, ls, nv = default_gp_params(pts[ok], scores[ok])
            surrogate = gp_fit(pts[ok], scores[ok], sv, ls, nv)
            batch = propose_batch(surrogate, (lo, hi), batch_size, rng)
        else:
            batch = list(rng.uniform(lo, hi, size=(batch_size, n_dims)))
        for z in batch:
            if stop_fn(len(history)):
                return history
            evaluate(z)
    return history
