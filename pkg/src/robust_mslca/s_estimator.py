"""S-estimation of multivariate location and scatter.

The S-estimate is the pair ``(mu, V)`` minimizing ``det(V)`` subject to

    mean_i xi(||V^{-1/2}(x_i - mu)||) = b0.

It is computed fast-S style: elementary subsets of ``q + 1`` rows seed
candidates, each candidate gets a couple of reweighting steps, and the
candidates with the smallest determinants are iterated to convergence.
All candidates are carried as stacked arrays, so one call does the work of
every candidate at once.
"""

from dataclasses import dataclass

import numpy as np

from .blocks import BlockStructure
from .exceptions import (DegenerateDataError, EmptyWeightError, InputError, ScaleError,
                         SingularScatterError)
from .loss import psi_over_t, xi

COND_MAX = 1e14
BATCH_ELEMENTS = 3_000_000


@dataclass(frozen=True)
class Dataset:
    """Observations as an ``(n, q)`` array plus an optional block partition."""

    rows: np.ndarray
    blocks: BlockStructure = None

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float, ndmin=2)
        if rows.ndim != 2:
            raise InputError("rows must be a 2-d array")
        if not np.all(np.isfinite(rows)):
            raise InputError("rows contain NaN or infinite values")
        if self.blocks is not None and self.blocks.q != rows.shape[1]:
            raise InputError(f"blocks sum to {self.blocks.q} but rows have "
                             f"{rows.shape[1]} columns")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def q(self):
        return self.rows.shape[1]


@dataclass(frozen=True)
class SConfig:
    n_subsamples: int = 500
    max_refinement_iters: int = 200
    tol: float = 1e-9
    seed: int = 0
    keep_best: int = 10
    initial_steps: int = 2

    def __post_init__(self):
        for name in ("n_subsamples", "max_refinement_iters", "keep_best"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be positive")
        if not self.tol > 0:
            raise InputError("tol must be positive")


@dataclass(frozen=True)
class SEstimate:
    mu: np.ndarray
    V: np.ndarray
    det: float
    log_det: float
    iterations: int
    converged: bool
    constraint_residual: float


def as_rows(data):
    """The ``(n, q)`` array behind a :class:`Dataset` or array-like."""
    if isinstance(data, Dataset):
        return data.rows
    return Dataset(data).rows


def _weights(n, weights):
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or not w.sum() > 0:
        raise InputError("weights must be nonnegative with positive sum, one per row")
    return w / w.sum()


def _check_spd(G):
    """Raise if any matrix in the stack ``G`` is numerically singular."""
    ev = np.linalg.eigvalsh(G)
    bad = (ev[..., 0] <= 0) | (ev[..., -1] > COND_MAX * ev[..., 0])
    if np.any(bad):
        raise SingularScatterError("scatter matrix is numerically singular")


def _sq_distances(X, mu, G):
    """Squared Mahalanobis distances for stacked ``mu (m, q)`` and ``G (m, q, q)``."""
    Linv_t = np.swapaxes(np.linalg.inv(np.linalg.cholesky(G)), 1, 2)
    z = np.matmul(X, Linv_t) - np.matmul(mu[:, None, :], Linv_t)
    return np.square(z).sum(axis=2)


def mahalanobis_distances(data, mu, G):
    """Distances ``||G^{-1/2}(x_i - mu)||`` via a Cholesky factor of ``G``."""
    X = as_rows(data)
    mu = np.asarray(mu, dtype=float).reshape(1, -1)
    G = np.asarray(G, dtype=float)[None]
    if mu.shape[1] != X.shape[1] or G.shape[1:] != (X.shape[1],) * 2:
        raise InputError("dimension mismatch between data, mu and G")
    _check_spd(G)
    return np.sqrt(_sq_distances(X, mu, G)[0])


def _solve_scales(d2, w, spec, maxiter=200):
    """Scales ``s`` with ``sum_i w_i xi(sqrt(d2_i / s)) = b0``, one per row of ``d2``.

    Safeguarded Newton in ``log s``. The bracket follows from
    ``xi(t) <= t^2/2`` (upper end) and from pushing every positive distance
    past the cutoff (lower end).
    """
    b0, c = spec.b0, spec.cutoff
    pos = d2 > 0
    w_pos = pos @ w
    if np.any(w_pos == 0):
        raise DegenerateDataError("all observations coincide with the location")
    if np.any(w_pos * spec.xi_max < b0 * (1 + 1e-12)):
        raise ScaleError("too much mass at the location: the constraint cannot be met")
    d2_min = np.where(pos, d2, np.inf).min(axis=1)
    lo = np.log(d2_min / c ** 2)
    hi = np.log((d2 @ w) / (2 * b0))
    hi = np.maximum(hi, lo)
    u = 0.5 * (lo + hi)
    c2 = c * c
    for _ in range(maxiter):
        # v = t^2/c^2 clipped at 1, so psi(t) t = c^2 v (1 - v)^2 vanishes past c
        v = np.minimum(d2 * (np.exp(-u) / c2)[:, None], 1.0)
        r = 1.0 - v
        r2 = r * r
        f = (c2 / 6.0) * (1.0 - (r2 * r) @ w) - b0
        fp = -0.5 * c2 * ((v * r2) @ w)
        done = np.abs(f) <= 1e-15 * b0
        lo = np.where(f > 0, u, lo)
        hi = np.where(f <= 0, u, hi)
        if np.all(done | (hi - lo < 1e-15 * np.maximum(1.0, np.abs(u)))):
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            step = u - f / fp
        ok = np.isfinite(step) & (step > lo) & (step < hi)
        u = np.where(done, u, np.where(ok, step, 0.5 * (lo + hi)))
    else:
        raise ScaleError("scale root-finding did not converge")
    return np.exp(u)


def constraint_scale(data, mu, G, spec, weights=None):
    """Factor ``s`` making ``s * G`` satisfy the S-constraint with equality."""
    X = as_rows(data)
    d = mahalanobis_distances(X, mu, G)
    return float(_solve_scales((d * d)[None], _weights(len(X), weights), spec)[0])


def _step(X, w, mu, G, spec):
    """One reweighting step for stacked candidates; returns (mu, G, log det)."""
    d = np.sqrt(_sq_distances(X, mu, G))
    u = psi_over_t(d, spec) * w
    tot = u.sum(axis=1)
    if np.any(tot <= 0):
        raise EmptyWeightError("every observation lies beyond the cutoff")
    mu_new = (u @ X) / tot[:, None]
    diff = X[None, :, :] - mu_new[:, None, :]
    G_new = np.matmul(np.swapaxes(diff * u[:, :, None], 1, 2), diff)
    G_new = 0.5 * (G_new + np.swapaxes(G_new, 1, 2))
    try:
        _check_spd(G_new)
    except SingularScatterError as exc:
        raise SingularScatterError("reweighted scatter is singular") from exc
    s = _solve_scales(_sq_distances(X, mu_new, G_new), w, spec)
    G_new = G_new * s[:, None, None]
    return mu_new, G_new, np.linalg.slogdet(G_new)[1]


def refinement_step(data, mu, G, spec, weights=None):
    """One reweighting step from ``(mu, G)``.

    Weights ``psi(d_i)/d_i`` give a weighted mean and a weighted scatter,
    which is then rescaled onto the constraint. The determinant does not
    increase.
    """
    X = as_rows(data)
    mu = np.asarray(mu, dtype=float)[None]
    G = np.asarray(G, dtype=float)[None]
    if mu.shape[1] != X.shape[1] or G.shape[1:] != (X.shape[1],) * 2:
        raise InputError("dimension mismatch between data, mu and G")
    _check_spd(G)
    mu_new, G_new, _ = _step(X, _weights(len(X), weights), mu, G, spec)
    return mu_new[0], G_new[0]


def _refine(X, w, mu, G, spec, tol, max_iter, criterion="det"):
    """Iterate :func:`_step` on stacked candidates until they settle.

    ``criterion="det"`` stops a candidate once the relative change of its
    determinant drops below ``tol``; ``"params"`` waits for the relative
    change of ``G`` (Frobenius) and of ``mu`` (in the metric of ``G``).
    The determinant is stationary at the optimum, so ``"det"`` only pins
    ``G`` down to about ``sqrt(tol)``.
    """
    m = len(mu)
    logdet = np.linalg.slogdet(G)[1]
    iters = np.zeros(m, dtype=int)
    active = np.ones(m, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        mu_new, G_new, ld_new = _step(X, w, mu[idx], G[idx], spec)
        if criterion == "det":
            change = np.abs(np.expm1(ld_new - logdet[idx]))
        else:
            dG = np.linalg.norm(G_new - G[idx], axis=(1, 2)) / np.linalg.norm(G_new, axis=(1, 2))
            dmu = np.array([np.sqrt((a - b) @ np.linalg.solve(g, a - b))
                            for a, b, g in zip(mu_new, mu[idx], G_new)])
            change = np.maximum(dG, dmu)
        mu[idx], G[idx], logdet[idx] = mu_new, G_new, ld_new
        iters[idx] += 1
        active[idx[change < tol]] = False
    return mu, G, logdet, iters, ~active


def _finish(X, w, mu, G, spec, iterations, converged):
    G = 0.5 * (G + G.T)
    s = _solve_scales(_sq_distances(X, mu[None], G[None]), w, spec)[0]
    G = G * s
    d = np.sqrt(_sq_distances(X, mu[None], G[None])[0])
    resid = float(xi(d, spec) @ w - spec.b0)
    sign, logdet = np.linalg.slogdet(G)
    return SEstimate(mu=mu, V=G, det=float(np.exp(logdet)), log_det=float(logdet),
                     iterations=int(iterations), converged=bool(converged),
                     constraint_residual=resid)


def s_refine(data, mu, G, spec, weights=None, tol=1e-12, max_iter=2000):
    """Iterate reweighting steps from ``(mu, G)`` until the parameters settle.

    Stops once the relative change of ``G`` and the change of ``mu`` (in
    the metric of ``G``) both fall below ``tol``. Useful when a good start
    is known, for example when refitting a slightly perturbed distribution.
    ``weights`` are per-row masses.
    """
    X = as_rows(data)
    w = _weights(len(X), weights)
    mu = np.array(mu, dtype=float)[None]
    G = np.array(G, dtype=float)[None]
    _check_spd(G)
    mu, G, _, iters, conv = _refine(X, w, mu, G, spec, tol, max_iter, criterion="params")
    return _finish(X, w, mu[0], G[0], spec, iters[0], conv[0])


def _draw_subsets(X, config):
    """Nonsingular elementary subsets, in attempt order.

    Attempt ``a`` draws its rows from a generator seeded by ``(seed, a)``.
    """
    n, q = X.shape
    wanted = config.n_subsamples
    max_attempts = 10 * wanted
    means, covs, attempts, singular = [], [], 0, 0
    while len(means) < wanted and attempts < max_attempts:
        batch = range(attempts, min(attempts + wanted, max_attempts))
        idx = np.array([np.random.default_rng([config.seed, a]).choice(n, q + 1, replace=False)
                        for a in batch])
        sub = X[idx]
        mean = sub.mean(axis=1)
        diff = sub - mean[:, None, :]
        cov = np.einsum("mni,mnj->mij", diff, diff) / q
        ev = np.linalg.eigvalsh(cov)
        ok = (ev[:, 0] > 0) & (ev[:, -1] <= COND_MAX * ev[:, 0])
        singular += int((~ok).sum())
        attempts += len(batch)
        for i in np.flatnonzero(ok)[: wanted - len(means)]:
            means.append(mean[i])
            covs.append(cov[i])
    if not means or singular > 0.9 * attempts:
        raise DegenerateDataError(
            f"{singular} of {attempts} elementary subsets are singular; the data appear "
            "to lie on a lower-dimensional affine subspace")
    return np.array(means), np.array(covs)


def s_estimate(data, spec, config=None):
    """S-estimate of location and scatter.

    Parameters
    ----------
    data : Dataset or array_like, shape (n, q)
    spec : LossSpec
        Loss tuned for dimension ``q``.
    config : SConfig, optional

    Returns
    -------
    SEstimate
        The candidate with the smallest determinant; ties go to the lower
        subset index. The result depends only on ``config.seed``.
    """
    config = config or SConfig()
    X = as_rows(data)
    n, q = X.shape
    if spec.dimension != q:
        raise InputError(f"loss tuned for q={spec.dimension} but data have q={q}")
    if n < q + 1:
        raise InputError(f"need at least q + 1 = {q + 1} rows, got {n}")
    w = _weights(n, None)

    mu, G = _draw_subsets(X, config)
    logdet = np.empty(len(mu))
    # bound the size of the stacked (candidates, n, q) work arrays
    size = max(1, BATCH_ELEMENTS // (n * q))
    for start in range(0, len(mu), size):
        sl = slice(start, start + size)
        s = _solve_scales(_sq_distances(X, mu[sl], G[sl]), w, spec)
        G[sl] *= s[:, None, None]
        logdet[sl] = np.linalg.slogdet(G[sl])[1]
        for _ in range(config.initial_steps):
            mu[sl], G[sl], logdet[sl] = _step(X, w, mu[sl], G[sl], spec)

    order = np.lexsort((np.arange(len(mu)), logdet))[: config.keep_best]
    mu, G, logdet, iters, conv = _refine(X, w, mu[order].copy(), G[order].copy(), spec,
                                         config.tol, config.max_refinement_iters)
    best = np.lexsort((np.arange(len(mu)), logdet))[0]
    return _finish(X, w, mu[best], G[best], spec,
                   iters[best] + config.initial_steps, conv[best])
