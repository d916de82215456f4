"""Multiple-set linear canonical analysis of a scatter matrix.

For a partition of ``R^q`` into ``K >= 2`` blocks, ``Phi`` keeps the
diagonal blocks of ``V``, ``Psi = V - Phi`` keeps the rest, and the
canonical coefficients are the eigenvalues of

    T = Phi^{-1/2} Psi Phi^{-1/2}.

The canonical directions are ``alpha_j = Phi^{-1/2} beta_j`` for unit
eigenvectors ``beta_j`` of ``T``; they satisfy ``alpha_j' Phi alpha_j = 1``.

Block indices are zero-based throughout.
"""

from dataclasses import dataclass

import numpy as np

from .blocks import BlockStructure, check_square, block_diagonal_part, off_diagonal_part
from .exceptions import InputError, SingularScatterError

BLOCK_EIG_FLOOR = 1e-12


@dataclass(frozen=True)
class MslcaSolution:
    """Spectral solution; ``beta`` and ``alpha`` hold vectors as columns."""

    phi: np.ndarray
    t_matrix: np.ndarray
    rho: np.ndarray
    beta: np.ndarray
    alpha: np.ndarray


def extract_block(M, k, l, blocks):
    """The ``(k, l)`` sub-block of ``M``."""
    M = check_square(M, blocks, "M")
    return M[blocks.slice(k), blocks.slice(l)].copy()


def build_phi(V, blocks):
    """Block-diagonal part of ``V``."""
    return block_diagonal_part(check_square(V, blocks), blocks)


def _block_eigh(V, blocks):
    # per-block eigendecomposition of the block-diagonal part, no clamping
    out = []
    for k in range(blocks.K):
        s = blocks.slice(k)
        w, U = np.linalg.eigh(V[s, s])
        if w[0] < BLOCK_EIG_FLOOR:
            raise SingularScatterError(
                f"diagonal block {k} has eigenvalue {w[0]:.3g} below {BLOCK_EIG_FLOOR}")
        out.append((s, w, U))
    return out


def phi_power(V, blocks, power):
    """``Phi^power`` computed block by block."""
    V = check_square(V, blocks)
    P = np.zeros_like(V)
    for s, w, U in _block_eigh(V, blocks):
        P[s, s] = (U * w ** power) @ U.T
    return P


def build_t(V, blocks):
    """``T = Phi^{-1/2} (V - Phi) Phi^{-1/2}``, symmetrized."""
    V = check_square(V, blocks)
    S = phi_power(V, blocks, -0.5)
    T = S @ off_diagonal_part(V, blocks) @ S
    T = 0.5 * (T + T.T)
    # diagonal blocks vanish exactly in exact arithmetic
    return off_diagonal_part(T, blocks)


def _orient(vectors):
    # first clearly nonzero coordinate of each column made positive
    v = vectors.copy()
    for j in range(v.shape[1]):
        nz = np.flatnonzero(np.abs(v[:, j]) > 1e-10)
        if nz.size and v[nz[0], j] < 0:
            v[:, j] = -v[:, j]
    return v


def solve_mslca(V, blocks, tie_tol=1e-10):
    """Canonical coefficients and directions of the scatter matrix ``V``.

    Eigenvalues are returned in descending order. Eigenvectors have their
    first nonzero coordinate positive; within a group of eigenvalues equal
    to ``tie_tol`` they are sorted lexicographically (descending).
    """
    V = check_square(V, blocks)
    T = build_t(V, blocks)
    w, U = np.linalg.eigh(T)
    w, U = w[::-1], _orient(U[:, ::-1])

    order = list(range(len(w)))
    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and w[start] - w[stop] <= tie_tol:
            stop += 1
        if stop - start > 1:
            group = sorted(range(start, stop), key=lambda i: tuple(U[:, i]), reverse=True)
            order[start:stop] = group
        start = stop
    # values stay sorted; within a tie group only the vectors move
    U = U[:, order]

    phi = build_phi(V, blocks)
    alpha = phi_power(V, blocks, -0.5) @ U
    return MslcaSolution(phi=phi, t_matrix=T, rho=w, beta=U, alpha=alpha)


def canonical_correlations(V, blocks):
    """Classical two-block canonical correlations, via an SVD.

    Singular values of ``V11^{-1/2} V12 V22^{-1/2}``; only defined for
    ``K = 2``.
    """
    if blocks.K != 2:
        raise InputError("canonical correlations need exactly two blocks")
    V = check_square(V, blocks)
    S = phi_power(V, blocks, -0.5)
    s0, s1 = blocks.slice(0), blocks.slice(1)
    return np.linalg.svd(S[s0, s0] @ V[s0, s1] @ S[s1, s1], compute_uv=False)


def fit_robust_mslca(data, spec=None, config=None, breakdown=0.5):
    """S-estimate the scatter of ``data`` and solve MSLCA on it.

    ``data`` must be a :class:`~robust_mslca.s_estimator.Dataset` with a
    block structure. Returns ``(SEstimate, MslcaSolution)``.
    """
    from .loss import tune_loss
    from .s_estimator import Dataset, SConfig, s_estimate

    if not isinstance(data, Dataset) or data.blocks is None:
        raise InputError("fit_robust_mslca needs a Dataset with a block structure")
    spec = spec or tune_loss(data.q, breakdown)
    est = s_estimate(data, spec, config or SConfig())
    return est, solve_mslca(est.V, data.blocks)
