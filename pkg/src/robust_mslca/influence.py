"""Influence functions of the robust MSLCA functionals at an elliptical model.

With ``d = ||V^{-1/2} x||`` the scatter functional has influence

    IF_V(x) = (2/gamma2) (xi(d) - b0) V + (q/gamma1) psi(d) d (x x'/d^2 - V/q),

and everything else follows by the chain rule through
``V -> T = Phi^{-1/2} Psi Phi^{-1/2}`` and its eigen-decomposition. Because
``T`` is invariant to rescaling ``V``, only the ``x x'`` part of ``IF_V``
survives in ``IF_T``:

    IF_T(x) = (q/gamma1) (psi(d)/d) DT_V[x x'],

where ``DT_V`` is the derivative of the map ``V -> T``. When the diagonal
blocks of ``V`` are identities, ``DT_V[x x']`` is the matrix computed by
:func:`lambda_op`.

Eigen-indices ``j`` are zero-based.
"""

from dataclasses import dataclass

import numpy as np

from .blocks import BlockStructure, block_diagonal_part, check_square, off_diagonal_part
from .exceptions import DegenerateSpectrumError, InputError
from .loss import AsymptoticConstants, LossSpec, compute_constants, psi, psi_over_t, tune_loss, xi
from .mslca import MslcaSolution, phi_power, solve_mslca

SPECTRAL_GAP = 1e-8


@dataclass(frozen=True)
class InfluenceContext:
    """Model scatter plus everything the influence functions need.

    Build with :meth:`from_model`; the solution and constants are derived,
    not supplied.
    """

    V: np.ndarray
    blocks: BlockStructure
    spec: LossSpec
    constants: AsymptoticConstants
    solution: MslcaSolution

    @classmethod
    def from_model(cls, V, blocks, spec=None, breakdown=0.5):
        V = check_square(V, blocks)
        if spec is None:
            spec = tune_loss(blocks.q, breakdown)
        if spec.dimension != blocks.q:
            raise InputError("loss dimension does not match the block structure")
        return cls(V=V, blocks=blocks, spec=spec, constants=compute_constants(spec),
                   solution=solve_mslca(V, blocks))

    @property
    def q(self):
        return self.blocks.q


def _vec(x, ctx):
    x = np.asarray(x, dtype=float)
    if x.shape != (ctx.q,):
        raise InputError(f"x must have dimension {ctx.q}, got shape {x.shape}")
    return x


def standardized_norm(x, ctx):
    """``||V^{-1/2} x||``."""
    x = _vec(x, ctx)
    return float(np.sqrt(max(x @ np.linalg.solve(ctx.V, x), 0.0)))


def lambda_op(x, ctx):
    """``-1/2 f(xx') g(V) - 1/2 g(V) f(xx') + g(xx')``.

    ``f`` keeps the diagonal blocks and ``g`` the off-diagonal ones.
    """
    x = _vec(x, ctx)
    xx = np.outer(x, x)
    D = block_diagonal_part(xx, ctx.blocks)
    G = off_diagonal_part(ctx.V, ctx.blocks)
    return -0.5 * (D @ G + G @ D) + off_diagonal_part(xx, ctx.blocks)


def _inv_sqrt_derivative(Phi, E):
    """Derivative of ``A -> A^{-1/2}`` at SPD ``Phi`` in the symmetric direction ``E``."""
    w, U = np.linalg.eigh(Phi)
    r = np.sqrt(w)
    # divided differences of t -> t^{-1/2}: -1 / (sqrt(a) sqrt(b) (sqrt(a) + sqrt(b)))
    dd = -1.0 / (np.outer(r, r) * (r[:, None] + r[None, :]))
    return U @ ((U.T @ E @ U) * dd) @ U.T


def t_derivative(V, blocks, E):
    """Directional derivative of ``V -> Phi^{-1/2} Psi Phi^{-1/2}`` along ``E``."""
    V = check_square(V, blocks)
    E = check_square(E, blocks, "E")
    E = 0.5 * (E + E.T)
    S = phi_power(V, blocks, -0.5)
    dS = _inv_sqrt_derivative(block_diagonal_part(V, blocks), block_diagonal_part(E, blocks))
    # dS is block diagonal up to rounding; zero the rest exactly
    dS = block_diagonal_part(dS, blocks)
    Psi = off_diagonal_part(V, blocks)
    dT = dS @ Psi @ S + S @ off_diagonal_part(E, blocks) @ S + S @ Psi @ dS
    return 0.5 * (dT + dT.T)


def if_scatter(x, ctx):
    """Influence function of the S-scatter functional at ``x``."""
    x = _vec(x, ctx)
    k = ctx.constants
    d = standardized_norm(x, ctx)
    out = (2.0 / k.gamma2) * (float(xi(d, ctx.spec)) - ctx.spec.b0) * ctx.V
    if d > 0:
        out = out + (ctx.q / k.gamma1) * float(psi(d, ctx.spec)) * d * (
            np.outer(x, x) / d ** 2 - ctx.V / ctx.q)
    return 0.5 * (out + out.T)


def _radial_weight(x, ctx):
    # (q/gamma1) psi(d)/d, equal to q/gamma1 at x = 0
    return ctx.q / ctx.constants.gamma1 * float(psi_over_t(standardized_norm(x, ctx), ctx.spec))


def if_t(x, ctx):
    """Influence function of the MSLCA operator ``T``.

    Zero whenever ``||V^{-1/2} x||`` exceeds the cutoff.
    """
    x = _vec(x, ctx)
    a = _radial_weight(x, ctx)
    if a == 0.0:
        return np.zeros((ctx.q, ctx.q))
    return a * t_derivative(ctx.V, ctx.blocks, np.outer(x, x))


def if_bound(ctx):
    """Certified ceiling on the operator norm of :func:`if_t`.

    ``(K q / |gamma1|) (K - 1) (||V|| + 1) c^2 ||V^{1/2}||^2`` with spectral
    norms, using ``sup psi(t)/t = 1`` for the biweight.
    """
    K, q = ctx.blocks.K, ctx.q
    vnorm = float(np.linalg.norm(ctx.V, 2))
    return K * q / abs(ctx.constants.gamma1) * (K - 1) * (vnorm + 1.0) * ctx.spec.cutoff ** 2 * vnorm


def _index(j, ctx):
    if not 0 <= j < ctx.q:
        raise InputError(f"eigen-index {j} out of range for q={ctx.q}")
    return j


def if_rho(x, j, ctx):
    """Influence function of the ``j``-th largest canonical coefficient."""
    j = _index(j, ctx)
    b = ctx.solution.beta[:, j]
    return float(b @ if_t(x, ctx) @ b)


def if_beta(x, j, ctx):
    """Influence function of the unit eigenvector ``beta_j`` of ``T``.

    First-order eigenvector perturbation; it is orthogonal to ``beta_j``
    because the eigenvectors stay unit-norm. Needs ``rho_j`` separated
    from every other eigenvalue.
    """
    j = _index(j, ctx)
    rho, B = ctx.solution.rho, ctx.solution.beta
    gaps = rho[j] - np.delete(rho, j)
    if gaps.size and np.min(np.abs(gaps)) <= SPECTRAL_GAP:
        raise DegenerateSpectrumError(
            f"eigenvalue {j} is within {SPECTRAL_GAP} of another; its eigenvector is not "
            "differentiable")
    coef = B.T @ if_t(x, ctx) @ B[:, j]
    denom = rho[j] - rho
    denom[j] = np.inf
    return B @ (coef / denom)


def if_alpha(x, j, ctx):
    """Influence function of the canonical direction ``alpha_j = Phi^{-1/2} beta_j``.

    Differentiates both factors: the eigenvector through :func:`if_beta`
    and ``Phi^{-1/2}`` along the diagonal blocks of :func:`if_scatter`.
    When ``Phi = I`` this is ``IF(beta_j) - f(IF_V) beta_j / 2``.
    """
    j = _index(j, ctx)
    dbeta = if_beta(x, j, ctx)
    V, blocks = ctx.V, ctx.blocks
    S = phi_power(V, blocks, -0.5)
    dS = _inv_sqrt_derivative(block_diagonal_part(V, blocks),
                              block_diagonal_part(if_scatter(x, ctx), blocks))
    return dS @ ctx.solution.beta[:, j] + S @ dbeta
