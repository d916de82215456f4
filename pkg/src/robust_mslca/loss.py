"""Tukey biweight loss, its tuning, and the Gaussian-referenced constants.

The loss is

    xi(t) = c^2/6 * (1 - (1 - t^2/c^2)^3)   for |t| <= c,   c^2/6 otherwise,

with derivative psi(t) = t (1 - t^2/c^2)^2 on [-c, c] and zero beyond.
``tune_loss`` picks ``c`` for a target breakdown point and sets ``b0`` for
consistency at the standard normal distribution in dimension ``q``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special, stats

from .exceptions import ConstantsError, InputError, TuningError

QUAD_TOL = 1e-10


@dataclass(frozen=True)
class LossSpec:
    """Biweight loss tuned for dimension ``dimension``.

    Attributes
    ----------
    cutoff : float
        The constant ``c``; ``xi`` is constant beyond it.
    b0 : float
        Right-hand side of the S-constraint ``mean xi(d_i) <= b0``.
    dimension : int
        Dimension ``q`` the loss was tuned for.
    breakdown : float
        Breakdown point ``b0 / xi(c)``.
    """

    cutoff: float
    b0: float
    dimension: int
    breakdown: float

    def __post_init__(self):
        if not self.cutoff > 0:
            raise InputError("cutoff must be positive")
        if not 0 < self.b0 <= self.cutoff ** 2 / 6 * (1 + 1e-12):
            raise InputError("b0 must lie in (0, c^2/6]")
        if self.dimension < 1:
            raise InputError("dimension must be >= 1")

    @property
    def xi_max(self):
        return self.cutoff ** 2 / 6.0


@dataclass(frozen=True)
class AsymptoticConstants:
    """Radial integrals entering the influence functions and the test."""

    gamma1: float
    gamma2: float
    beta3: float
    dimension: int


def xi(t, spec):
    """Biweight loss, evaluated at ``|t|``."""
    c = spec.cutoff
    u = np.minimum(np.abs(np.asarray(t, dtype=float)) / c, 1.0)
    w = 1.0 - u * u
    return c * c / 6.0 * (1.0 - w * w * w)


def psi(t, spec):
    """Derivative of :func:`xi`: Tukey's biweight ``t (1 - t^2/c^2)^2``."""
    t = np.asarray(t, dtype=float)
    c = spec.cutoff
    w = 1.0 - (t / c) ** 2
    return np.where(np.abs(t) <= c, t * w * w, 0.0)


def dpsi(t, spec):
    """Derivative of :func:`psi`."""
    t = np.asarray(t, dtype=float)
    u2 = (t / spec.cutoff) ** 2
    w = 1.0 - u2
    return np.where(np.abs(t) <= spec.cutoff, w * w - 4.0 * u2 * w, 0.0)


def psi_over_t(t, spec):
    """``psi(t) / t`` with its continuous value 1 at ``t = 0``."""
    t = np.asarray(t, dtype=float)
    w = 1.0 - (t / spec.cutoff) ** 2
    return np.where(np.abs(t) <= spec.cutoff, w * w, 0.0)


def _log_radial_norm(q):
    # log of 2 pi^{q/2} / Gamma(q/2) * (2 pi)^{-q/2}, i.e. the chi_q density
    # prefactor once h(r^2) = (2 pi)^{-q/2} exp(-r^2/2) is folded in
    return np.log(2.0) - 0.5 * q * np.log(2.0) - special.gammaln(0.5 * q)


def _expected_xi(c, q):
    """E xi_c(||Z||) for Z ~ N(0, I_q), by quadrature over the chi law."""
    spec = LossSpec(c, c * c / 6.0, q, 1.0)
    inner, _ = integrate.quad(
        lambda r: xi(r, spec) * stats.chi.pdf(r, q), 0.0, c,
        epsabs=1e-13, epsrel=1e-13, limit=200)
    return inner + c * c / 6.0 * stats.chi.sf(c, q)


def tune_loss(q, breakdown=0.5):
    """Tune the biweight for dimension ``q`` and a target breakdown point.

    Solves ``E xi_c(||Z||) = breakdown * c^2 / 6`` for ``c`` with ``Z``
    standard normal in ``R^q``, and sets ``b0 = E xi_c(||Z||)`` so the
    S-estimator is consistent at the normal model.

    Parameters
    ----------
    q : int
        Dimension of the observations.
    breakdown : float
        Target breakdown point in ``(0, 0.5]``.

    Returns
    -------
    LossSpec
    """
    q = int(q)
    if q < 1:
        raise InputError("q must be >= 1")
    if not 0 < breakdown <= 0.5:
        raise InputError("breakdown must lie in (0, 0.5]")

    def excess(c):
        return _expected_xi(c, q) / (c * c / 6.0) - breakdown

    # excess decreases from 1 - breakdown (c -> 0) to -breakdown (c -> inf)
    lo, hi = 1e-3, 1.0
    while excess(hi) > 0:
        hi *= 2.0
        if hi > 1e6:
            raise TuningError("could not bracket the cutoff")
    try:
        c, info = optimize.brentq(excess, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps,
                                  maxiter=200, full_output=True, disp=False)
    except (RuntimeError, ValueError) as exc:
        raise TuningError(str(exc)) from exc
    if not info.converged:
        raise TuningError("cutoff root-finding did not converge in 200 steps")
    b0 = _expected_xi(c, q)
    return LossSpec(cutoff=float(c), b0=float(b0), dimension=q, breakdown=float(breakdown))


def _radial_quad(f, spec):
    q = spec.dimension
    lognorm = _log_radial_norm(q)

    def integrand(r):
        return f(r) * np.exp(lognorm + (q - 1) * np.log(r) - 0.5 * r * r) if r > 0 else 0.0

    val, err, info = integrate.quad(integrand, 0.0, spec.cutoff, epsabs=QUAD_TOL,
                                    epsrel=QUAD_TOL, limit=500, full_output=True)[:3]
    if err > 10 * QUAD_TOL * max(1.0, abs(val)):
        raise ConstantsError(f"quadrature did not converge (error estimate {err:.3g})")
    return val


def compute_constants(spec):
    """Asymptotic constants under the Gaussian density generator.

    ``gamma1`` and ``gamma2`` enter the influence function of the scatter
    functional, ``beta3`` the limiting law of the robust MSLCA operator.
    Each is a radial integral over ``[0, c]``; the integrands vanish beyond
    the cutoff.
    """
    q = spec.dimension
    g1 = _radial_quad(lambda r: float(dpsi(r, spec)) * r * r + (q + 1) * float(psi(r, spec)) * r,
                      spec) / (q + 2)
    g2 = _radial_quad(lambda r: float(psi(r, spec)) * r, spec)
    # h'(t) = -h(t)/2 for the Gaussian generator
    b3 = _radial_quad(lambda r: float(psi(r, spec)) * r ** 3, spec) * (4.0 / (q + 2)) * -0.5
    return AsymptoticConstants(gamma1=g1, gamma2=g2, beta3=b3, dimension=q)
