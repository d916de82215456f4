"""Robust chi-square test of mutual non-correlation between blocks.

The statistic is ``n * S / kappa`` where ``S`` sums the squared Frobenius
norms of the blocks of the robust ``T`` strictly below the block diagonal.
Under independence of the blocks it is asymptotically chi-square with
``d = sum_{k > l} p_k p_l`` degrees of freedom.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from .blocks import check_square
from .exceptions import DegenerateNormalizerError, InputError
from .loss import compute_constants, dpsi, psi, tune_loss
from .mslca import build_t
from .s_estimator import Dataset, SConfig, mahalanobis_distances, s_estimate

NORMALIZERS = ("moment", "variance")


@dataclass(frozen=True)
class TestResult:
    statistic: float
    s_tilde: float
    kappa0_hat: float
    df: int
    p_value: float
    n: int

    __test__ = False  # keep pytest from collecting this class


def test_statistic(T, blocks):
    """Sum over ``k > l`` of ``||T_kl||_F^2``."""
    T = check_square(T, blocks, "T")
    total = 0.0
    for k in range(1, blocks.K):
        for l in range(k):
            blk = T[blocks.slice(k), blocks.slice(l)]
            total += float(np.sum(blk * blk))
    return total


test_statistic.__test__ = False


def _radii(data, est, raw):
    X = data.rows if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if raw:
        return np.linalg.norm(X, axis=1)
    return mahalanobis_distances(X, est.mu, est.V)


def kappa0_hat(data, est, spec, constants, raw=False):
    """Plug-in ``(-2/beta3) / (n (q+1)) * sum_i psi(r_i) r_i^3``.

    ``r_i`` are the norms of the standardized residuals
    ``V^{-1/2}(x_i - mu)`` of the S-estimate, which makes the normalizer
    affine invariant. ``raw=True`` uses ``||x_i||`` as is.

    At the Gaussian model this tends to ``(q + 2)/(q + 1)`` for every loss.
    """
    r = _radii(data, est, raw)
    q = spec.dimension
    val = -2.0 / constants.beta3 / (len(r) * (q + 1)) * float(np.sum(psi(r, spec) * r ** 3))
    if not val > 0:
        raise DegenerateNormalizerError("every standardized residual lies beyond the cutoff")
    return val


def gamma1_hat(r, spec):
    """Plug-in ``mean(psi'(r) r^2 + (q+1) psi(r) r) / (q+2)`` over residual norms ``r``."""
    q = spec.dimension
    return float(np.mean(dpsi(r, spec) * r * r + (q + 1) * psi(r, spec) * r)) / (q + 2)


def kappa_variance_hat(data, est, spec, constants, raw=False, plugin_gamma1=True):
    """Plug-in asymptotic variance of ``sqrt(n)`` times an entry of an off-diagonal block of ``T``.

    ``(q/gamma1)^2 / (q (q+2)) * mean_i psi(r_i)^2 r_i^2``: the second moment
    of the influence function of ``T`` at the independence model. For the
    sample covariance (``psi(t) = t``) it equals 1.

    By default ``gamma1`` is also estimated from the residuals, which keeps
    the normalizer consistent for any elliptical law, heavy tails included.
    With ``plugin_gamma1=False`` the Gaussian-model ``constants.gamma1`` is
    used.
    """
    r = _radii(data, est, raw)
    q = spec.dimension
    g1 = gamma1_hat(r, spec) if plugin_gamma1 else constants.gamma1
    m2 = float(np.mean((psi(r, spec) * r) ** 2))
    if not (m2 > 0 and g1 > 0):
        raise DegenerateNormalizerError("no usable standardized residual inside the cutoff")
    return (q / g1) ** 2 / (q * (q + 2)) * m2


def chi2_sf(x, df):
    """Upper chi-square tail via the regularized upper incomplete gamma function."""
    return float(special.gammaincc(0.5 * df, 0.5 * max(x, 0.0)))


def noncorrelation_test(data, spec=None, config=None, normalizer="variance", raw=False,
                        breakdown=0.5):
    """Test that all between-block scatter blocks vanish.

    Parameters
    ----------
    data : Dataset
        Must carry a block structure.
    spec : LossSpec, optional
        Defaults to ``tune_loss(q, breakdown)``.
    config : SConfig, optional
    normalizer : {"moment", "variance"}
        ``"moment"`` divides by :func:`kappa0_hat`, ``"variance"`` by
        :func:`kappa_variance_hat`.
    raw : bool
        Evaluate the normalizer on raw rows instead of standardized residuals.
    """
    if not isinstance(data, Dataset) or data.blocks is None:
        raise InputError("the test needs a Dataset with a block structure")
    if normalizer not in NORMALIZERS:
        raise InputError(f"normalizer must be one of {NORMALIZERS}")
    blocks = data.blocks
    spec = spec or tune_loss(blocks.q, breakdown)
    est = s_estimate(data, spec, config or SConfig())
    s_tilde = test_statistic(build_t(est.V, blocks), blocks)
    constants = compute_constants(spec)
    kappa_fn = kappa0_hat if normalizer == "moment" else kappa_variance_hat
    kappa = kappa_fn(data, est, spec, constants, raw=raw)
    stat = data.n * s_tilde / kappa
    return TestResult(statistic=stat, s_tilde=s_tilde, kappa0_hat=kappa, df=blocks.df,
                      p_value=chi2_sf(stat, blocks.df), n=data.n)
