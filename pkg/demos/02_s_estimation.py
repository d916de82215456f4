"""Robust location and scatter with the S-estimator."""
import numpy as np

from robust_mslca import SConfig, s_estimate, tune_loss

rng = np.random.default_rng(0)
q, n = 4, 1000
V = np.array([[2.0, 0.8, 0.0, 0.3],
              [0.8, 1.0, 0.2, 0.0],
              [0.0, 0.2, 1.5, 0.4],
              [0.3, 0.0, 0.4, 1.0]])
X = rng.multivariate_normal(np.zeros(q), V, size=n)

# a fifth of the rows are moved far away
X_bad = X.copy()
X_bad[: n // 5] = rng.normal(20.0, 0.5, size=(n // 5, q))

spec = tune_loss(q)
clean = s_estimate(X, spec, SConfig(seed=1))
dirty = s_estimate(X_bad, spec, SConfig(seed=1))

def rel(A):
    return np.linalg.norm(A - V) / np.linalg.norm(V)

print("S-estimate, clean data      rel. error", round(rel(clean.V), 3))
print("S-estimate, 20% outliers    rel. error", round(rel(dirty.V), 3))
print("sample covariance, outliers rel. error", round(rel(np.cov(X_bad.T)), 1))
print("location with outliers:", np.round(dirty.mu, 3))

# Most of that error is scale, not shape. The outliers sit at the loss
# ceiling, so the clean points must carry less of the constraint and the
# scatter shrinks. Compare shapes normalised to unit determinant.
def shape(A):
    return A / np.linalg.det(A) ** (1 / q)

print("shape error with outliers:",
      round(np.linalg.norm(shape(dirty.V) - shape(V)) / np.linalg.norm(shape(V)), 3))

# The constraint mean(xi(d_i)) = b0 holds to rounding at the solution
print("constraint residual:", dirty.constraint_residual)

# Affine equivariance: transforming the data transforms the estimate
A = rng.standard_normal((q, q)) + 2 * np.eye(q)
moved = s_estimate(X_bad @ A.T + 5.0, spec, SConfig(seed=1))
print("equivariance gap:", np.abs(moved.V - A @ dirty.V @ A.T).max())
