"""Multiple-set canonical analysis on a robust scatter estimate."""
import numpy as np

from robust_mslca import BlockStructure, Dataset, fit_robust_mslca, sample, solve_mslca
from robust_mslca.datagen import ModelSpec
from robust_mslca.mslca import canonical_correlations

# Three blocks of two variables each. Block 1 and block 2 share one
# direction, block 3 is weakly tied to block 1.
blocks = BlockStructure((2, 2, 2))
V = np.eye(6)
V[0, 2] = V[2, 0] = 0.7
V[1, 4] = V[4, 1] = 0.3

sol = solve_mslca(V, blocks)
print("population coefficients:", np.round(sol.rho, 4))
print("they sum to zero:", sol.rho.sum())

# alpha holds the canonical directions as columns, normalised so that
# alpha' Phi alpha = 1
print("alpha' Phi alpha:", np.round(np.diag(sol.alpha.T @ sol.phi @ sol.alpha), 12))

data = sample(ModelSpec(V, blocks), 2000, seed=11)
est, fit = fit_robust_mslca(data)
print("estimated coefficients: ", np.round(fit.rho, 4))

# With two blocks the positive coefficients are the canonical correlations
two = BlockStructure((2, 2))
W = V[:4, :4]
print("two blocks:", np.round(solve_mslca(W, two).rho, 4), "vs", canonical_correlations(W, two))
