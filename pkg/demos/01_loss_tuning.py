"""Tuning the biweight loss and the constants that come with it."""
import numpy as np

from robust_mslca import compute_constants, psi, tune_loss, xi

# The cutoff is chosen so that E xi(||Z||) for standard normal Z equals
# half of the loss ceiling c^2/6, which gives a 50% breakdown point.
for q in (1, 2, 4, 6, 10):
    spec = tune_loss(q)
    print(f"q={q:2d}  c={spec.cutoff:.6f}  b0={spec.b0:.6f}  b0/ceiling={spec.b0 / spec.xi_max:.3f}")

# lower breakdown -> larger cutoff -> closer to the sample covariance
for bdp in (0.5, 0.25, 0.1):
    print(f"breakdown {bdp:4.2f}: c = {tune_loss(6, bdp).cutoff:.4f}")

# The loss flattens out at the cutoff; psi is its derivative and is zero beyond.
spec = tune_loss(6)
t = np.array([0.0, 1.0, 3.0, spec.cutoff, 8.0])
print("t     ", t)
print("xi(t) ", np.round(xi(t, spec), 4))
print("psi(t)", np.round(psi(t, spec), 4))

k = compute_constants(spec)
print(f"gamma1={k.gamma1:.5f} gamma2={k.gamma2:.5f} beta3={k.beta3:.5f}")
# for the Gaussian generator beta3 is exactly -2 gamma1
print("beta3 + 2 gamma1 =", k.beta3 + 2 * k.gamma1)
