"""How much one observation can move the robust canonical analysis."""
import numpy as np

from robust_mslca import BlockStructure, InfluenceContext, if_alpha, if_bound, if_rho, if_t
from robust_mslca.influence import standardized_norm

blocks = BlockStructure((2, 2))
V = np.eye(4)
V[0, 2] = V[2, 0] = 0.6
V[1, 3] = V[3, 1] = 0.3
ctx = InfluenceContext.from_model(V, blocks)
c = ctx.spec.cutoff

# Push a point out along one ray and watch the influence on the top coefficient.
# It rises, turns over and is exactly zero once the point passes the cutoff.
ray = np.array([1.0, 0.0, -1.0, 0.0]) / np.sqrt(2)
for r in (0.5, 1.0, 2.0, 3.0, 4.0, c, 6.0, 50.0):
    x = r * ray
    print(f"r={r:7.3f}  d={standardized_norm(x, ctx):7.3f}  IF(rho_1)={if_rho(x, 0, ctx):+.5f}")

# The influence on T is bounded; compare a random search with the certified ceiling
rng = np.random.default_rng(3)
sup = max(np.linalg.norm(if_t(x, ctx), 2) for x in rng.normal(scale=2.0, size=(5000, 4)))
print(f"largest ||IF(T)|| found: {sup:.3f}, ceiling: {if_bound(ctx):.1f}")

# influence on the leading canonical direction
print("IF(alpha_1) at x=(1,0,1,0):", np.round(if_alpha(np.array([1.0, 0, 1, 0]), 0, ctx), 4))
