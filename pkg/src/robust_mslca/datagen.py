"""Samplers for elliptical models with optional contamination.

Row ``i`` is generated from a Philox stream keyed by ``(seed, i // CHUNK)``
and consumes a fixed number of uniforms, so a row's value depends only on
the seed and its index: generating more rows never changes earlier ones.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from .blocks import BlockStructure, check_square
from .exceptions import InputError
from .s_estimator import Dataset

CHUNK = 1024


@dataclass(frozen=True)
class Contamination:
    """Replace each row with probability ``epsilon``.

    ``kind="point"`` puts the replaced row exactly at ``point``;
    ``kind="diffuse"`` shifts the row's model draw by ``point``.
    """

    epsilon: float
    point: np.ndarray
    kind: str = "point"

    def __post_init__(self):
        if not 0 <= self.epsilon < 0.5:
            raise InputError("contamination fraction must lie in [0, 0.5)")
        if self.kind not in ("point", "diffuse"):
            raise InputError(f"unknown contamination kind {self.kind!r}")
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))


@dataclass(frozen=True)
class ModelSpec:
    V: np.ndarray
    blocks: BlockStructure
    family: str = "gaussian"
    df: float = None
    contamination: Contamination = None

    def __post_init__(self):
        V = check_square(self.V, self.blocks)
        if not np.allclose(V, V.T, rtol=0, atol=1e-12 * max(1.0, np.abs(V).max())):
            raise InputError("V must be symmetric")
        if np.linalg.eigvalsh(V)[0] <= 0:
            raise InputError("V must be positive definite")
        object.__setattr__(self, "V", V)
        if self.family not in ("gaussian", "student"):
            raise InputError(f"unknown family {self.family!r}")
        if self.family == "student" and not (self.df is not None and self.df > 0):
            raise InputError("the student family needs positive df")
        c = self.contamination
        if c is not None and c.point.shape != (self.blocks.q,):
            raise InputError("contamination point has the wrong dimension")


def _uniforms(seed, n, m):
    """``(n, m)`` uniforms in (0, 1); row ``i`` depends only on ``(seed, i)``."""
    out = np.empty((n, m))
    for j, start in enumerate(range(0, n, CHUNK)):
        stop = min(start + CHUNK, n)
        bitgen = np.random.Philox(key=(int(seed) % 2 ** 64) + (j << 64))
        out[start:stop] = np.random.Generator(bitgen).random((CHUNK, m))[: stop - start]
    # shift off zero; random() has 53-bit resolution
    return out + 2.0 ** -54


def spd_sqrt(V):
    w, U = np.linalg.eigh(V)
    return (U * np.sqrt(w)) @ U.T


def sample(model, n, seed):
    """Draw ``n`` rows from ``model``; deterministic in ``seed``."""
    n = int(n)
    if n < 1:
        raise InputError("n must be positive")
    q = model.blocks.q
    u = _uniforms(seed, n, q + 2)
    z = special.ndtri(u[:, :q])
    x = z @ spd_sqrt(model.V)
    if model.family == "student":
        chi2 = 2.0 * special.gammaincinv(0.5 * model.df, u[:, q])
        x = x / np.sqrt(chi2 / model.df)[:, None]
    c = model.contamination
    if c is not None and c.epsilon > 0:
        hit = u[:, q + 1] < c.epsilon
        if c.kind == "point":
            x[hit] = c.point
        else:
            x[hit] = x[hit] + c.point
    return Dataset(x, model.blocks)


def null_model(blocks, family="gaussian", df=None):
    """Independent blocks: ``V = I``."""
    return ModelSpec(np.eye(blocks.q), blocks, family, df)


def correlated_model(blocks, rho, pair=(0, 1), family="gaussian", df=None):
    """Identity scatter except for one canonical correlation ``rho``.

    The first coordinate of block ``pair[0]`` and the first coordinate of
    block ``pair[1]`` have correlation ``rho``.
    """
    V = np.eye(blocks.q)
    a, b = blocks.offsets[pair[0]], blocks.offsets[pair[1]]
    V[a, b] = V[b, a] = rho
    return ModelSpec(V, blocks, family, df)
