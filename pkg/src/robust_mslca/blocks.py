"""Partition of the coordinate space into blocks.

Block indices are zero-based.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InputError


@dataclass(frozen=True)
class BlockStructure:
    """Partition of ``q`` coordinates into consecutive blocks.

    >>> b = BlockStructure((2, 3))
    >>> b.q, b.K, b.offsets
    (5, 2, (0, 2))
    """

    dims: tuple
    offsets: tuple = field(init=False)

    def __post_init__(self):
        dims = tuple(int(p) for p in self.dims)
        if len(dims) < 2:
            raise InputError("at least two blocks are required")
        if any(p < 1 for p in dims):
            raise InputError("block dimensions must be positive")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "offsets", tuple(int(o) for o in np.cumsum((0,) + dims[:-1])))

    @classmethod
    def parse(cls, text):
        """Build from a comma-separated string such as ``"2,3,4"``."""
        try:
            dims = [int(tok) for tok in text.split(",")]
        except ValueError as exc:
            raise InputError(f"invalid block list {text!r}") from exc
        return cls(tuple(dims))

    @property
    def q(self):
        return sum(self.dims)

    @property
    def K(self):
        return len(self.dims)

    def slice(self, k):
        if not 0 <= k < self.K:
            raise InputError(f"block index {k} out of range for {self.K} blocks")
        return slice(self.offsets[k], self.offsets[k] + self.dims[k])

    def labels(self):
        """Block label of every coordinate."""
        return np.repeat(np.arange(self.K), self.dims)

    def diagonal_mask(self):
        lab = self.labels()
        return lab[:, None] == lab[None, :]

    @property
    def df(self):
        """Number of entries strictly below the block diagonal."""
        d = self.dims
        return sum(d[k] * d[l] for k in range(self.K) for l in range(k))


def check_square(M, blocks, name="V"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape != (blocks.q, blocks.q):
        raise InputError(f"{name} must be {blocks.q}x{blocks.q}, got shape {M.shape}")
    return M


def block_diagonal_part(M, blocks):
    """``f(M)``: keep the diagonal blocks, zero elsewhere."""
    return np.where(blocks.diagonal_mask(), M, 0.0)


def off_diagonal_part(M, blocks):
    """``g(M)``: keep the off-diagonal blocks, zero the diagonal ones."""
    return np.where(blocks.diagonal_mask(), 0.0, M)
