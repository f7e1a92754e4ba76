"""Binary (quantics) encoding of continuous variables on uniform grids.

Each of the n variables lives on a half-open interval [a, b) sampled at
2^R left-endpoint grid points.  The nR bits are interleaved so that bits
of the same length scale sit next to each other:
(sigma_{1,1}, ..., sigma_{n,1}, sigma_{1,2}, ..., sigma_{n,R}).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class QuanticsGrid:
    n_vars: int
    bits: int
    domains: tuple  # ((a_1, b_1), ..., (a_n, b_n))

    def __init__(self, n_vars, bits, domains):
        if n_vars < 1 or bits < 1:
            raise GridError("n_vars and bits must be positive")
        domains = tuple((float(a), float(b)) for a, b in domains)
        if len(domains) != n_vars:
            raise GridError("one domain per variable required")
        for a, b in domains:
            if not a < b:
                raise GridError(f"empty domain [{a}, {b})")
        object.__setattr__(self, "n_vars", n_vars)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "domains", domains)

    @property
    def length(self):
        """Total number of tensor legs, n * R."""
        return self.n_vars * self.bits

    @property
    def local_dims(self):
        return [2] * self.length

    @property
    def points_per_var(self):
        return 2 ** self.bits

    def grid_values(self, var=0):
        a, b = self.domains[var]
        m = np.arange(self.points_per_var)
        return a + (b - a) * m / self.points_per_var


def uniform_grid(bits, lower=0.0, upper=1.0, n_vars=1):
    return QuanticsGrid(n_vars, bits, [(lower, upper)] * n_vars)


def _coord_to_int(grid, var, x):
    a, b = grid.domains[var]
    scaled = (x - a) / (b - a) * grid.points_per_var
    m = int(round(scaled))
    if abs(scaled - m) > 1e-9 * grid.points_per_var or not 0 <= m < grid.points_per_var:
        raise GridError(f"{x} is not a grid point of variable {var}")
    return m


def encode(grid: QuanticsGrid, point):
    """Grid point -> interleaved bit multi-index of length nR."""
    if len(point) != grid.n_vars:
        raise GridError("point arity mismatch")
    ints = [_coord_to_int(grid, k, x) for k, x in enumerate(point)]
    index = []
    for r in range(1, grid.bits + 1):
        for m in ints:
            index.append((m >> (grid.bits - r)) & 1)
    return tuple(index)


def decode(grid: QuanticsGrid, index):
    """Inverse of encode: bits -> (x_1, ..., x_n)."""
    if len(index) != grid.length:
        raise GridError(f"index length {len(index)} != {grid.length}")
    out = []
    for k in range(grid.n_vars):
        frac = 0.0
        for r in range(grid.bits):
            bit = index[r * grid.n_vars + k]
            if bit not in (0, 1):
                raise GridError("bits must be 0 or 1")
            frac += bit / 2.0 ** (r + 1)
        a, b = grid.domains[k]
        out.append(a + (b - a) * frac)
    return tuple(out)


def decode_many(grid: QuanticsGrid, indices):
    """Vectorized decode of an (N, nR) bit array -> (N, n) coordinates."""
    idx = np.asarray(indices)
    n, R = grid.n_vars, grid.bits
    weights = 0.5 ** np.arange(1, R + 1)
    out = np.empty((idx.shape[0], n))
    for k in range(n):
        a, b = grid.domains[k]
        frac = idx[:, k::n] @ weights
        out[:, k] = a + (b - a) * frac
    return out


def tensorize(grid: QuanticsGrid, f):
    """Wrap an n-variable scalar function as a multi-index evaluator."""
    def evaluator(index):
        return f(*decode(grid, index))
    return evaluator


def cell_volume(grid: QuanticsGrid) -> float:
    v = 1.0
    for a, b in grid.domains:
        v *= (b - a) / grid.points_per_var
    return v


def all_indices(grid: QuanticsGrid):
    """Every multi-index of the grid in lexicographic order (small grids)."""
    L = grid.length
    ints = np.arange(2 ** L)
    bits = (ints[:, None] >> np.arange(L - 1, -1, -1)) & 1
    return bits


def dense_from_function(grid: QuanticsGrid, f):
    """Dense tensor of shape (2,)*nR in interleaved bit order (small grids)."""
    idx = all_indices(grid)
    coords = decode_many(grid, idx)
    vals = np.array([f(*c) for c in coords], dtype=np.complex128)
    return vals.reshape((2,) * grid.length)
