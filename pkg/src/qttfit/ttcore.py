"""Tensor-train data structure and core operations.

A tensor train (TT) is stored as a list of order-3 complex cores, core l
shaped (chi_{l-1}, d_l, chi_l) with boundary bonds of size 1.  All
operations are pure: they return new TensorTrain objects and never mutate
their inputs.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np


class TTError(ValueError):
    """Domain error for invalid TT inputs (shape mismatch, bad index)."""


@dataclass(frozen=True)
class TruncationSpec:
    """SVD truncation control.

    max_bond: bond-dimension cap (None = unlimited).
    tolerance: relative squared-Frobenius error budget for the whole chain.
    At least one of the two must be finite.
    """

    max_bond: int | None = None
    tolerance: float = 0.0

    def __post_init__(self):
        if self.max_bond is None and not np.isfinite(self.tolerance):
            raise TTError("TruncationSpec needs a finite max_bond or tolerance")
        if self.max_bond is not None and self.max_bond < 1:
            raise TTError("max_bond must be >= 1")
        if self.tolerance < 0:
            raise TTError("tolerance must be nonnegative")


@dataclass(frozen=True)
class TensorTrain:
    cores: tuple = field()

    def __init__(self, cores):
        cores = tuple(np.ascontiguousarray(c, dtype=np.complex128) for c in cores)
        if not cores:
            raise TTError("TT needs at least one core")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise TTError("boundary bond dimensions must be 1")
        for c in cores:
            if c.ndim != 3:
                raise TTError("cores must be order-3 arrays")
            if c.shape[1] < 1:
                raise TTError("local dimensions must be >= 1")
        for a, b in zip(cores[:-1], cores[1:]):
            if a.shape[2] != b.shape[0]:
                raise TTError(
                    f"adjacent bond mismatch: {a.shape} vs {b.shape}")
        object.__setattr__(self, "cores", cores)

    def __len__(self):
        return len(self.cores)

    @property
    def local_dims(self):
        return [c.shape[1] for c in self.cores]

    @property
    def bond_dims(self):
        """Bond dimensions including the two boundary 1s (length L+1)."""
        return [self.cores[0].shape[0]] + [c.shape[2] for c in self.cores]

    @property
    def max_bond(self):
        return max(self.bond_dims)

    def __call__(self, index):
        return evaluate(self, index)


def constant_tt(dims, value):
    """Rank-1 TT that evaluates to `value` at every index."""
    cores = [np.ones((1, d, 1), dtype=np.complex128) for d in dims]
    cores[0] *= value
    return TensorTrain(cores)


def rank_one_tt(factors):
    """Rank-1 TT from per-site vectors: tt(s) = prod_l factors[l][s_l]."""
    return TensorTrain([np.asarray(f, dtype=np.complex128).reshape(1, -1, 1)
                        for f in factors])


def evaluate(tt: TensorTrain, index) -> complex:
    """Contract the chain of core slices selected by a multi-index."""
    if len(index) != len(tt):
        raise TTError(f"index length {len(index)} != {len(tt)} cores")
    v = np.ones(1, dtype=np.complex128)
    for s, core in zip(index, tt.cores):
        s = int(s)
        if not 0 <= s < core.shape[1]:
            raise TTError(f"index value {s} out of range [0, {core.shape[1]})")
        v = v @ core[:, s, :]
    return complex(v[0])


def evaluate_many(tt: TensorTrain, indices) -> np.ndarray:
    """Vectorized evaluation at an (N, L) integer index array."""
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 2 or idx.shape[1] != len(tt):
        raise TTError("indices must be an (N, L) array")
    v = np.ones((idx.shape[0], 1), dtype=np.complex128)
    for l, core in enumerate(tt.cores):
        a = core[:, idx[:, l], :]                     # (chiL, N, chiR)
        v = np.einsum("ni,inj->nj", v, a)
    return v[:, 0]


def to_dense(tt: TensorTrain) -> np.ndarray:
    """Full tensor of shape local_dims; only for small L."""
    out = tt.cores[0]
    for core in tt.cores[1:]:
        out = np.tensordot(out, core, axes=[[out.ndim - 1], [0]])
    return out[0, ..., 0]


def tt_from_dense(arr, spec: TruncationSpec | None = None) -> TensorTrain:
    """Exact TT from a dense tensor via successive SVDs, then truncation."""
    arr = np.asarray(arr, dtype=np.complex128)
    dims = arr.shape
    cores = []
    m = arr.reshape(1, -1)
    chi = 1
    for d in dims[:-1]:
        m = m.reshape(chi * d, -1)
        q, r = np.linalg.qr(m)
        cores.append(q.reshape(chi, d, q.shape[1]))
        chi = q.shape[1]
        m = r
    cores.append(m.reshape(chi, dims[-1], 1))
    tt = TensorTrain(cores)
    if spec is not None:
        tt = svd_truncate(tt, spec)
    return tt


def frobenius_norm(tt: TensorTrain) -> float:
    """|tt|_F via transfer-matrix contraction."""
    env = np.ones((1, 1), dtype=np.complex128)
    for core in tt.cores:
        env = np.einsum("ab,asi,bsj->ij", env, np.conj(core), core)
    return float(np.sqrt(abs(env[0, 0])))


def _right_canonicalize(cores):
    """Sweep right-to-left with LQ so every core but the first is
    right-orthogonal; afterwards the total norm sits in core 0."""
    cores = [c.copy() for c in cores]
    for l in range(len(cores) - 1, 0, -1):
        chiL, d, chiR = cores[l].shape
        m = cores[l].reshape(chiL, d * chiR)
        # LQ via QR of the conjugate transpose
        q, r = np.linalg.qr(m.conj().T)
        k = q.shape[1]
        cores[l] = q.conj().T.reshape(k, d, chiR)
        cores[l - 1] = np.tensordot(cores[l - 1], r.conj().T, axes=[[2], [0]])
    return cores


def svd_truncate(tt: TensorTrain, spec: TruncationSpec) -> TensorTrain:
    """Compress a TT by SVD.

    The input is right-canonicalized first, so the singular values at each
    bond during the left-to-right truncation sweep are those of the full
    tensor unfolding; the discarded squared energy is the exact local
    squared-Frobenius error.  The total discarded energy is kept within
    tolerance * |tt|_F^2 (then capped at max_bond).  Output is
    left-canonical except the final core.
    """
    cores = _right_canonicalize(tt.cores)
    total_sq = float(np.linalg.norm(cores[0]) ** 2)  # norm gathered in core 0
    budget = spec.tolerance * total_sq
    out = []
    carry = np.ones((1, 1), dtype=np.complex128)
    for l, core in enumerate(cores):
        core = np.tensordot(carry, core, axes=[[1], [0]])
        if l == len(cores) - 1:
            out.append(core)
            break
        chiL, d, chiR = core.shape
        u, s, vh = np.linalg.svd(core.reshape(chiL * d, chiR),
                                 full_matrices=False)
        # smallest rank whose discarded tail fits the remaining budget
        tail = np.cumsum(s[::-1] ** 2)[::-1]          # tail[k] = sum_{i>=k} s_i^2
        keep = len(s)
        for k in range(len(s), 0, -1):
            if tail[k - 1] <= budget + 1e-300:
                keep = k - 1
            else:
                break
        keep = max(1, keep)
        if spec.max_bond is not None:
            keep = min(keep, spec.max_bond)
        discarded = float(tail[keep]) if keep < len(s) else 0.0
        budget = max(0.0, budget - discarded)
        out.append(u[:, :keep].reshape(chiL, d, keep))
        carry = s[:keep, None] * vh[:keep, :]
    return TensorTrain(out)


def elementwise_multiply(a: TensorTrain, b: TensorTrain,
                         spec: TruncationSpec | None = None) -> TensorTrain:
    """Hadamard product of two TTs.

    Core l of the result carries the delta-diagonal MPO form of `a`
    contracted with core l of `b`: bond dimensions multiply
    (chi_a * chi_b) before the optional truncation.
    """
    if len(a) != len(b) or a.local_dims != b.local_dims:
        raise TTError("element-wise multiply needs matching shapes")
    cores = []
    for ca, cb in zip(a.cores, b.cores):
        la, d, ra = ca.shape
        lb, _, rb = cb.shape
        c = np.einsum("isj,ksl->iksjl", ca, cb).reshape(la * lb, d, ra * rb)
        cores.append(c)
    out = TensorTrain(cores)
    if spec is not None:
        out = svd_truncate(out, spec)
    return out


def integrate(tt: TensorTrain, cell_volume: float) -> complex:
    """Riemann sum: cell_volume times the sum of all tensor entries,
    computed by contracting each core with an all-ones vector."""
    v = np.ones(1, dtype=np.complex128)
    for core in tt.cores:
        v = v @ core.sum(axis=1)
    return complex(cell_volume * v[0])


def max_abs_sampled(tt: TensorTrain, sample_indices) -> float:
    """max |tt(sigma)| over a nonempty sample set."""
    idx = np.asarray(sample_indices, dtype=np.intp)
    if idx.size == 0:
        raise TTError("sample set must be nonempty")
    return float(np.max(np.abs(evaluate_many(tt, idx))))


# ---------------------------------------------------------------------------
# Serialization: self-describing binary container with little-endian 64-bit
# fields.  Layout: magic, L, then per core (3 x uint64 shape, row-major
# complex data as float64 re/im pairs).

_MAGIC = b"QTTRAIN1"


def save_tt(tt: TensorTrain, path):
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(tt)))
        for core in tt.cores:
            fh.write(struct.pack("<QQQ", *core.shape))
            data = np.ascontiguousarray(core).view(np.float64)
            fh.write(data.astype("<f8", copy=False).tobytes())


def load_tt(path) -> TensorTrain:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise TTError(f"{path}: not a TT container")
        (L,) = struct.unpack("<Q", fh.read(8))
        cores = []
        for _ in range(L):
            shape = struct.unpack("<QQQ", fh.read(24))
            n = shape[0] * shape[1] * shape[2]
            raw = np.frombuffer(fh.read(16 * n), dtype="<f8")
            cores.append(raw.astype(np.float64).view(np.complex128)
                         .reshape(shape))
    return TensorTrain(cores)
