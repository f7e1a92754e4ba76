"""Tensor cross interpolation with a measurement ledger.

Builds a TT by 2-site sweeping cross interpolation.  At each bond the
candidate block spanned by the current row/column pivot sets is fully
evaluated (through a caching ledger, so no index is ever measured twice)
and pivots are selected greedily by complete-pivot rank-revealing LU:
repeatedly pick the element of maximum residual magnitude until the bond
cap is hit or the residual falls below tolerance.

The resulting TT interpolates the target exactly at the pivot crosses;
everything the target was asked for ends up in the ledger, which is the
fitting dataset for the downstream least-squares optimization.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .ttcore import TensorTrain, constant_tt


class TciError(ValueError):
    pass


@dataclass(frozen=True)
class TciOptions:
    max_bond: int = 8
    tolerance: float = 0.0
    max_sweeps: int = 6
    pivot_seed: tuple | None = None  # initial multi-index, default all zeros
    # global-pivot enrichment: per round, `probes` random indices are
    # measured and the worst-residual index is inserted into every bond's
    # pivot sets.  This breaks the pivot starvation that 2-site sweeps
    # suffer on (near-)product functions, where every candidate block
    # spanned by singleton pivot sets is exactly rank 1.
    global_rounds: int = 4
    probes: int = 32
    # number of initial sweeps that re-derive each bond's pivot sets from
    # scratch by complete-pivot LU; later sweeps only ever add pivots.
    # Full re-derivation picks large pivots (good conditioning under
    # noise) but churns the pivot sets, so it is limited to a few sweeps
    # to keep the number of function evaluations bounded.
    full_pivot_sweeps: int = 2

    def __post_init__(self):
        if self.max_bond < 1:
            raise TciError("max_bond must be >= 1")
        if self.max_sweeps < 1:
            raise TciError("max_sweeps must be >= 1")


class MeasurementLedger:
    """Caching evaluator wrapper: every distinct index is evaluated exactly
    once and remembered with its (possibly noisy) value."""

    def __init__(self, evaluator):
        self._evaluator = evaluator
        self.entries: dict[tuple, complex] = {}
        self.max_abs = 0.0

    def __len__(self):
        return len(self.entries)

    def __call__(self, index):
        index = tuple(int(s) for s in index)
        v = self.entries.get(index)
        if v is None:
            v = complex(self._evaluator(index))
            self.entries[index] = v
            if abs(v) > self.max_abs:
                self.max_abs = abs(v)
        return v

    def indices(self):
        return np.array(list(self.entries.keys()), dtype=np.intp)

    def values(self):
        return np.array(list(self.entries.values()), dtype=np.complex128)

    def to_csv(self, path):
        L = len(next(iter(self.entries))) if self.entries else 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"s{l}" for l in range(L)] + ["re", "im"])
            for idx, v in self.entries.items():
                w.writerow(list(idx) + [repr(v.real), repr(v.imag)])


@dataclass
class TciResult:
    tt: TensorTrain
    ledger: MeasurementLedger
    pivots: list = field(default_factory=list)  # per bond: (rows, cols)
    error_estimate: float = 0.0


def _lu_pivots(block, max_rank, abs_tol):
    """Greedy complete-pivot LU on a dense block.

    Returns the selected (row, col) positions in order.  Stops when
    max_rank pivots are chosen or the largest residual drops to abs_tol.
    """
    resid = np.array(block, dtype=np.complex128)
    pivots = []
    for _ in range(min(max_rank, *resid.shape)):
        flat = np.argmax(np.abs(resid))
        r, c = np.unravel_index(flat, resid.shape)
        p = resid[r, c]
        if abs(p) <= abs_tol:
            break
        pivots.append((int(r), int(c)))
        resid = resid - np.outer(resid[:, c], resid[r, :]) / p
    return pivots


def cross_interpolate(evaluator, dims, opts: TciOptions) -> TciResult:
    """Build a TT approximation of `evaluator` over the index box `dims`.

    The evaluator is called through a MeasurementLedger; the returned TT
    interpolates the ledger values exactly at the chosen pivot crosses.
    """
    dims = list(dims)
    L = len(dims)
    if L == 0:
        raise TciError("dims must be nonempty")
    ledger = MeasurementLedger(evaluator)
    seed = tuple(opts.pivot_seed) if opts.pivot_seed is not None else (0,) * L
    if len(seed) != L:
        raise TciError("pivot_seed length mismatch")

    # Iset[b]: prefixes over sites 0..b, Jset[b]: suffixes over sites b..L-1.
    Iset = [[seed[: b + 1]] for b in range(L - 1)]
    Jset = [[seed[b:]] for b in range(1, L)]
    ledger(seed)

    def block(b):
        rows = [i + (s,) for i in (Iset[b - 1] if b > 0 else [()])
                for s in range(dims[b])]
        cols = [(s,) + j for s in range(dims[b + 1])
                for j in (Jset[b + 1] if b + 1 < L - 1 else [()])]
        vals = np.empty((len(rows), len(cols)), dtype=np.complex128)
        for ri, r in enumerate(rows):
            for ci, c in enumerate(cols):
                vals[ri, ci] = ledger(r + c)
        return rows, cols, vals

    def update_bond(b, keep):
        """Rank-revealing pivot update at bond b.

        With keep=True the existing pivots are retained (sets only grow,
        which preserves nesting and keeps the evaluation count from
        churning on noisy targets); with keep=False they are re-derived
        from scratch.  Either way, new pivots are added greedily at the
        maximum-residual element of the block until the bond cap is hit
        or the residual drops below tolerance."""
        rows, cols, vals = block(b)
        row_pos = {r: i for i, r in enumerate(rows)}
        col_pos = {c: i for i, c in enumerate(cols)}
        resid = np.array(vals)
        # floor prevents promoting roundoff-level residuals to pivots,
        # which would make the pivot matrices numerically singular
        abs_tol = max(opts.tolerance, 1e-13) * ledger.max_abs
        kept_I, kept_J = [], []
        if keep:
            for i_pre, j_suf in zip(Iset[b], Jset[b]):
                ri, ci = row_pos.get(i_pre), col_pos.get(j_suf)
                if ri is None or ci is None or len(kept_I) >= opts.max_bond:
                    continue
                pv = resid[ri, ci]
                if abs(pv) <= 1e-13 * ledger.max_abs:
                    continue  # degenerate (e.g. duplicated) pivot: drop it
                kept_I.append(i_pre)
                kept_J.append(j_suf)
                resid = resid - np.outer(resid[:, ci], resid[ri, :]) / pv
        cap = min(opts.max_bond, len(rows), len(cols))
        while len(kept_I) < cap:
            r, c = np.unravel_index(int(np.argmax(np.abs(resid))),
                                    resid.shape)
            pv = resid[r, c]
            if abs(pv) <= abs_tol:
                break
            kept_I.append(rows[r])
            kept_J.append(cols[c])
            resid = resid - np.outer(resid[:, c], resid[r, :]) / pv
        changed = kept_I != Iset[b] or kept_J != Jset[b]
        if kept_I:
            Iset[b], Jset[b] = kept_I, kept_J
        return changed

    def sweep_until_stable():
        for sweep in range(opts.max_sweeps):
            keep = sweep >= opts.full_pivot_sweeps
            changed = False
            for b in list(range(L - 1)) + list(range(L - 2, -1, -1)):
                changed |= update_bond(b, keep)
            if not changed and keep:
                break

    sweep_until_stable()
    probe_rng = np.random.default_rng(0x7C1)
    for _ in range(opts.global_rounds):
        if all(len(Iset[b]) >= opts.max_bond for b in range(L - 1)):
            break  # no capacity left at any bond
        tt = _build_tt(ledger, dims, Iset, Jset)
        fresh = probe_rng.integers(0, np.array(dims), size=(opts.probes, L))
        for row in fresh:
            ledger(tuple(int(s) for s in row))
        cand = ledger.indices()
        from .ttcore import evaluate_many
        resid = np.abs(ledger.values() - evaluate_many(tt, cand))
        worst = int(np.argmax(resid))
        if resid[worst] <= max(opts.tolerance, 1e-13) * ledger.max_abs:
            break
        wi = tuple(int(s) for s in cand[worst])
        for b in range(L - 1):
            if len(Iset[b]) >= opts.max_bond:
                continue
            if wi[: b + 1] not in Iset[b]:
                Iset[b].append(wi[: b + 1])
            if wi[b + 1:] not in Jset[b]:
                Jset[b].append(wi[b + 1:])
        sweep_until_stable()

    tt = _build_tt(ledger, dims, Iset, Jset)
    eps = error_estimate(tt, ledger)
    pivots = [(list(Iset[b]), list(Jset[b])) for b in range(L - 1)]
    return TciResult(tt=tt, ledger=ledger, pivots=pivots, error_estimate=eps)


def _build_tt(ledger, dims, Iset, Jset):
    """Assemble the cross-interpolation TT:
    core_b = F(I_{b-1}, sigma_b, J_b) P_b^{-1}, P_b = F(I_b, J_b)."""
    if ledger.max_abs == 0.0:
        return constant_tt(dims, 0.0)
    L = len(dims)
    cores = []
    for b in range(L):
        left = Iset[b - 1] if b > 0 else [()]
        right = Jset[b] if b < L - 1 else [()]
        T = np.empty((len(left), dims[b], len(right)), dtype=np.complex128)
        for li, i in enumerate(left):
            for s in range(dims[b]):
                for rj, j in enumerate(right):
                    T[li, s, rj] = ledger(i + (s,) + j)
        if b < L - 1:
            P = np.empty((len(Iset[b]), len(Jset[b])), dtype=np.complex128)
            for li, i in enumerate(Iset[b]):
                for rj, j in enumerate(Jset[b]):
                    P[li, rj] = ledger(i + j)
            # T P^{-1} by LU solve with partial pivoting (P is square by
            # construction: rows and columns come from the same LU pass)
            lu, piv = scipy.linalg.lu_factor(P)
            sol = scipy.linalg.lu_solve((lu, piv), T.reshape(-1, P.shape[1]).T,
                                        trans=1).T
            T = sol.reshape(T.shape)
        cores.append(T)
    return TensorTrain(cores)


def error_estimate(tt: TensorTrain, ledger: MeasurementLedger) -> float:
    """Max normalized residual over all measured points."""
    if len(ledger) == 0:
        raise TciError("ledger is empty")
    if ledger.max_abs == 0.0:
        return 0.0
    from .ttcore import evaluate_many
    approx = evaluate_many(tt, ledger.indices())
    return float(np.max(np.abs(ledger.values() - approx)) / ledger.max_abs)
