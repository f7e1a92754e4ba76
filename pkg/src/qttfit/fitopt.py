"""Three-step noise-robust TT learning.

Step (a): cross interpolation at bond cap chi_tilde, recording every
function evaluation in the ledger.  Step (b): SVD compression of the
interpolant down to chi, giving the initial guess.  Step (c): nonlinear
least-squares optimization of all core entries against the ledger.

The cost is sum_i |z_i - tt(sigma_i)|^2 over the ledger.  Its gradient is
computed analytically per sample from cached left/right boundary
environments, vectorized over the whole ledger.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .quantics import QuanticsGrid, tensorize
from .tci import MeasurementLedger, TciOptions, cross_interpolate
from .ttcore import TensorTrain, TruncationSpec, svd_truncate


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitPlan:
    chi_tilde: int = 6
    chi: int = 2
    n_itr: int = 500
    convergence_tol: float = 1e-12
    tci_tolerance: float = 0.0
    max_sweeps: int = 6

    def __post_init__(self):
        if self.chi < 1 or self.chi > self.chi_tilde:
            raise FitError("need 1 <= chi <= chi_tilde")
        if self.n_itr < 1:
            raise FitError("n_itr must be >= 1")


@dataclass
class FitReport:
    tt_itpl: TensorTrain
    tt_init: TensorTrain
    tt_opt: TensorTrain
    ledger: MeasurementLedger
    cost_trace: list
    final_cost: float
    eps_tci: float
    converged: bool

    def summary(self):
        return {
            "n_tci": len(self.ledger),
            "eps_tci": self.eps_tci,
            "bond_dims_itpl": self.tt_itpl.bond_dims,
            "bond_dims_opt": self.tt_opt.bond_dims,
            "initial_cost": self.cost_trace[0] if self.cost_trace else None,
            "final_cost": self.final_cost,
            "iterations": len(self.cost_trace) - 1,
            "converged": self.converged,
        }

    def save_summary(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


# -- parameter vector <-> cores ---------------------------------------------
# Complex core entries are optimized as independent (re, im) pairs; the
# interleaved layout is exactly the complex128 memory layout, so packing is
# a reinterpreting view.

def pack_parameters(tt: TensorTrain) -> np.ndarray:
    return np.concatenate(
        [np.ascontiguousarray(c).ravel().view(np.float64) for c in tt.cores])


def unpack_parameters(theta, shapes) -> TensorTrain:
    cores = []
    off = 0
    for shape in shapes:
        n = 2 * int(np.prod(shape))
        cores.append(np.ascontiguousarray(theta[off:off + n])
                     .view(np.complex128).reshape(shape))
        off += n
    if off != len(theta):
        raise FitError("parameter vector length mismatch")
    return TensorTrain(cores)


def _ledger_arrays(tt, ledger):
    idx = ledger.indices()
    if idx.size == 0:
        raise FitError("ledger is empty")
    if idx.shape[1] != len(tt):
        raise FitError("ledger index arity does not match the TT")
    return idx, ledger.values()


def cost(tt: TensorTrain, ledger) -> float:
    idx, z = _ledger_arrays(tt, ledger)
    c, _ = _cost_and_envs(tt.cores, idx, z, need_grad=False)
    return c


def gradient(tt: TensorTrain, ledger) -> np.ndarray:
    """Exact gradient of the cost w.r.t. the packed (re, im) parameters."""
    idx, z = _ledger_arrays(tt, ledger)
    _, grads = _cost_and_envs(tt.cores, idx, z, need_grad=True)
    return np.concatenate([g.ravel().view(np.float64) for g in grads])


def _cost_and_envs(cores, idx, z, need_grad):
    N = idx.shape[0]
    L = len(cores)
    slices = [np.ascontiguousarray(np.moveaxis(c[:, idx[:, l], :], 1, 0))
              for l, c in enumerate(cores)]  # (N, chiL, chiR) each
    lenvs = [np.ones((N, 1), dtype=np.complex128)]
    for a in slices:
        lenvs.append(np.einsum("ni,nij->nj", lenvs[-1], a))
    vals = lenvs[-1][:, 0]
    r = vals - z
    c = float(np.sum(np.abs(r) ** 2).real)
    if not need_grad:
        return c, None
    renvs = [None] * (L + 1)
    renvs[L] = np.ones((N, 1), dtype=np.complex128)
    for l in range(L - 1, -1, -1):
        renvs[l] = np.einsum("nij,nj->ni", slices[l], renvs[l + 1])
    rbar = np.conj(r)
    grads = []
    for l, core in enumerate(cores):
        g = np.zeros_like(core)
        sl = idx[:, l]
        for s in range(core.shape[1]):
            m = sl == s
            if not np.any(m):
                continue
            g[:, s, :] = np.einsum("n,ni,nj->ij", rbar[m],
                                   lenvs[l][m], renvs[l + 1][m])
        # d cost / d re(a) = 2 Re(conj(r) E), d cost / d im(a) = -2 Im(...)
        grads.append(2.0 * np.conj(g))
    return c, grads


def optimize(tt_init: TensorTrain, ledger, plan: FitPlan):
    """Limited-memory quasi-Newton fit of all core entries to the ledger.

    Returns (tt_opt, cost_trace, converged).  The best-cost iterate seen is
    returned, so the final cost never exceeds the initial one; a line-search
    failure is reported through the flag, not an exception.
    """
    idx, z = _ledger_arrays(tt_init, ledger)
    shapes = [c.shape for c in tt_init.cores]

    def fun(theta):
        tt = unpack_parameters(theta, shapes)
        c, grads = _cost_and_envs(tt.cores, idx, z, need_grad=True)
        return c, np.concatenate([g.ravel().view(np.float64) for g in grads])

    theta0 = pack_parameters(tt_init)
    c0 = fun(theta0)[0]
    trace = [c0]
    best = {"theta": theta0.copy(), "cost": c0}

    def callback(theta):
        c = _cost_and_envs(unpack_parameters(theta, shapes).cores,
                           idx, z, need_grad=False)[0]
        trace.append(c)
        if c < best["cost"]:
            best["cost"] = c
            best["theta"] = theta.copy()

    res = minimize(fun, theta0, jac=True, method="L-BFGS-B",
                   callback=callback,
                   options={"maxiter": plan.n_itr, "maxcor": 10,
                            "ftol": plan.convergence_tol, "gtol": 1e-14})
    if res.fun < best["cost"]:
        best["cost"] = float(res.fun)
        best["theta"] = res.x.copy()
    return unpack_parameters(best["theta"], shapes), trace, bool(res.success)


def fit_pipeline(evaluator, grid: QuanticsGrid, plan: FitPlan,
                 pivot_seed=None) -> FitReport:
    """Run all three learning steps against a (possibly noisy) evaluator.

    The evaluator maps a grid point (n reals) to a scalar; randomness must
    be baked in by the caller so that identical inputs replay identically.
    """
    target = tensorize(grid, evaluator)
    opts = TciOptions(max_bond=plan.chi_tilde, tolerance=plan.tci_tolerance,
                      max_sweeps=plan.max_sweeps, pivot_seed=pivot_seed)
    tci_res = cross_interpolate(target, grid.local_dims, opts)
    tt_init = svd_truncate(tci_res.tt, TruncationSpec(max_bond=plan.chi))
    tt_opt, trace, ok = optimize(tt_init, tci_res.ledger, plan)
    return FitReport(tt_itpl=tci_res.tt, tt_init=tt_init, tt_opt=tt_opt,
                     ledger=tci_res.ledger, cost_trace=trace,
                     final_cost=cost(tt_opt, tci_res.ledger),
                     eps_tci=tci_res.error_estimate, converged=ok)
