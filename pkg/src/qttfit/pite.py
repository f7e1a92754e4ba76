"""Pseudo-imaginary-time evolution machinery.

The imaginary-time projector e^{-beta H} is approximated by a
kernel-weighted integral of real-time evolutions, with the kernel
g(t) = (1/pi) * beta/(beta^2 + t^2) * exp(-(beta^2 + t^2)/(2 tau^2))
truncated to t in [-T, T).  Expectation values become double integrals of
the two-time correlation function weighted by g(t)g(t') and the phase
e^{iE0(t - t')}; this module provides both the Monte Carlo estimator and
the tensor-train estimator, plus the E0-scan ground-state-energy solver.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import erfcx

from .quantics import QuanticsGrid, cell_volume, tensorize
from .tci import TciOptions, cross_interpolate
from .ttcore import (TensorTrain, TruncationSpec, elementwise_multiply,
                     integrate, rank_one_tt)


class PiteError(ValueError):
    pass


@dataclass(frozen=True)
class KernelParams:
    beta: float = 1.0
    tau: float = 2.0
    T: float = 2.0

    def __post_init__(self):
        if min(self.beta, self.tau, self.T) <= 0:
            raise PiteError("beta, tau, T must all be positive")


def kernel_g(t, p: KernelParams):
    """Lorentz-Gaussian product kernel g(t)."""
    t = np.asarray(t, dtype=float)
    val = (p.beta / (np.pi * (p.beta ** 2 + t ** 2))
           * np.exp(-(p.beta ** 2 + t ** 2) / (2.0 * p.tau ** 2)))
    return float(val) if val.ndim == 0 else val


def g_of_omega(omega, beta, tau):
    """Scalar symbol of the pseudo-projector:
    sum_eta (1/2) e^{eta*beta*omega} erfc((beta + eta*omega*tau^2)/(sqrt2 tau)).

    Evaluated through erfcx; the combined exponent
    -beta^2/(2 tau^2) - omega^2 tau^2 / 2 is the same for both branches,
    which keeps the expression finite for large |omega|.
    """
    omega = np.asarray(omega, dtype=float)
    pref = np.exp(-beta ** 2 / (2.0 * tau ** 2) - omega ** 2 * tau ** 2 / 2.0)
    s = 0.5 * (erfcx((beta + omega * tau ** 2) / (np.sqrt(2.0) * tau))
               + erfcx((beta - omega * tau ** 2) / (np.sqrt(2.0) * tau)))
    val = pref * s
    return float(val) if val.ndim == 0 else val


def gamma_G(delta_e, tau):
    """Projector replacement error bound (valid for delta_e >= beta/tau^2)."""
    return float(np.exp(-delta_e ** 2 * tau ** 2 / 2.0))


def gamma_T(beta, tau, T):
    """Finite-integration-range error bound."""
    return float(np.sqrt(2.0) * tau / (np.sqrt(np.pi) * beta)
                 * np.exp(-T ** 2 / (2.0 * tau ** 2)))


def kernel_normalization(p: KernelParams) -> float:
    """C = integral of g over [-T, T], by adaptive quadrature."""
    val, _ = quad(lambda t: kernel_g(t, p), -p.T, p.T,
                  epsabs=1e-12, epsrel=1e-12)
    return float(val)


class KernelSampler:
    """Inverse-CDF sampler for the density g/C on [-T, T).

    The cumulative is tabulated on 2^16 points; draws interpolate it
    monotonically, which is plenty below the estimator's own noise floor.
    """

    TABLE = 2 ** 16

    def __init__(self, p: KernelParams):
        self.params = p
        self.tgrid = np.linspace(-p.T, p.T, self.TABLE)
        pdf = kernel_g(self.tgrid, p)
        cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) / 2.0
                                               * np.diff(self.tgrid))])
        self.cdf = cdf / cdf[-1]

    def draw(self, rng, n):
        return np.interp(rng.random(n), self.cdf, self.tgrid)


def mc_estimate(correlator, p: KernelParams, e0, n_samples, seed) -> complex:
    """Monte Carlo value of the kernel-weighted double integral:
    C^2/N * sum_i e^{iE0(t_i - t'_i)} correlator(t_i, t'_i) with t, t'
    drawn independently from g/C."""
    if n_samples < 1:
        raise PiteError("n_samples must be >= 1")
    C = kernel_normalization(p)
    sampler = KernelSampler(p)
    rng = np.random.default_rng(seed)
    ts = sampler.draw(rng, n_samples)
    tps = sampler.draw(rng, n_samples)
    acc = 0.0 + 0.0j
    for t, tp in zip(ts, tps):
        acc += np.exp(1j * e0 * (t - tp)) * correlator(t, tp)
    return complex(C * C / n_samples * acc)


def build_phase_tt(e0, grid: QuanticsGrid) -> TensorTrain:
    """Rank-1 quantics TT of e^{iE0(t - t')} on a 2-variable grid.

    Variable 0 is t, variable 1 is t'; each bit contributes its own phase
    factor and the domain offsets ride on the scale-1 cores.
    """
    if grid.n_vars != 2:
        raise PiteError("phase TT needs a 2-variable grid")
    factors = []
    signs = (1.0, -1.0)
    for r in range(grid.bits):
        for k in range(2):
            a, b = grid.domains[k]
            w = (b - a) / 2.0 ** (r + 1)
            f = np.array([1.0, np.exp(1j * signs[k] * e0 * w)])
            if r == 0:
                f = f * np.exp(1j * signs[k] * e0 * a)
            factors.append(f)
    return rank_one_tt(factors)


def tt_estimate(corr_tt: TensorTrain, kernel_tt: TensorTrain, e0,
                grid: QuanticsGrid, spec: TruncationSpec | None = None) -> complex:
    """Tensor-train value of the kernel-weighted double integral: phase TT
    times kernel TT times correlation TT, integrated by contraction."""
    prod = elementwise_multiply(kernel_tt, corr_tt, spec)
    prod = elementwise_multiply(build_phase_tt(e0, grid), prod, spec)
    return integrate(prod, cell_volume(grid))


def time_grid(p: KernelParams, bits) -> QuanticsGrid:
    """The (t, t') quantics grid on [-T, T)^2."""
    return QuanticsGrid(2, bits, [(-p.T, p.T), (-p.T, p.T)])


def kernel_tt(grid: QuanticsGrid, p: KernelParams, tci_tolerance=1e-5,
              max_bond=30):
    """QTT of g(t)g(t') learned by cross interpolation at tci_tolerance."""
    f = tensorize(grid, lambda t, tp: kernel_g(t, p) * kernel_g(tp, p))
    res = cross_interpolate(f, grid.local_dims,
                            TciOptions(max_bond=max_bond,
                                       tolerance=tci_tolerance))
    return res.tt


@dataclass(frozen=True)
class EnergyScan:
    center: float
    half_width: float = 2.0
    steps: int = 40

    def __post_init__(self):
        if self.half_width <= 0 or self.steps < 1:
            raise PiteError("half_width and steps must be positive")

    def grid_points(self):
        return np.linspace(self.center - self.half_width,
                           self.center + self.half_width, self.steps + 1)


@dataclass
class EstimatorOutput:
    e0: float
    numerator: complex
    denominator: complex
    ratio: complex
    valid: bool


@dataclass
class EnergyScanResult:
    points: list = field(default_factory=list)  # EstimatorOutput per E0
    estimate: float = float("nan")
    minimizer_e0: float = float("nan")

    @property
    def e0_values(self):
        return np.array([p.e0 for p in self.points])

    @property
    def ratios_real(self):
        return np.array([p.ratio.real for p in self.points])


def energy_scan(corr_num_tt: TensorTrain, corr_den_tt: TensorTrain,
                kernel_tt: TensorTrain, scan: EnergyScan,
                grid: QuanticsGrid,
                spec: TruncationSpec | None = None) -> EnergyScanResult:
    """E0 scan of the estimator ratio.

    The kernel-times-correlator products are formed once; each E0 point
    only rebuilds the rank-1 phase TT and integrates.  Points where the
    denominator magnitude is below 1e-12 are flagged and excluded from
    the minimum.
    """
    gh = elementwise_multiply(kernel_tt, corr_num_tt, spec)
    g1 = elementwise_multiply(kernel_tt, corr_den_tt, spec)
    vol = cell_volume(grid)
    result = EnergyScanResult()
    for e0 in scan.grid_points():
        phase = build_phase_tt(e0, grid)
        num = integrate(elementwise_multiply(phase, gh, spec), vol)
        den = integrate(elementwise_multiply(phase, g1, spec), vol)
        valid = abs(den) >= 1e-12
        ratio = num / den if valid else complex(float("nan"), float("nan"))
        result.points.append(EstimatorOutput(float(e0), num, den, ratio, valid))
    valid_pts = [p for p in result.points if p.valid]
    if valid_pts:
        best = min(valid_pts, key=lambda p: p.ratio.real)
        result.estimate = best.ratio.real
        result.minimizer_e0 = best.e0
    return result


def mc_energy_scan(correlator_num, correlator_den, p: KernelParams,
                   scan: EnergyScan, n_num, n_den, seed) -> EnergyScanResult:
    """Monte Carlo counterpart of energy_scan at a matched budget.

    The correlators are sampled once (n_num and n_den evaluations); every
    E0 point reweights the same samples with its phase, so the number of
    simulator calls matches the tensor-train pipeline's ledger sizes.
    """
    C = kernel_normalization(p)
    sampler = KernelSampler(p)
    rng = np.random.default_rng(seed)
    sets = {}
    for tag, corr, n in (("num", correlator_num, n_num),
                         ("den", correlator_den, n_den)):
        ts = sampler.draw(rng, n)
        tps = sampler.draw(rng, n)
        vals = np.array([corr(t, tp) for t, tp in zip(ts, tps)],
                        dtype=np.complex128)
        sets[tag] = (ts, tps, vals)
    result = EnergyScanResult()
    for e0 in scan.grid_points():
        parts = {}
        for tag in ("num", "den"):
            ts, tps, vals = sets[tag]
            w = np.exp(1j * e0 * (ts - tps))
            parts[tag] = complex(C * C / len(vals) * np.sum(w * vals))
        valid = abs(parts["den"]) >= 1e-12
        ratio = parts["num"] / parts["den"] if valid else complex(float("nan"), float("nan"))
        result.points.append(
            EstimatorOutput(float(e0), parts["num"], parts["den"], ratio, valid))
    valid_pts = [p for p in result.points if p.valid]
    if valid_pts:
        best = min(valid_pts, key=lambda q: q.ratio.real)
        result.estimate = best.ratio.real
        result.minimizer_e0 = best.e0
    return result
