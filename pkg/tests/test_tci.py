"""Cross interpolation: exactness, ledger bookkeeping, noise behavior."""
import numpy as np

from qttfit.quantics import all_indices, decode, uniform_grid
from qttfit.tci import MeasurementLedger, TciOptions, cross_interpolate
from qttfit.ttcore import evaluate, evaluate_many


def quantics_f(grid, f):
    return lambda idx: f(decode(grid, idx)[0])


def test_exponential_is_rank_one():
    grid = uniform_grid(8, 0.0, 1.0)
    res = cross_interpolate(quantics_f(grid, lambda x: np.exp(x)),
                            grid.local_dims, TciOptions(max_bond=4))
    assert all(b == 1 for b in res.tt.bond_dims)
    assert res.error_estimate <= 1e-12


def test_constant_function_small_ledger():
    grid = uniform_grid(8, 0.0, 1.0)
    res = cross_interpolate(lambda idx: 2.5, grid.local_dims,
                            TciOptions(max_bond=4))
    assert res.error_estimate <= 1e-12
    assert len(res.ledger) <= 4 * 8 * 2 * 10  # a few * R * d


def test_noise_free_sine_exact():
    grid = uniform_grid(8, 0.0, 1.0)
    res = cross_interpolate(
        quantics_f(grid, lambda x: np.sin(2 * np.pi * x)),
        grid.local_dims, TciOptions(max_bond=4))
    idx = all_indices(grid)
    dense = np.sin(2 * np.pi * grid.grid_values())
    approx = evaluate_many(res.tt, idx)
    assert np.max(np.abs(approx - dense)) <= 1e-10


def test_interpolation_at_pivot_crosses():
    grid = uniform_grid(6, 0.0, 1.0)
    res = cross_interpolate(
        quantics_f(grid, lambda x: np.cos(3 * x) + 0.5 * x),
        grid.local_dims, TciOptions(max_bond=4))
    fmax = res.ledger.max_abs
    assert fmax > 0
    for rows, cols in res.pivots:
        for i in rows:
            for j in cols:
                idx = i + j
                resid = abs(evaluate(res.tt, idx) - res.ledger(idx))
                assert resid <= 1e-10 * fmax


def test_zero_function_degenerate():
    res = cross_interpolate(lambda idx: 0.0, [2, 2, 2],
                            TciOptions(max_bond=2))
    assert res.error_estimate == 0.0
    assert all(evaluate(res.tt, i) == 0 for i in np.ndindex(2, 2, 2))


def test_ledger_completeness():
    calls = []

    def f(idx):
        calls.append(tuple(idx))
        return np.exp(sum(idx))

    res = cross_interpolate(f, [2] * 6, TciOptions(max_bond=3))
    assert len(calls) == len(res.ledger)          # no unrecorded evaluations
    assert len(set(calls)) == len(calls)          # each index evaluated once


def test_ledger_dedupes():
    count = [0]

    def f(idx):
        count[0] += 1
        return 1.0 + sum(idx)

    ledger = MeasurementLedger(f)
    assert ledger((0, 1)) == ledger((0, 1))
    assert count[0] == 1
    assert len(ledger) == 1


def test_error_estimate_rank_one_exact():
    grid = uniform_grid(6, 0.0, 1.0)
    res = cross_interpolate(quantics_f(grid, lambda x: np.exp(-2 * x)),
                            grid.local_dims, TciOptions(max_bond=2))
    assert res.error_estimate <= 1e-12


def mean_eps_noisy_sine(sigma, seeds=20):
    grid = uniform_grid(12, 0.0, 1.0)
    epss = []
    for seed in range(seeds):
        rng = np.random.default_rng(seed)

        def f(idx, rng=rng):
            x = decode(grid, idx)[0]
            return np.sin(2 * np.pi * x) + rng.normal(0.0, sigma)

        res = cross_interpolate(f, grid.local_dims, TciOptions(max_bond=6))
        epss.append(res.error_estimate)
    return float(np.mean(epss))


def test_noisy_sine_error_sigma_01():
    eps = mean_eps_noisy_sine(0.1)
    assert 0.351 / 2 <= eps <= 0.351 * 2


def test_noisy_sine_error_sigma_001():
    eps = mean_eps_noisy_sine(0.01)
    assert 0.0381 / 2 <= eps <= 0.0381 * 2


def test_monotonic_in_max_bond():
    grid = uniform_grid(8, 0.0, 1.0)
    for f in (lambda x: np.exp(x), lambda x: np.sin(2 * np.pi * x)):
        eps = [cross_interpolate(quantics_f(grid, f), grid.local_dims,
                                 TciOptions(max_bond=chi)).error_estimate
               for chi in (1, 2, 4, 8)]
        for lo, hi in zip(eps[1:], eps[:-1]):
            assert lo <= hi + 1e-12


def test_determinism():
    grid = uniform_grid(8, 0.0, 1.0)

    def make():
        rng = np.random.default_rng(7)

        def f(idx, rng=rng):
            x = decode(grid, idx)[0]
            return np.sin(5 * x) + rng.normal(0.0, 0.05)

        return cross_interpolate(f, grid.local_dims, TciOptions(max_bond=4))

    a, b = make(), make()
    assert list(a.ledger.entries) == list(b.ledger.entries)
    for ca, cb in zip(a.tt.cores, b.tt.cores):
        np.testing.assert_array_equal(ca, cb)


def test_ledger_csv_export(tmp_path):
    res = cross_interpolate(lambda idx: sum(idx) + 0.5j, [2, 2],
                            TciOptions(max_bond=2))
    path = tmp_path / "ledger.csv"
    res.ledger.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "s0,s1,re,im"
    assert len(lines) == len(res.ledger) + 1
