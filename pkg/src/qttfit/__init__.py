"""Noise-robust quantics tensor-train learning and its application to
ground-state-energy estimation by pseudo-imaginary-time evolution."""

from .ttcore import (
    TensorTrain,
    TruncationSpec,
    constant_tt,
    rank_one_tt,
    evaluate,
    evaluate_many,
    svd_truncate,
    elementwise_multiply,
    integrate,
    max_abs_sampled,
    tt_from_dense,
    to_dense,
    save_tt,
    load_tt,
)
from .quantics import QuanticsGrid, uniform_grid, encode, decode, tensorize, cell_volume
from .tci import TciOptions, TciResult, MeasurementLedger, cross_interpolate
