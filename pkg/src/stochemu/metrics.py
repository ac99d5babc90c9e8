"""Validation metrics for stochastic emulators.

Marginal quality is scored by the order-2 Wasserstein distance between
simulator and emulator samples, normalized per point by the simulator's
standard deviation and averaged over a validation grid. Covariance quality
is the scaled Frobenius distance between the empirical covariance of
validation trajectories and the emulator's Mercer sum. A resampling
protocol estimates the noise floor both metrics inherit from finite
validation sampling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .basis import eval_basis
from .dist import sample_joint
from .errors import DataError
from .testbeds import ValidationSet, _trajectory_rng, make_validation_set

__all__ = [
    "ErrorReport",
    "LowerBoundBand",
    "wasserstein2",
    "eps_marg",
    "eps_cov",
    "evaluate_emulator",
    "lower_bound_band",
]


@dataclass
class LowerBoundBand:
    """Quantile summary of the sampling noise floor of the marginal error."""

    median: float
    q25: float
    q75: float
    q05: float
    q95: float
    values: np.ndarray

    def to_dict(self) -> dict:
        return {
            "median": float(self.median),
            "q25": float(self.q25),
            "q75": float(self.q75),
            "q05": float(self.q05),
            "q95": float(self.q95),
            "values": [float(v) for v in self.values],
        }


@dataclass
class ErrorReport:
    """Per-run validation summary; all entries are non-negative."""

    eps_marg: float
    eps_cov: float
    point_w2: np.ndarray
    skipped_points: int = 0
    band: LowerBoundBand | None = None

    def to_dict(self) -> dict:
        out = {
            "eps_marg": float(self.eps_marg),
            "eps_cov": float(self.eps_cov),
            "point_w2": [float(v) for v in self.point_w2],
            "skipped_points": int(self.skipped_points),
        }
        if self.band is not None:
            out["lower_bound_band"] = self.band.to_dict()
        return out


def wasserstein2(sample_a, sample_b) -> float:
    """Order-2 Wasserstein distance between two empirical distributions.

    Equal sizes reduce to the root-mean-square of sorted-sample differences;
    unequal sizes interpolate both empirical quantile functions on the
    probability midpoint grid of the larger sample.
    """
    a = np.sort(np.asarray(sample_a, dtype=float).ravel())
    b = np.sort(np.asarray(sample_b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise DataError("wasserstein2 requires non-empty samples")
    if a.size == b.size:
        d = a - b
        return float(np.sqrt(np.mean(d * d)))
    m = max(a.size, b.size)
    grid = (np.arange(m) + 0.5) / m
    qa = np.quantile(a, grid, method="hazen")
    qb = np.quantile(b, grid, method="hazen")
    d = qa - qb
    return float(np.sqrt(np.mean(d * d)))


def _eps_marg_from_samples(sim: np.ndarray, emu: np.ndarray) -> tuple[float, np.ndarray, int]:
    """Averaged normalized W2 between column-wise sample sets.

    Points whose simulator sample has zero spread contribute zero when the
    emulator matches exactly and are skipped (with a warning) otherwise.
    """
    n_points = sim.shape[1]
    ratios = []
    w2s = np.empty(n_points)
    skipped = 0
    for j in range(n_points):
        w2 = wasserstein2(sim[:, j], emu[:, j])
        w2s[j] = w2
        sd = float(np.std(sim[:, j], ddof=1))
        if sd > 0.0:
            ratios.append(w2 / sd)
        elif w2 == 0.0:
            ratios.append(0.0)
        else:
            skipped += 1
    if skipped:
        warnings.warn(
            f"{skipped} validation points with zero simulator spread were skipped",
            stacklevel=2,
        )
    if not ratios:
        raise DataError("no validation point had usable simulator spread")
    return float(np.mean(ratios)), w2s, skipped


def _emulator_values(emulator, X: np.ndarray, n_emu: int, seed) -> np.ndarray:
    """(n_emu, n_points) matrix of emulator trajectory values on the grid."""
    draws = sample_joint(emulator.dist, n_emu, seed)
    coeffs = emulator.kle.trajectory_coeffs(draws)
    psi = eval_basis(emulator.kle.indices, emulator.input_model, X)
    return (psi @ coeffs).T


def eps_marg(emulator, validation: ValidationSet, n_emu: int | None = None, seed=0) -> float:
    """Averaged normalized Wasserstein error of the marginals."""
    return evaluate_emulator(emulator, validation, n_emu=n_emu, seed=seed).eps_marg


def eps_cov(emulator, validation: ValidationSet) -> float:
    """Scaled Frobenius distance between empirical and Mercer covariances."""
    if validation.n_reps < 2:
        raise DataError("covariance validation needs at least two trajectories")
    c_emp = np.cov(validation.values, rowvar=False)
    c_mercer = emulator.covariance(validation.X)
    return float(np.linalg.norm(c_emp - c_mercer, "fro") / validation.n_points)


def evaluate_emulator(
    emulator, validation: ValidationSet, n_emu: int | None = None, seed=0
) -> ErrorReport:
    """Full error report (marginal and covariance metrics) on one validation set."""
    n_emu = validation.n_reps if n_emu is None else int(n_emu)
    emu_values = _emulator_values(emulator, validation.X, n_emu, seed)
    marg, w2s, skipped = _eps_marg_from_samples(validation.values, emu_values)
    cov = eps_cov(emulator, validation)
    return ErrorReport(eps_marg=marg, eps_cov=cov, point_w2=w2s, skipped_points=skipped)


def lower_bound_band(
    benchmark, n_points: int, n_reps: int, pairs: int = 100, seed=0
) -> LowerBoundBand:
    """Noise floor of eps_marg from independently resampled validation pairs.

    For each pair, two independent replication sets share one point grid;
    the first member acts as the reference in the normalization.
    """
    if pairs < 1:
        raise DataError("need at least one validation pair")
    values = np.empty(pairs)
    for i in range(pairs):
        seed_a = _sub_seed(seed, 2 * i)
        seed_b = _sub_seed(seed, 2 * i + 1)
        ref = make_validation_set(benchmark, n_points, n_reps, seed_a)
        other_values = _revalue_on_grid(benchmark, ref.X, n_reps, seed_b)
        values[i], _, _ = _eps_marg_from_samples(ref.values, other_values)
    q05, q25, med, q75, q95 = np.quantile(values, [0.05, 0.25, 0.5, 0.75, 0.95])
    return LowerBoundBand(med, q25, q75, q05, q95, values)


def _sub_seed(seed, index: int) -> int:
    words = np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(2)
    return (int(words[0]) << 32) | int(words[1])


def _revalue_on_grid(benchmark, X: np.ndarray, n_reps: int, seed) -> np.ndarray:
    values = np.empty((n_reps, X.shape[0]))
    for r in range(n_reps):
        rng = _trajectory_rng(seed, r)
        event = benchmark.sample_event(rng)
        values[r] = benchmark.evaluate(X, event)
    return values
