"""Assembly and querying of the stochastic emulator.

The fitting pipeline chains the stages: sparse PCE per trajectory, joint
regressor set with OLS re-fit, centering, eigendecomposition in coefficient
space, truncation, analytical KL-coordinate realizations, and joint
inference of their distribution. The assembled emulator answers mean,
covariance (truncated Mercer sum), marginal-sample and trajectory-resampling
queries, and serializes losslessly to JSON.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import InputModel, eval_basis
from .dist import JointDistModel, fit_joint, sample_joint
from .errors import SchemaError, StageError, StochemuError
from .kle import KleModel, build_joint_basis, build_kle_model
from .pce import FitConfig, PceModel, fit_sparse
from .testbeds import TrajectorySet

__all__ = [
    "SCHEMA_VERSION",
    "CompressionResult",
    "StochasticEmulator",
    "PceKdeBaseline",
    "compress_trajectories",
    "fit_emulator",
    "emulator_from_compression",
    "fit_pce_kde_baseline",
]

SCHEMA_VERSION = "1"


@dataclass
class CompressionResult:
    """Steps 1-3 of the pipeline: shared-basis OLS trajectories plus diagnostics."""

    kle: KleModel
    input_model: InputModel
    per_trajectory_loo: list[float]
    refit_coeffs: np.ndarray  # (P, R) uncentered shared-basis coefficients
    timings: dict[str, float]

    @property
    def n_regressors(self) -> int:
        return len(self.kle.indices)


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StochemuError as exc:
        raise StageError(name, str(exc)) from exc


def compress_trajectories(
    data: TrajectorySet, cfg: FitConfig, epsilon: float
) -> CompressionResult:
    """Sparse-fit every trajectory, build the joint basis, and run the KLE."""
    input_model = data.input_model
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    models = [
        _stage("pce", fit_sparse, t.X, t.y, input_model, cfg) for t in data.trajectories
    ]
    timings["pce"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    trajectories = [(t.X, t.y) for t in data.trajectories]
    jb = _stage(
        "joint-basis",
        build_joint_basis,
        models,
        trajectories,
        input_model,
        data.min_design_size,
    )
    timings["joint-basis"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    kle = _stage("kle", build_kle_model, jb, epsilon)
    timings["kle"] = time.perf_counter() - t0

    refit = jb.coeff_matrix + jb.mean_coeffs[:, None]
    return CompressionResult(
        kle=kle,
        input_model=input_model,
        per_trajectory_loo=[m.loo_error for m in models],
        refit_coeffs=refit,
        timings=timings,
    )


@dataclass
class StochasticEmulator:
    """Spectral surrogate of a stochastic simulator: KLE plus KL-coordinate law."""

    kle: KleModel
    dist: JointDistModel
    input_model: InputModel
    fit_report: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dist.dims != self.kle.n_modes:
            raise SchemaError("distribution dimension must equal the number of KL modes")

    @property
    def n_modes(self) -> int:
        return self.kle.n_modes

    def mean(self, X) -> np.ndarray:
        """Mean function (itself a PCE) at physical points."""
        return self.kle.mean_function(X)

    def covariance(self, X, X2=None) -> np.ndarray:
        """Covariance via the truncated Mercer sum; the KL coordinates do not enter."""
        return self.kle.covariance(X, X2)

    def sample_trajectories(self, n: int, seed) -> list[PceModel]:
        """Draw n trajectory surrogates; each is a PCE evaluable anywhere.

        Deterministic per seed; trajectory i is reproducible independently
        of n (it consumes the i-th block of the seeded uniform stream).
        """
        z = sample_joint(self.dist, n, seed)
        coeffs = self.kle.trajectory_coeffs(z)
        return [
            PceModel(self.input_model, self.kle.indices, coeffs[:, i], 0.0)
            for i in range(n)
        ]

    def marginal_samples(self, x, n: int, seed) -> np.ndarray:
        """Response samples at a single input point (histogram-ready)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = sample_joint(self.dist, n, seed)
        coeffs = self.kle.trajectory_coeffs(z)
        return (eval_basis(self.kle.indices, self.input_model, x) @ coeffs).ravel()

    def to_dict(self) -> dict:
        # wall-clock diagnostics stay in memory only; the serialized emulator
        # must be byte-identical across repeated fits of the same data
        report = {k: v for k, v in self.fit_report.items() if k != "timings_s"}
        return {
            "version": SCHEMA_VERSION,
            "input_model": self.input_model.to_dict(),
            "kle": self.kle.to_dict(),
            "dist": self.dist.to_dict(),
            "fit_report": report,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "StochasticEmulator":
        version = d.get("version")
        if version != SCHEMA_VERSION:
            raise SchemaError(
                f"unsupported emulator schema version {version!r}; expected {SCHEMA_VERSION!r}"
            )
        for key in ("input_model", "kle", "dist"):
            if key not in d:
                raise SchemaError(f"emulator payload missing field {key!r}")
        input_model = InputModel.from_dict(d["input_model"])
        return cls(
            kle=KleModel.from_dict(d["kle"], input_model),
            dist=JointDistModel.from_dict(d["dist"]),
            input_model=input_model,
            fit_report=dict(d.get("fit_report", {})),
        )

    @classmethod
    def from_json(cls, s: str) -> "StochasticEmulator":
        try:
            payload = json.loads(s)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"emulator payload is not valid JSON: {exc}") from exc
        return cls.from_dict(payload)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "StochasticEmulator":
        return cls.from_json(Path(path).read_text())


def emulator_from_compression(
    compression: CompressionResult, inference_option: int, seed=0
) -> StochasticEmulator:
    """Step 7 on an existing compression: infer the KL-coordinate law."""
    t0 = time.perf_counter()
    dist = _stage("inference", fit_joint, compression.kle.xi, inference_option)
    timings = dict(compression.timings)
    timings["inference"] = time.perf_counter() - t0
    kle = compression.kle
    report = {
        "per_trajectory_loo": [float(v) for v in compression.per_trajectory_loo],
        "n_regressors": compression.n_regressors,
        "n_modes": kle.n_modes,
        "eigenvalues": kle.eigenvalues.tolist(),
        "explained_fraction": float(kle.explained_fraction),
        "total_variance": float(kle.total_variance),
        "inference_option": int(inference_option),
        "seed": int(seed),
        "timings_s": {k: float(v) for k, v in timings.items()},
    }
    return StochasticEmulator(
        kle=kle, dist=dist, input_model=compression.input_model, fit_report=report
    )


def fit_emulator(
    data: TrajectorySet,
    cfg: FitConfig,
    epsilon: float = 0.001,
    inference_option: int = 2,
    seed=0,
) -> StochasticEmulator:
    """Full pipeline: trajectory fits, joint basis, KLE, and joint inference.

    Every stage is deterministic given the data, so the seed only enters the
    fit report (all sampling seeds are supplied at query time).
    """
    compression = compress_trajectories(data, cfg, epsilon)
    return emulator_from_compression(compression, inference_option, seed)


@dataclass
class PceKdeBaseline:
    """Shared-basis PCE trajectories used as a marginal-only reference emulator.

    Evaluating all stored trajectories at a point yields the sample on which
    a kernel density estimate of the local response distribution is built
    (by the metrics/CLI layer); this baseline cannot resample trajectories.
    """

    models: list[PceModel]

    def __post_init__(self):
        if len(self.models) < 2:
            raise SchemaError("baseline needs at least two trajectories")
        first = self.models[0].indices
        if any(m.indices != first for m in self.models):
            raise SchemaError("baseline trajectories must share one index set")

    @property
    def n_trajectories(self) -> int:
        return len(self.models)

    def predict_values(self, x) -> np.ndarray:
        """All R trajectory predictions at a single point."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        psi = eval_basis(self.models[0].indices, self.models[0].input_model, x)
        coeffs = np.column_stack([m.coeffs for m in self.models])
        return (psi @ coeffs).ravel()


def fit_pce_kde_baseline(compression: CompressionResult) -> PceKdeBaseline:
    """Baseline from the shared-basis OLS trajectories of a compression."""
    kle = compression.kle
    models = [
        PceModel(
            compression.input_model,
            kle.indices,
            compression.refit_coeffs[:, r],
            compression.per_trajectory_loo[r],
        )
        for r in range(compression.refit_coeffs.shape[1])
    ]
    return PceKdeBaseline(models)
