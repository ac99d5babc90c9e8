"""Benchmark stochastic simulators with trajectory semantics.

Each benchmark separates the explicit inputs x from a latent random event:
fixing the event and sweeping x yields a deterministic function (one
trajectory of the simulator seen as a random field). Dataset generation
draws a fresh event and a fresh experimental design per trajectory from
per-trajectory substreams of one root seed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .basis import Gaussian, InputModel, Lognormal, Uniform
from .dist import PairCopula, h_inverse
from .errors import ConfigurationError, DomainError, IntegrationError

__all__ = [
    "Trajectory",
    "TrajectorySet",
    "ValidationSet",
    "ishigami_stochastic",
    "borehole",
    "borehole_stochastic",
    "heston_stochastic",
    "StochasticIshigami",
    "StochasticBorehole",
    "StochasticHeston",
    "AdditiveSynthetic",
    "get_benchmark",
    "generate_dataset",
    "make_validation_set",
]


@dataclass
class Trajectory:
    """Discrete evaluations of one trajectory: design X, responses y."""

    X: np.ndarray
    y: np.ndarray
    event_id: int

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.X.shape[0] != self.y.size:
            raise ConfigurationError("trajectory design and responses disagree in length")

    @property
    def n_points(self) -> int:
        return self.y.size


@dataclass
class TrajectorySet:
    """Collection of discretely sampled trajectories sharing one input model."""

    input_model: InputModel
    trajectories: list[Trajectory]

    @property
    def n_trajectories(self) -> int:
        return len(self.trajectories)

    @property
    def min_design_size(self) -> int:
        return min(t.n_points for t in self.trajectories)

    def to_dict(self) -> dict:
        return {
            "input_model": self.input_model.to_dict(),
            "trajectories": [
                {"id": t.event_id, "X": t.X.tolist(), "y": t.y.tolist()}
                for t in self.trajectories
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectorySet":
        im = InputModel.from_dict(d["input_model"])
        trajectories = [
            Trajectory(np.array(t["X"], dtype=float), np.array(t["y"], dtype=float), int(t["id"]))
            for t in d["trajectories"]
        ]
        return cls(im, trajectories)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path) -> "TrajectorySet":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def export_csv(self, directory) -> list[Path]:
        """One CSV per trajectory with columns x1..xd, y."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        d = self.input_model.dims
        paths = []
        for t in self.trajectories:
            p = directory / f"trajectory_{t.event_id:04d}.csv"
            with p.open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow([f"x{i + 1}" for i in range(d)] + ["y"])
                for row, val in zip(t.X, t.y):
                    writer.writerow([repr(float(c)) for c in row] + [repr(float(val))])
            paths.append(p)
        return paths


@dataclass
class ValidationSet:
    """Replicated simulator trajectories on a shared point grid.

    values[r, j] is trajectory r evaluated at X[j]; columns double as
    marginal validation samples, rows as covariance validation trajectories.
    """

    X: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[1] != self.X.shape[0]:
            raise ConfigurationError("validation values must have one column per point")

    @property
    def n_points(self) -> int:
        return self.X.shape[0]

    @property
    def n_reps(self) -> int:
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# simulators
# ---------------------------------------------------------------------------


def ishigami_stochastic(x, event) -> np.ndarray | float:
    """Ishigami response sin(x1) + A sin(x2)^2 + B x3^4 sin(x1) at a fixed (A, B)."""
    a, b = float(event[0]), float(event[1])
    X = np.atleast_2d(np.asarray(x, dtype=float))
    s1 = np.sin(X[:, 0])
    out = s1 + a * np.sin(X[:, 1]) ** 2 + b * X[:, 2] ** 4 * s1
    return out if np.ndim(x) == 2 else float(out[0])


def borehole(z) -> np.ndarray | float:
    """Water flow through a borehole between two aquifers (eight inputs).

    Input order: (R_w, H_u, K_w, R, T_u, T_l, H_l, L).
    """
    Z = np.atleast_2d(np.asarray(z, dtype=float))
    rw, hu, kw, r, tu, tl, hl, L = (Z[:, i] for i in range(8))
    if np.any(rw <= 0) or np.any(kw <= 0) or np.any(tl <= 0) or np.any(r <= rw):
        raise DomainError("borehole requires R > R_w > 0, K_w > 0, T_l > 0")
    log_ratio = np.log(r / rw)
    denom = log_ratio * (1.0 + 2.0 * L * tu / (log_ratio * rw**2 * kw) + tu / tl)
    out = 2.0 * math.pi * tu * (hu - hl) / denom
    return out if np.ndim(z) == 2 else float(out[0])


def borehole_stochastic(x, event) -> np.ndarray | float:
    """Borehole with explicit (R_w, H_u, K_w) and latent (R, T_u, T_l, H_l, L)."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    ev = np.asarray(event, dtype=float)
    full = np.column_stack([X, np.tile(ev, (X.shape[0], 1))])
    out = np.atleast_1d(borehole(full))
    return out if np.ndim(x) == 2 else float(out[0])


def heston_stochastic(x, z1, z2, steps: int | None = None, full_state: bool = False):
    """Stock price U_1 of the Heston model under fixed Wiener increments.

    Euler-Maruyama on [0, 1] with dt = 1/steps and U_0 = 1; the volatility is
    floored at zero inside drift and diffusion. The event is the pair of
    standard-normal sequences (z1, z2); the input correlation rho combines
    them per evaluation point, so a fixed event defines one trajectory over
    the six-dimensional parameter space (mu, kappa, theta, sigma, rho, nu0).
    With full_state=True the final volatility state is returned as well.
    """
    X = np.atleast_2d(np.asarray(x, dtype=float))
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    n_steps = z1.size if steps is None else int(steps)
    if n_steps < 1 or z1.size < n_steps or z2.size < n_steps:
        raise ConfigurationError("event sequences must cover the requested step count")
    mu, kappa, theta, sigma, rho, nu0 = (X[:, i] for i in range(6))
    dt = 1.0 / n_steps
    sqrt_dt = math.sqrt(dt)
    rho_c = np.sqrt(1.0 - rho**2)
    u = np.ones(X.shape[0])
    nu = nu0.copy()
    for t in range(n_steps):
        nu_plus = np.maximum(nu, 0.0)
        vol = np.sqrt(nu_plus)
        dw1 = sqrt_dt * z1[t]
        dw2 = sqrt_dt * (rho * z1[t] + rho_c * z2[t])
        u = u * (1.0 + mu * dt + vol * dw1)
        nu = nu + kappa * (theta - nu_plus) * dt + sigma * vol * dw2
    if not np.all(np.isfinite(u)):
        raise IntegrationError("Heston integration produced non-finite state")
    if full_state:
        return (u, nu) if np.ndim(x) == 2 else (float(u[0]), float(nu[0]))
    return u if np.ndim(x) == 2 else float(u[0])


# ---------------------------------------------------------------------------
# benchmark objects (latent-event sampling + vectorized evaluation)
# ---------------------------------------------------------------------------

_ISHIGAMI_CLAYTON = PairCopula("clayton", 1.5)
_ISHIGAMI_A = Lognormal.from_moments(7.0, 0.7)
_ISHIGAMI_B = Lognormal.from_moments(0.1, 0.1)


def _lognormal_icdf(m: Lognormal, u) -> np.ndarray:
    return np.exp(m.mu_log + m.sigma_log * stats.norm.ppf(u))


@dataclass(frozen=True)
class StochasticIshigami:
    """Ishigami with lognormal (A, B) latents coupled by a Clayton copula."""

    name: str = "ishigami"

    @property
    def input_model(self) -> InputModel:
        return InputModel([Uniform(-math.pi, math.pi)] * 3)

    def sample_event(self, rng: np.random.Generator):
        w = rng.random(2)
        u1 = float(np.clip(w[0], 1e-12, 1 - 1e-12))
        u2 = float(h_inverse(_ISHIGAMI_CLAYTON, np.clip(w[1], 1e-12, 1 - 1e-12), u1))
        return (
            float(_lognormal_icdf(_ISHIGAMI_A, u1)),
            float(_lognormal_icdf(_ISHIGAMI_B, u2)),
        )

    def evaluate(self, X, event) -> np.ndarray:
        return np.atleast_1d(ishigami_stochastic(X, event))


_BOREHOLE_LATENTS = (
    Lognormal(7.71, 1.0056),  # R
    Uniform(63070.0, 115600.0),  # T_u
    Uniform(63.1, 116.0),  # T_l
    Uniform(700.0, 820.0),  # H_l
    Uniform(1120.0, 1680.0),  # L
)


def borehole_input_model() -> InputModel:
    """Full eight-dimensional input model of the deterministic borehole."""
    return InputModel(
        [
            Gaussian(0.10, 0.0161812),
            Uniform(990.0, 1110.0),
            Uniform(9855.0, 12045.0),
            *_BOREHOLE_LATENTS,
        ]
    )


@dataclass(frozen=True)
class StochasticBorehole:
    """Borehole with the five trailing parameters treated as latent."""

    name: str = "borehole"

    @property
    def input_model(self) -> InputModel:
        return InputModel(
            [Gaussian(0.10, 0.0161812), Uniform(990.0, 1110.0), Uniform(9855.0, 12045.0)]
        )

    def sample_event(self, rng: np.random.Generator):
        out = []
        for m in _BOREHOLE_LATENTS:
            if isinstance(m, Lognormal):
                out.append(float(np.exp(m.mu_log + m.sigma_log * rng.standard_normal())))
            else:
                out.append(float(rng.uniform(m.a, m.b)))
        return tuple(out)

    def evaluate(self, X, event) -> np.ndarray:
        return np.atleast_1d(borehole_stochastic(X, event))


@dataclass(frozen=True)
class StochasticHeston:
    """Heston stochastic volatility model; the event fixes both Wiener paths."""

    steps: int = 1000
    name: str = "heston"

    @property
    def input_model(self) -> InputModel:
        return InputModel(
            [
                Uniform(0.0, 0.1),  # mu
                Uniform(0.3, 2.0),  # kappa
                Uniform(0.02, 0.07),  # theta
                Uniform(0.2, 0.4),  # sigma
                Uniform(-1.0, -0.5),  # rho
                Uniform(0.02, 0.07),  # nu0
            ]
        )

    def sample_event(self, rng: np.random.Generator):
        return rng.standard_normal(self.steps), rng.standard_normal(self.steps)

    def evaluate(self, X, event) -> np.ndarray:
        return np.atleast_1d(heston_stochastic(X, event[0], event[1], steps=self.steps))


def _default_m1(X: np.ndarray) -> np.ndarray:
    return X[:, 0] + 0.5 * X[:, 1] ** 2


def _default_m2(xi: float) -> float:
    return float(xi)


def _default_event(rng: np.random.Generator) -> float:
    return float(2.0 * rng.standard_normal())


@dataclass(frozen=True)
class AdditiveSynthetic:
    """Additive simulator m0 + m1(x) + m2(xi): a latent draw only shifts the level.

    The default configuration uses a polynomial m1 on two uniform inputs and
    a scalar Gaussian latent with variance 4, so the trajectory covariance
    has exactly one nonzero mode with a constant eigenfunction.
    """

    m0: float = 1.0
    m1: Callable[[np.ndarray], np.ndarray] = _default_m1
    m2: Callable[[float], float] = _default_m2
    event_sampler: Callable[[np.random.Generator], float] = _default_event
    name: str = "additive"

    @property
    def input_model(self) -> InputModel:
        return InputModel([Uniform(-1.0, 1.0), Uniform(-1.0, 1.0)])

    def sample_event(self, rng: np.random.Generator) -> float:
        return self.event_sampler(rng)

    def evaluate(self, X, event) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.m0 + self.m1(X) + self.m2(event)


def additive_synthetic(x, event, simulator: AdditiveSynthetic | None = None) -> np.ndarray | float:
    """Evaluate the additive synthetic simulator at x for a fixed latent draw."""
    sim = simulator or AdditiveSynthetic()
    out = sim.evaluate(x, event)
    return out if np.ndim(x) == 2 else float(out[0])


_BENCHMARKS = {
    "ishigami": StochasticIshigami,
    "borehole": StochasticBorehole,
    "heston": StochasticHeston,
    "additive": AdditiveSynthetic,
}


def get_benchmark(name: str, steps: int | None = None):
    """Benchmark registry used by the CLI; `steps` only applies to heston."""
    if name not in _BENCHMARKS:
        raise ConfigurationError(
            f"unknown benchmark {name!r}; available: {sorted(_BENCHMARKS)}"
        )
    if name == "heston" and steps is not None:
        return StochasticHeston(steps=steps)
    return _BENCHMARKS[name]()


def _trajectory_rng(seed, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def generate_dataset(benchmark, n_points: int, n_trajectories: int, seed) -> TrajectorySet:
    """Sample R trajectories, each with a fresh latent event and a fresh design.

    Trajectory r uses the substream SeedSequence(seed, spawn_key=(r,)), so a
    dataset is bitwise reproducible and individual trajectories do not
    depend on R.
    """
    if n_points < 1 or n_trajectories < 1:
        raise ConfigurationError("dataset needs positive N and R")
    im = benchmark.input_model
    trajectories = []
    for r in range(n_trajectories):
        rng = _trajectory_rng(seed, r)
        event = benchmark.sample_event(rng)
        X = im.sample(rng, n_points)
        y = benchmark.evaluate(X, event)
        trajectories.append(Trajectory(X, y, r))
    return TrajectorySet(im, trajectories)


def make_validation_set(benchmark, n_points: int, n_reps: int, seed) -> ValidationSet:
    """Replicated trajectories on one shared point grid (for error metrics)."""
    if n_points < 1 or n_reps < 1:
        raise ConfigurationError("validation needs positive sizes")
    rng_points = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xFACE,)))
    X = benchmark.input_model.sample(rng_points, n_points)
    values = np.empty((n_reps, n_points))
    for r in range(n_reps):
        rng = _trajectory_rng(seed, r)
        event = benchmark.sample_event(rng)
        values[r] = benchmark.evaluate(X, event)
    return ValidationSet(X, values)
