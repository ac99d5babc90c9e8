"""Orthonormal polynomial bases for independent random inputs.

Univariate families follow the classical Wiener-Askey pairing: Legendre
polynomials for uniform marginals and probabilists' Hermite polynomials for
Gaussian marginals; lognormal inputs are handled through their underlying
normal variable. All polynomials are orthonormal with respect to the
standardized marginal density, so tensor products of them form an
orthonormal basis of the weighted L2 space of the input vector.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import ConfigurationError, DataError, DomainError

__all__ = [
    "Uniform",
    "Gaussian",
    "Lognormal",
    "InputModel",
    "MultiIndexSet",
    "eval_univariate",
    "to_standard",
    "from_standard",
    "eval_basis",
    "gauss_rule",
]


@dataclass(frozen=True)
class Uniform:
    """Uniform marginal on the interval [a, b]."""

    a: float
    b: float

    def __post_init__(self):
        if not self.b > self.a:
            raise ConfigurationError(f"uniform bounds must satisfy a < b, got [{self.a}, {self.b}]")


@dataclass(frozen=True)
class Gaussian:
    """Gaussian marginal with mean mu and standard deviation sigma."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError(f"gaussian sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class Lognormal:
    """Lognormal marginal parameterized by its underlying normal (mu_log, sigma_log)."""

    mu_log: float
    sigma_log: float

    def __post_init__(self):
        if not self.sigma_log > 0:
            raise ConfigurationError(f"lognormal sigma_log must be positive, got {self.sigma_log}")

    @staticmethod
    def from_moments(mean: float, sd: float) -> "Lognormal":
        """Build from the target mean and standard deviation of the lognormal itself."""
        if mean <= 0 or sd <= 0:
            raise ConfigurationError("lognormal moments must be positive")
        s2 = math.log1p((sd / mean) ** 2)
        return Lognormal(math.log(mean) - 0.5 * s2, math.sqrt(s2))


Marginal = Union[Uniform, Gaussian, Lognormal]

_MARGINAL_TAGS = {Uniform: "uniform", Gaussian: "gaussian", Lognormal: "lognormal"}


@dataclass(frozen=True)
class InputModel:
    """Vector of mutually independent marginals defining the input density."""

    marginals: tuple[Marginal, ...]

    def __init__(self, marginals: Iterable[Marginal]):
        object.__setattr__(self, "marginals", tuple(marginals))
        if not self.marginals:
            raise ConfigurationError("input model needs at least one marginal")
        for m in self.marginals:
            if type(m) not in _MARGINAL_TAGS:
                raise ConfigurationError(f"unsupported marginal family: {m!r}")

    @property
    def dims(self) -> int:
        return len(self.marginals)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n i.i.d. points from the input density, shape (n, dims)."""
        cols = []
        for m in self.marginals:
            if isinstance(m, Uniform):
                cols.append(rng.uniform(m.a, m.b, n))
            elif isinstance(m, Gaussian):
                cols.append(m.mu + m.sigma * rng.standard_normal(n))
            else:
                cols.append(np.exp(m.mu_log + m.sigma_log * rng.standard_normal(n)))
        return np.column_stack(cols)

    def to_dict(self) -> dict:
        out = []
        for m in self.marginals:
            if isinstance(m, Uniform):
                out.append({"type": "uniform", "a": m.a, "b": m.b})
            elif isinstance(m, Gaussian):
                out.append({"type": "gaussian", "mu": m.mu, "sigma": m.sigma})
            else:
                out.append({"type": "lognormal", "mu_log": m.mu_log, "sigma_log": m.sigma_log})
        return {"marginals": out}

    @classmethod
    def from_dict(cls, d: dict) -> "InputModel":
        marginals = []
        for spec in d["marginals"]:
            kind = spec.get("type")
            if kind == "uniform":
                marginals.append(Uniform(float(spec["a"]), float(spec["b"])))
            elif kind == "gaussian":
                marginals.append(Gaussian(float(spec["mu"]), float(spec["sigma"])))
            elif kind == "lognormal":
                marginals.append(Lognormal(float(spec["mu_log"]), float(spec["sigma_log"])))
            else:
                raise ConfigurationError(f"unknown marginal type {kind!r}")
        return cls(marginals)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "InputModel":
        return cls.from_dict(json.loads(s))


def _legendre_orthonormal(max_degree: int, t: np.ndarray) -> np.ndarray:
    """Table of orthonormal Legendre values, shape (len(t), max_degree + 1).

    Orthonormal w.r.t. the uniform density 1/2 on [-1, 1]: psi_n = sqrt(2n+1) P_n.
    Uses the stable three-term recurrence of the classical polynomials.
    """
    t = np.asarray(t, dtype=float)
    table = np.empty((t.size, max_degree + 1))
    table[:, 0] = 1.0
    if max_degree >= 1:
        table[:, 1] = t
    for n in range(1, max_degree):
        table[:, n + 1] = ((2 * n + 1) * t * table[:, n] - n * table[:, n - 1]) / (n + 1)
    scale = np.sqrt(2.0 * np.arange(max_degree + 1) + 1.0)
    return table * scale


def _hermite_orthonormal(max_degree: int, t: np.ndarray) -> np.ndarray:
    """Table of orthonormal probabilists' Hermite values, shape (len(t), max_degree + 1).

    Orthonormal w.r.t. the standard normal density: h_n = He_n / sqrt(n!), computed
    directly by the normalized recurrence h_{n+1} = (t h_n - sqrt(n) h_{n-1}) / sqrt(n+1).
    """
    t = np.asarray(t, dtype=float)
    table = np.empty((t.size, max_degree + 1))
    table[:, 0] = 1.0
    if max_degree >= 1:
        table[:, 1] = t
    for n in range(1, max_degree):
        table[:, n + 1] = (t * table[:, n] - math.sqrt(n) * table[:, n - 1]) / math.sqrt(n + 1)
    return table


def _univariate_table(marginal: Marginal, max_degree: int, t: np.ndarray) -> np.ndarray:
    if isinstance(marginal, Uniform):
        return _legendre_orthonormal(max_degree, t)
    if isinstance(marginal, (Gaussian, Lognormal)):
        return _hermite_orthonormal(max_degree, t)
    raise ConfigurationError(f"unsupported marginal family: {marginal!r}")


def eval_univariate(marginal: Marginal, degree: int, t) -> np.ndarray | float:
    """Evaluate the degree-n orthonormal polynomial of a family at standardized points."""
    if degree < 0:
        raise ConfigurationError("polynomial degree must be non-negative")
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    vals = _univariate_table(marginal, degree, arr)[:, degree]
    return vals if np.ndim(t) else float(vals[0])


def to_standard(input_model: InputModel, X) -> np.ndarray:
    """Map physical points to the standardized space of each marginal.

    Uniform marginals map affinely onto [-1, 1]; Gaussian marginals onto the
    standard normal; lognormal marginals onto the standard normal of their
    underlying logarithm. Raises DomainError for points outside the support.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != input_model.dims:
        raise DomainError(f"expected {input_model.dims} columns, got {X.shape[1]}")
    Z = np.empty_like(X)
    for i, m in enumerate(input_model.marginals):
        x = X[:, i]
        if isinstance(m, Uniform):
            slack = 1e-12 * (m.b - m.a)
            if np.any(x < m.a - slack) or np.any(x > m.b + slack):
                raise DomainError(f"dimension {i}: value outside uniform support [{m.a}, {m.b}]")
            Z[:, i] = np.clip(2.0 * (x - m.a) / (m.b - m.a) - 1.0, -1.0, 1.0)
        elif isinstance(m, Gaussian):
            Z[:, i] = (x - m.mu) / m.sigma
        else:
            if np.any(x <= 0.0):
                raise DomainError(f"dimension {i}: lognormal support requires positive values")
            Z[:, i] = (np.log(x) - m.mu_log) / m.sigma_log
    return Z


def from_standard(input_model: InputModel, Z) -> np.ndarray:
    """Inverse of :func:`to_standard`."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[1] != input_model.dims:
        raise DomainError(f"expected {input_model.dims} columns, got {Z.shape[1]}")
    X = np.empty_like(Z)
    for i, m in enumerate(input_model.marginals):
        z = Z[:, i]
        if isinstance(m, Uniform):
            X[:, i] = m.a + 0.5 * (z + 1.0) * (m.b - m.a)
        elif isinstance(m, Gaussian):
            X[:, i] = m.mu + m.sigma * z
        else:
            X[:, i] = np.exp(m.mu_log + m.sigma_log * z)
    return X


def _grlex_key(alpha: tuple[int, ...]):
    # graded lexicographic: grade by total degree, then higher power on the
    # earlier variable first
    return (sum(alpha), tuple(-e for e in alpha))


def _compositions(total: int, dims: int) -> Iterator[tuple[int, ...]]:
    if dims == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, dims - 1):
            yield (first,) + rest


class MultiIndexSet:
    """Ordered set of distinct multi-indices, kept in graded lexicographic order.

    The deterministic ordering is what makes coefficient vectors comparable
    across trajectories and across runs.
    """

    def __init__(self, indices: Iterable[Sequence[int]]):
        seen = set()
        cleaned = []
        dims = None
        for alpha in indices:
            tup = tuple(int(a) for a in alpha)
            if any(a < 0 for a in tup):
                raise ConfigurationError(f"multi-index entries must be non-negative: {tup}")
            if dims is None:
                dims = len(tup)
            elif len(tup) != dims:
                raise ConfigurationError("all multi-indices must share the same length")
            if tup in seen:
                raise ConfigurationError(f"duplicate multi-index {tup}")
            seen.add(tup)
            cleaned.append(tup)
        if dims is None:
            raise DataError("multi-index set may not be empty")
        self._indices: tuple[tuple[int, ...], ...] = tuple(sorted(cleaned, key=_grlex_key))
        self._dims = dims
        self._position = {alpha: i for i, alpha in enumerate(self._indices)}

    @classmethod
    def total_degree(cls, dims: int, degree: int, q: float = 1.0) -> "MultiIndexSet":
        """All indices with q-norm (sum alpha_i^q)^(1/q) <= degree."""
        if degree < 0:
            raise ConfigurationError("degree must be non-negative")
        if not 0.0 < q <= 1.0:
            raise ConfigurationError(f"q-norm parameter must lie in (0, 1], got {q}")
        tol = degree * (1.0 + 1e-12) + 1e-12
        out = []
        for total in range(degree + 1):
            for alpha in _compositions(total, dims):
                if q == 1.0 or _qnorm(alpha, q) <= tol:
                    out.append(alpha)
        return cls(out)

    @property
    def dims(self) -> int:
        return self._dims

    @property
    def indices(self) -> tuple[tuple[int, ...], ...]:
        return self._indices

    def __len__(self) -> int:
        return len(self._indices)

    def __iter__(self):
        return iter(self._indices)

    def __contains__(self, alpha) -> bool:
        return tuple(alpha) in self._position

    def __eq__(self, other) -> bool:
        return isinstance(other, MultiIndexSet) and self._indices == other._indices

    def __hash__(self):
        return hash(self._indices)

    def __repr__(self):
        return f"MultiIndexSet(dims={self._dims}, size={len(self)})"

    def position(self, alpha) -> int:
        return self._position[tuple(alpha)]

    def union(self, other: "MultiIndexSet") -> "MultiIndexSet":
        if other.dims != self.dims:
            raise ConfigurationError("cannot union index sets of different dimensions")
        return MultiIndexSet(set(self._indices) | set(other._indices))

    def subset(self, keep: Iterable[Sequence[int]]) -> "MultiIndexSet":
        return MultiIndexSet(keep)

    def as_array(self) -> np.ndarray:
        return np.array(self._indices, dtype=np.int64)

    def to_lists(self) -> list[list[int]]:
        return [list(a) for a in self._indices]


def _qnorm(alpha: tuple[int, ...], q: float) -> float:
    s = sum(a**q for a in alpha if a > 0)
    return s ** (1.0 / q) if s > 0 else 0.0


def eval_basis(A: MultiIndexSet, input_model: InputModel, X) -> np.ndarray:
    """Design matrix of the multivariate orthonormal basis, shape (N, |A|).

    Entry (i, j) is the tensor-product polynomial of multi-index A[j]
    evaluated at the standardized image of X[i]. Bitwise deterministic for
    fixed (A, input_model, X).
    """
    if A.dims != input_model.dims:
        raise ConfigurationError("index set dimension does not match input model")
    Z = to_standard(input_model, X)
    exps = A.as_array()
    n = Z.shape[0]
    out = np.ones((n, len(A)))
    for i, m in enumerate(input_model.marginals):
        max_deg = int(exps[:, i].max())
        table = _univariate_table(m, max_deg, Z[:, i])
        out *= table[:, exps[:, i]]
    return out


def gauss_rule(marginal: Marginal, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes (standardized space) and probability weights for one marginal.

    The weights sum to one, so sum(w * g(t)) approximates the expectation of g
    under the standardized density; exact for polynomial g up to degree
    2*n_nodes - 1.
    """
    if n_nodes < 1:
        raise ConfigurationError("need at least one quadrature node")
    if isinstance(marginal, Uniform):
        t, w = np.polynomial.legendre.leggauss(n_nodes)
        return t, w / 2.0
    if isinstance(marginal, (Gaussian, Lognormal)):
        t, w = np.polynomial.hermite_e.hermegauss(n_nodes)
        return t, w / math.sqrt(2.0 * math.pi)
    raise ConfigurationError(f"unsupported marginal family: {marginal!r}")


def tensor_gauss_rule(input_model: InputModel, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensorized Gauss rule over all dims: physical nodes (m, d) and weights (m,)."""
    per_dim = [gauss_rule(m, n_nodes) for m in input_model.marginals]
    combos = list(itertools.product(*(range(n_nodes) for _ in per_dim)))
    Z = np.array([[per_dim[i][0][k] for i, k in enumerate(c)] for c in combos])
    W = np.array([math.prod(per_dim[i][1][k] for i, k in enumerate(c)) for c in combos])
    return from_standard(input_model, Z), W
