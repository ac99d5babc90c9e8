"""Sparse polynomial chaos regression for sampled trajectories.

One discrete trajectory (an experimental design X with responses y) is
regressed onto the orthonormal basis. The sparse solver runs least-angle
regression over a grid of candidate truncation sets (degree and q-norm
adaptivity), scores every step of the path by leave-one-out error, and
re-fits the winning support by ordinary least squares (hybrid LARS). A
plain OLS fit on a fixed index set is available for the joint-basis stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import dtrtrs

from .basis import InputModel, MultiIndexSet, eval_basis
from .errors import ConfigurationError, DataError, DegenerateDataError, FitError

__all__ = ["FitConfig", "PceModel", "fit_sparse", "fit_ols", "sobol_indices"]

_COND_LIMIT = 1e10


@dataclass(frozen=True)
class FitConfig:
    """Adaptivity grid and solver options for sparse trajectory fits.

    degree_candidates defaults to 1..max_degree. loo_patience stops a LARS
    path after that many steps without improving the leave-one-out score
    (None disables the shortcut and runs the full path).
    """

    max_degree: int
    q_candidates: tuple[float, ...] = (0.5, 0.75, 1.0)
    degree_candidates: tuple[int, ...] | None = None
    solver: str = "lars-hybrid"
    loo_patience: int | None = 40

    def __post_init__(self):
        if self.max_degree < 1:
            raise ConfigurationError("max_degree must be at least 1")
        if not self.q_candidates:
            raise ConfigurationError("q_candidates must be non-empty")
        for q in self.q_candidates:
            if not 0.0 < q <= 1.0:
                raise ConfigurationError(f"q-norm candidates must lie in (0, 1], got {q}")
        if self.degree_candidates is not None and not self.degree_candidates:
            raise ConfigurationError("degree_candidates must be non-empty when given")
        if self.solver not in ("lars-hybrid", "ols"):
            raise ConfigurationError(f"unknown solver {self.solver!r}")

    @property
    def degrees(self) -> tuple[int, ...]:
        if self.degree_candidates is not None:
            return tuple(sorted(set(self.degree_candidates)))
        return tuple(range(1, self.max_degree + 1))


@dataclass
class PceModel:
    """Polynomial chaos surrogate of one trajectory (or of the mean function)."""

    input_model: InputModel
    indices: MultiIndexSet
    coeffs: np.ndarray
    loo_error: float

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (len(self.indices),):
            raise ConfigurationError("coefficient vector must align with the index set")

    def predict(self, X) -> np.ndarray:
        return eval_basis(self.indices, self.input_model, X) @ self.coeffs

    __call__ = predict

    def mean(self) -> float:
        """Expectation of the surrogate under the input density."""
        zero = tuple([0] * self.indices.dims)
        return float(self.coeffs[self.indices.position(zero)]) if zero in self.indices else 0.0

    def variance(self) -> float:
        """Variance of the surrogate under the input density."""
        zero = tuple([0] * self.indices.dims)
        var = float(self.coeffs @ self.coeffs)
        if zero in self.indices:
            var -= float(self.coeffs[self.indices.position(zero)]) ** 2
        return var

    def to_dict(self) -> dict:
        return {
            "indices": self.indices.to_lists(),
            "coeffs": [float(c) for c in self.coeffs],
            "loo_error": float(self.loo_error),
        }

    @classmethod
    def from_dict(cls, d: dict, input_model: InputModel) -> "PceModel":
        return cls(
            input_model=input_model,
            indices=MultiIndexSet(d["indices"]),
            coeffs=np.array(d["coeffs"], dtype=float),
            loo_error=float(d["loo_error"]),
        )


def _lars_order(X: np.ndarray, y: np.ndarray, max_steps: int):
    """Yield column indices of X in least-angle regression entry order.

    Plain LAR with equiangular updates; the Gram factor of the active set is
    grown by rank-one Cholesky updates. Columns expected centered and
    unit-norm. Numerically dependent candidates are dropped from play.
    """
    n, p = X.shape
    max_steps = min(max_steps, p)
    mu = np.zeros(n)
    in_play = np.ones(p, dtype=bool)
    n_in_play = p
    active: list[int] = []
    L = np.zeros((max_steps, max_steps))
    Xa = np.empty((n, max_steps))
    c_scale = max(float(np.linalg.norm(y)), 1e-300)
    c = X.T @ y
    steps_since_refresh = 0
    err_state = np.errstate(divide="ignore", invalid="ignore")
    err_state.__enter__()
    try:
        while len(active) < max_steps and n_in_play:
            if steps_since_refresh >= 25:  # guard against drift of the running correlations
                c = X.T @ (y - mu)
                steps_since_refresh = 0
            c_masked = np.where(in_play, np.abs(c), -np.inf)
            j = int(np.argmax(c_masked))
            cmax = c_masked[j]
            if cmax < 1e-12 * c_scale:
                return
            k = len(active)
            xj = X[:, j]
            if k:
                g = Xa[:, :k].T @ xj
                w = dtrtrs(L[:k, :k], g, lower=1)[0]
                d2 = 1.0 - float(w @ w)
                if d2 <= 1e-12:
                    in_play[j] = False  # collinear with the active set
                    n_in_play -= 1
                    continue
                L[k, :k] = w
                L[k, k] = math.sqrt(d2)
            else:
                L[0, 0] = 1.0
            Xa[:, k] = xj
            active.append(j)
            in_play[j] = False
            n_in_play -= 1
            yield j
            k += 1
            s = np.sign(c[active])
            s[s == 0.0] = 1.0
            v = dtrtrs(L[:k, :k], s, lower=1)[0]
            v = dtrtrs(L[:k, :k], v, lower=1, trans=1)[0]
            sv = float(s @ v)
            if sv <= 0.0:
                return
            A = 1.0 / math.sqrt(sv)
            u = (Xa[:, :k] @ v) * A
            a = X.T @ u
            if not n_in_play:
                gamma = cmax / A
            else:
                cc = c[in_play]
                aa = a[in_play]
                g1 = (cmax - cc) / (A - aa)
                g2 = (cmax + cc) / (A + aa)
                g1[~np.isfinite(g1) | (g1 <= 1e-14)] = np.inf
                g2[~np.isfinite(g2) | (g2 <= 1e-14)] = np.inf
                gamma = min(float(g1.min()), float(g2.min()), cmax / A)
            mu += gamma * u
            c -= gamma * a
            steps_since_refresh += 1
    finally:
        err_state.__exit__(None, None, None)


class _IncrementalOls:
    """Growing-support OLS with hat-matrix leave-one-out, via an updated QR.

    Columns are appended one at a time (modified Gram-Schmidt with one
    reorthogonalization pass); residuals and leverage are maintained so the
    relative LOO error of every prefix of the path costs O(N) per step.
    """

    def __init__(self, y: np.ndarray, max_cols: int):
        n = y.size
        self.y = y
        self.n = n
        self.Q = np.empty((n, max_cols))
        self.R = np.zeros((max_cols, max_cols))
        self.qty = np.empty(max_cols)
        self.resid = y.astype(float).copy()
        self.h = np.zeros(n)
        self.k = 0
        var = float(np.var(y, ddof=1)) if n > 1 else 0.0
        self.y_var = var

    def add_column(self, x: np.ndarray) -> bool:
        """Append a regressor; returns False if it is numerically dependent."""
        k = self.k
        q = x.astype(float)
        scale = math.sqrt(float(q @ q))
        r = np.zeros(k + 1)
        if k:
            proj = self.Q[:, :k].T @ q
            q = q - self.Q[:, :k] @ proj
            r[:k] = proj
            nrm = math.sqrt(float(q @ q))
            if nrm < 0.7 * scale:  # selective reorthogonalization (twice is enough)
                proj = self.Q[:, :k].T @ q
                q -= self.Q[:, :k] @ proj
                r[:k] += proj
                nrm = math.sqrt(float(q @ q))
        else:
            q = q.copy()
            nrm = scale
        if nrm <= 1e-13 * max(scale, 1.0):
            return False
        q /= nrm
        r[k] = nrm
        self.Q[:, k] = q
        self.R[: k + 1, k] = r
        qty_k = float(q @ self.y)
        self.qty[k] = qty_k
        self.resid -= qty_k * q
        self.h += q * q
        self.k = k + 1
        return True

    def loo_error(self) -> float:
        """Relative leave-one-out error of the current support."""
        if self.y_var <= 0.0:
            return 0.0
        one_minus_h = 1.0 - self.h
        if np.any(one_minus_h < 1e-10):
            return math.inf
        e = self.resid / one_minus_h
        return float(e @ e) / self.n / self.y_var

    def coefficients(self, k: int) -> np.ndarray:
        return solve_triangular(self.R[:k, :k], self.qty[:k], lower=False)

    def condition(self, k: int) -> float:
        return float(np.linalg.cond(self.R[:k, :k]))


def _candidate_columns(exps: np.ndarray, degree: int, q: float) -> np.ndarray:
    totals = exps.sum(axis=1)
    mask = totals <= degree
    if q < 1.0:
        tol = degree * (1.0 + 1e-12) + 1e-12
        qn = (exps.astype(float) ** q).sum(axis=1) ** (1.0 / q)
        mask &= qn <= tol
    return np.flatnonzero(mask)


def _fit_candidate(Psi: np.ndarray, y: np.ndarray, patience: int | None):
    """Hybrid-LARS fit on one candidate basis (column 0 must be the constant).

    Returns (loo, local support positions, coefficients) or None if no
    feasible support was found.
    """
    n, p = Psi.shape
    max_support = min(p, n - 1)
    ols = _IncrementalOls(y, max_support)
    if not ols.add_column(Psi[:, 0]):
        return None
    best_loo = ols.loo_error()
    best_k = 1
    path: list[int] = []
    # LARS operates on centered, unit-norm copies of the non-constant columns
    centered = Psi[:, 1:] - Psi[:, 1:].mean(axis=0)
    norms = np.linalg.norm(centered, axis=0)
    usable = np.flatnonzero(norms > 1e-12 * math.sqrt(n))
    if usable.size:
        Xn = centered[:, usable] / norms[usable]
        yc = y - y.mean()
        since_best = 0
        for j_local in _lars_order(Xn, yc, max_steps=max_support - 1):
            col = 1 + usable[j_local]
            if not ols.add_column(Psi[:, col]):
                break
            path.append(col)
            loo = ols.loo_error()
            if loo < best_loo:
                best_loo = loo
                best_k = ols.k
                since_best = 0
            else:
                since_best += 1
                if patience is not None and since_best >= patience:
                    break
    if not math.isfinite(best_loo):
        return None
    if ols.condition(best_k) > _COND_LIMIT:
        return None
    support = [0] + path[: best_k - 1]
    coeffs = ols.coefficients(best_k)
    return best_loo, support, coeffs


def fit_sparse(X, y, input_model: InputModel, cfg: FitConfig) -> PceModel:
    """Fit one trajectory by degree- and q-norm-adaptive hybrid LARS.

    For every candidate truncation set the LARS path is scored by relative
    leave-one-out error (hat-matrix identity, normalized by the sample
    variance of y) and the best step is re-fitted by OLS on its own support.
    The candidate with the smallest LOO wins. Each q-path over ascending
    degrees stops after two consecutive LOO increases.

    Parameters
    ----------
    X : (N, d) array of design points
    y : (N,) array of responses
    input_model : InputModel
    cfg : FitConfig

    Returns
    -------
    PceModel with loo_error set to the winning relative LOO.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if n != y.size:
        raise DataError(f"design has {n} rows but y has {y.size} entries")
    if n < 2:
        raise DataError("need at least two sample points")
    if not np.all(np.isfinite(y)):
        raise DataError("responses contain non-finite values")
    if n < d + 1:
        raise DataError(f"need at least d+1 = {d + 1} points, got {n}")
    if d != input_model.dims:
        raise ConfigurationError("design dimension does not match input model")

    zero = tuple([0] * d)
    if float(np.var(y)) <= 1e-300:
        return PceModel(input_model, MultiIndexSet([zero]), np.array([y.mean()]), 0.0)

    p_max = max(cfg.degrees)
    A_full = MultiIndexSet.total_degree(d, p_max)
    exps = A_full.as_array()
    Psi_full = eval_basis(A_full, input_model, X)

    best = None  # (loo, n_terms, support_global, coeffs)
    for q in cfg.q_candidates:
        rises = 0
        prev_loo = math.inf
        for degree in cfg.degrees:
            cols = _candidate_columns(exps, degree, q)
            if cols.size < 2 and degree > 0:
                continue
            if cfg.solver == "ols" and cols.size > n // 2:
                break
            if cfg.solver == "ols":
                result = _fit_ols_candidate(Psi_full[:, cols], y)
            else:
                result = _fit_candidate(Psi_full[:, cols], y, cfg.loo_patience)
            if result is None:
                loo = math.inf
            else:
                loo, support_local, coeffs = result
                support_global = cols[support_local]
                if best is None or loo < best[0] or (loo == best[0] and len(support_global) < best[1]):
                    best = (loo, len(support_global), support_global, coeffs)
            if loo >= prev_loo:
                rises += 1
                if rises >= 2:
                    break
            else:
                rises = 0
            prev_loo = loo

    if best is None:
        raise FitError("no candidate basis produced a well-posed regression")
    loo, _, support_global, coeffs = best
    order = np.argsort(support_global)
    indices = MultiIndexSet([A_full.indices[g] for g in support_global[order]])
    return PceModel(input_model, indices, np.asarray(coeffs)[order], float(loo))


def _fit_ols_candidate(Psi: np.ndarray, y: np.ndarray):
    n, p = Psi.shape
    ols = _IncrementalOls(y, p)
    support = []
    for j in range(p):
        if ols.add_column(Psi[:, j]):
            support.append(j)
    loo = ols.loo_error()
    if not math.isfinite(loo) or ols.condition(ols.k) > _COND_LIMIT:
        return None
    return loo, support, ols.coefficients(ols.k)


def fit_ols(X, y, input_model: InputModel, A: MultiIndexSet) -> PceModel:
    """Ordinary least squares on exactly the regressors in A."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    if n != y.size:
        raise DataError(f"design has {n} rows but y has {y.size} entries")
    if len(A) > n:
        raise DataError(f"cannot fit {len(A)} regressors with {n} points")
    Psi = eval_basis(A, input_model, X)
    q_mat, r_mat = np.linalg.qr(Psi)
    diag = np.abs(np.diag(r_mat))
    if diag.min() <= 1e-12 * max(diag.max(), 1.0):
        cond = np.linalg.cond(Psi)
        raise FitError(f"normal equations singular on the requested support (cond ~ {cond:.3e})")
    coeffs = solve_triangular(r_mat, q_mat.T @ y, lower=False)
    resid = y - Psi @ coeffs
    h = np.einsum("ij,ij->i", q_mat, q_mat)
    var = float(np.var(y, ddof=1)) if n > 1 else 0.0
    if var > 0 and np.all(h < 1.0 - 1e-10):
        loo = float(np.mean((resid / (1.0 - h)) ** 2)) / var
    else:
        loo = 0.0 if var == 0.0 else math.inf
    return PceModel(input_model, A, coeffs, loo)


def sobol_indices(
    model: PceModel, groups: Sequence[Sequence[int]]
) -> tuple[np.ndarray, np.ndarray]:
    """First-order and total Sobol' indices of groups of input dimensions.

    Variance shares are read off the squared coefficients: the first-order
    index of a group sums over multi-indices supported only inside the
    group, the total index over multi-indices touching it.
    """
    d = model.indices.dims
    flat = [dim for g in groups for dim in g]
    if sorted(flat) != list(range(d)):
        raise ConfigurationError("groups must form a partition of the input dimensions")
    exps = model.indices.as_array()
    sq = model.coeffs**2
    nonconst = exps.sum(axis=1) > 0
    total_var = float(sq[nonconst].sum())
    if total_var <= 0.0:
        raise DegenerateDataError("model has zero variance; Sobol' indices undefined")
    first = np.empty(len(groups))
    total = np.empty(len(groups))
    for gi, g in enumerate(groups):
        in_group = np.zeros(d, dtype=bool)
        in_group[list(g)] = True
        touches = (exps[:, in_group] > 0).any(axis=1)
        outside = (exps[:, ~in_group] > 0).any(axis=1) if (~in_group).any() else np.zeros(len(exps), bool)
        first[gi] = sq[nonconst & touches & ~outside].sum() / total_var
        total[gi] = sq[nonconst & touches].sum() / total_var
    return first, total
