"""Marginal and dependence models for the KL coordinates.

The joint distribution of the (uncorrelated but dependent) KL random
variables is represented in the marginal-copula framework: one-dimensional
marginals, either from a catalog of standardized parametric families
(all with zero mean and unit standard deviation) or by Gaussian-kernel
density estimation, coupled by a canonical-vine copula built from
parametric pair copulas. Family choices are made by AIC, pair-copula
parameters by maximum likelihood.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, stats

from .errors import ConfigurationError, DataError, DegenerateDataError, DomainError

__all__ = [
    "MarginalModel",
    "PairCopula",
    "VineCopula",
    "JointDistModel",
    "fit_marginal_parametric",
    "fit_marginal_kde",
    "marginal_cdf",
    "marginal_icdf",
    "kendall_tau",
    "fit_pair_copula",
    "fit_vine",
    "fit_joint",
    "sample_joint",
]

_SQRT3 = math.sqrt(3.0)
_GUMBEL_BETA = math.sqrt(6.0) / math.pi
_GUMBEL_MU = -np.euler_gamma * _GUMBEL_BETA

#: parametric families with fixed zero-mean, unit-variance parameters;
#: value = (frozen scipy distribution factory, AIC dof k)
PARAMETRIC_KINDS = (
    "gaussian_std",
    "uniform_std",
    "gumbel_max_std",
    "gumbel_min_std",
    "logistic_std",
    "laplace_std",
    "beta_bounded",
)

_UNIFORM_EPS = 1e-10


@dataclass
class MarginalModel:
    """One-dimensional marginal: a standardized parametric family or a KDE.

    Parametric kinds have zero mean and unit standard deviation by
    construction. The KDE kind is a Gaussian mixture centered at the data
    with common bandwidth; its variance exceeds the sample variance by the
    squared bandwidth (known, accepted bias of the estimator).
    """

    kind: str
    params: dict = field(default_factory=dict)
    points: np.ndarray | None = None
    bandwidth: float | None = None
    aic: float = 0.0

    def __post_init__(self):
        if self.kind not in PARAMETRIC_KINDS + ("kde",):
            raise ConfigurationError(f"unknown marginal kind {self.kind!r}")
        if self.kind == "kde":
            if self.points is None or self.bandwidth is None or self.bandwidth <= 0:
                raise ConfigurationError("kde marginal needs data points and a positive bandwidth")
            self.points = np.asarray(self.points, dtype=float)

    def _frozen(self):
        if self.kind == "gaussian_std":
            return stats.norm()
        if self.kind == "uniform_std":
            return stats.uniform(loc=-_SQRT3, scale=2 * _SQRT3)
        if self.kind == "gumbel_max_std":
            return stats.gumbel_r(loc=_GUMBEL_MU, scale=_GUMBEL_BETA)
        if self.kind == "gumbel_min_std":
            return stats.gumbel_l(loc=-_GUMBEL_MU, scale=_GUMBEL_BETA)
        if self.kind == "logistic_std":
            return stats.logistic(loc=0.0, scale=_SQRT3 / math.pi)
        if self.kind == "laplace_std":
            return stats.laplace(loc=0.0, scale=1.0 / math.sqrt(2.0))
        if self.kind == "beta_bounded":
            p = self.params
            return stats.beta(p["r"], p["s"], loc=p["a"], scale=p["b"] - p["a"])
        raise ConfigurationError(f"no frozen distribution for kind {self.kind!r}")

    def pdf(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.kind == "kde":
            u = (z[..., None] - self.points) / self.bandwidth
            return np.exp(-0.5 * u * u).mean(axis=-1) / (self.bandwidth * math.sqrt(2 * math.pi))
        return self._frozen().pdf(z)

    def cdf(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.kind == "kde":
            u = (z[..., None] - self.points) / self.bandwidth
            return np.asarray(stats.norm._cdf(u).mean(axis=-1))
        return self._frozen().cdf(z)

    def icdf(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0.0) or np.any(u >= 1.0):
            raise DomainError("icdf argument must lie strictly inside (0, 1)")
        if self.kind == "kde":
            lo = float(self.points.min()) - 9.0 * self.bandwidth
            hi = float(self.points.max()) + 9.0 * self.bandwidth
            return _bisect_monotone(self.cdf, u, lo, hi)
        return self._frozen().ppf(u)

    def loglik(self, z) -> float:
        with np.errstate(divide="ignore"):
            logp = np.log(self.pdf(z))
        return float(np.sum(logp))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "aic": float(self.aic)}
        if self.params:
            out["params"] = {k: float(v) for k, v in self.params.items()}
        if self.kind == "kde":
            out["points"] = [float(x) for x in self.points]
            out["bandwidth"] = float(self.bandwidth)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "MarginalModel":
        return cls(
            kind=d["kind"],
            params=dict(d.get("params", {})),
            points=np.array(d["points"], dtype=float) if "points" in d else None,
            bandwidth=d.get("bandwidth"),
            aic=float(d.get("aic", 0.0)),
        )


def _bisect_monotone(f: Callable, target: np.ndarray, lo: float, hi: float, iters: int = 80) -> np.ndarray:
    """Vectorized bisection for a monotone increasing f; deterministic."""
    target = np.asarray(target, dtype=float)
    a = np.full(target.shape, lo)
    b = np.full(target.shape, hi)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        below = f(mid) < target
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    return 0.5 * (a + b)


def fit_marginal_parametric(samples) -> MarginalModel:
    """Select the standardized parametric family with the smallest AIC.

    All families have their first two moments pinned to (0, 1); only the
    bounded Beta family keeps two free shape parameters, with its bounds
    taken from the data range plus a 5% margin. Families whose support does
    not cover the data are skipped.
    """
    z = np.asarray(samples, dtype=float).ravel()
    if z.size < 3:
        raise DataError("parametric marginal inference needs at least 3 samples")
    candidates = []
    for kind in PARAMETRIC_KINDS:
        if kind == "beta_bounded":
            model = _beta_bounded_candidate(z)
            if model is None:
                continue
            k_dof = 2
        else:
            model = MarginalModel(kind=kind)
            k_dof = 0
        ll = model.loglik(z)
        if not math.isfinite(ll):
            continue
        model.aic = 2.0 * k_dof - 2.0 * ll
        candidates.append(model)
    if not candidates:
        raise DegenerateDataError("no parametric family covers the sample")
    return min(candidates, key=lambda m: m.aic)


def _beta_bounded_candidate(z: np.ndarray) -> MarginalModel | None:
    span = float(z.max() - z.min())
    if span <= 0:
        return None
    a = float(z.min()) - 0.05 * span
    b = float(z.max()) + 0.05 * span
    # shape parameters pinning mean 0 / variance 1 require a*b + 1 < 0
    if a * b + 1.0 >= -1e-9:
        return None
    r = a * (a * b + 1.0) / (b - a)
    s = b * (a * b + 1.0) / (a - b)
    if r <= 0 or s <= 0:
        return None
    return MarginalModel(kind="beta_bounded", params={"a": a, "b": b, "r": r, "s": s})


def fit_marginal_kde(samples) -> MarginalModel:
    """Gaussian-kernel density estimate with the normal-reference bandwidth.

    h = sigma_hat * (4 / (3 n))^(1/5), optimal for Gaussian data.
    """
    z = np.asarray(samples, dtype=float).ravel()
    if z.size < 2:
        raise DataError("kde needs at least 2 samples")
    sigma = float(z.std(ddof=1))
    if sigma <= 0:
        raise DegenerateDataError("kde requires nonzero sample variance")
    h = sigma * (4.0 / (3.0 * z.size)) ** 0.2
    return MarginalModel(kind="kde", points=z.copy(), bandwidth=h)


def marginal_cdf(model: MarginalModel, z):
    return model.cdf(z)


def marginal_icdf(model: MarginalModel, u):
    return model.icdf(u)


def kendall_tau(u, v) -> float:
    """Kendall rank correlation: (concordant - discordant) / total pairs."""
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.size != v.size:
        raise DataError("samples must have equal length")
    n = u.size
    if n < 2:
        raise DataError("kendall_tau needs at least 2 observations")
    du = np.sign(u[:, None] - u[None, :]).astype(np.int8)
    dv = np.sign(v[:, None] - v[None, :]).astype(np.int8)
    return float((du.astype(np.int32) * dv).sum()) / (n * (n - 1))


# ---------------------------------------------------------------------------
# pair copulas
# ---------------------------------------------------------------------------

PAIR_FAMILIES = ("independence", "gaussian", "clayton", "frank", "gumbel")

_THETA_RANGE = {
    "gaussian": (-0.999, 0.999),
    "clayton": (1e-3, 28.0),
    "frank": (-35.0, 35.0),
    "gumbel": (1.0 + 1e-6, 28.0),
}


@dataclass(frozen=True)
class PairCopula:
    """Bivariate copula family with a single dependence parameter."""

    family: str
    theta: float = 0.0
    aic: float = 0.0

    def __post_init__(self):
        if self.family not in PAIR_FAMILIES:
            raise ConfigurationError(f"unknown pair-copula family {self.family!r}")
        if self.family != "independence":
            lo, hi = _THETA_RANGE[self.family]
            if not lo <= self.theta <= hi:
                raise ConfigurationError(
                    f"{self.family} parameter {self.theta} outside [{lo}, {hi}]"
                )
        if self.family == "frank" and self.theta == 0.0:
            raise ConfigurationError("frank copula parameter must be nonzero")

    def to_dict(self) -> dict:
        return {"family": self.family, "theta": float(self.theta), "aic": float(self.aic)}

    @classmethod
    def from_dict(cls, d: dict) -> "PairCopula":
        return cls(d["family"], float(d.get("theta", 0.0)), float(d.get("aic", 0.0)))


def pair_cdf(cop: PairCopula, u, v) -> np.ndarray:
    """Copula CDF C(u, v)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    t = cop.theta
    if cop.family == "independence":
        return u * v
    if cop.family == "gaussian":
        x = stats.norm.ppf(u)
        y = stats.norm.ppf(v)
        pts = np.stack(np.broadcast_arrays(x, y), axis=-1)
        mvn = stats.multivariate_normal(mean=[0.0, 0.0], cov=[[1.0, t], [t, 1.0]])
        return np.asarray(mvn.cdf(pts))
    if cop.family == "clayton":
        return (u ** (-t) + v ** (-t) - 1.0) ** (-1.0 / t)
    if cop.family == "frank":
        em = math.expm1(-t)
        return -1.0 / t * np.log1p(np.expm1(-t * u) * np.expm1(-t * v) / em)
    if cop.family == "gumbel":
        s = (-np.log(u)) ** t + (-np.log(v)) ** t
        return np.exp(-(s ** (1.0 / t)))
    raise ConfigurationError(cop.family)


def pair_logpdf(cop: PairCopula, u, v) -> np.ndarray:
    """Log of the copula density c(u, v)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    t = cop.theta
    if cop.family == "independence":
        return np.zeros(np.broadcast(u, v).shape)
    if cop.family == "gaussian":
        x = stats.norm.ppf(u)
        y = stats.norm.ppf(v)
        r2 = 1.0 - t * t
        return -0.5 * math.log(r2) - (t * t * (x * x + y * y) - 2.0 * t * x * y) / (2.0 * r2)
    if cop.family == "clayton":
        lu = np.log(u)
        lv = np.log(v)
        core = np.exp(-t * lu) + np.exp(-t * lv) - 1.0
        return math.log1p(t) - (1.0 + t) * (lu + lv) - (2.0 + 1.0 / t) * np.log(core)
    if cop.family == "frank":
        em = math.expm1(-t)
        d = em + np.expm1(-t * u) * np.expm1(-t * v)
        return math.log(abs(t)) + math.log(abs(em)) - t * (u + v) - 2.0 * np.log(np.abs(d))
    if cop.family == "gumbel":
        lu = -np.log(u)
        lv = -np.log(v)
        s = lu**t + lv**t
        s_pow = s ** (1.0 / t)
        return (
            -s_pow
            - np.log(u)
            - np.log(v)
            + (t - 1.0) * (np.log(lu) + np.log(lv))
            + (1.0 / t - 2.0) * np.log(s)
            + np.log(s_pow + t - 1.0)
        )
    raise ConfigurationError(cop.family)


def h_function(cop: PairCopula, u, v) -> np.ndarray:
    """Conditional CDF h(u | v) = dC(u, v)/dv, with v the conditioning value."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    t = cop.theta
    if cop.family == "independence":
        return np.broadcast_to(u, np.broadcast(u, v).shape).copy()
    if cop.family == "gaussian":
        x = stats.norm.ppf(u)
        y = stats.norm.ppf(v)
        return stats.norm.cdf((x - t * y) / math.sqrt(1.0 - t * t))
    if cop.family == "clayton":
        core = u ** (-t) + v ** (-t) - 1.0
        return v ** (-t - 1.0) * core ** (-1.0 - 1.0 / t)
    if cop.family == "frank":
        eu = np.expm1(-t * u)
        ev = np.expm1(-t * v)
        em = math.expm1(-t)
        return (ev + 1.0) * eu / (em + eu * ev)
    if cop.family == "gumbel":
        lu = -np.log(u)
        lv = -np.log(v)
        s = lu**t + lv**t
        return np.exp(-(s ** (1.0 / t))) * lv ** (t - 1.0) * s ** (1.0 / t - 1.0) / v
    raise ConfigurationError(cop.family)


def h_inverse(cop: PairCopula, p, v) -> np.ndarray:
    """Inverse of :func:`h_function` in its first argument."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    t = cop.theta
    if cop.family == "independence":
        return np.broadcast_to(p, np.broadcast(p, v).shape).copy()
    if cop.family == "gaussian":
        x = stats.norm.ppf(p)
        y = stats.norm.ppf(v)
        return stats.norm.cdf(x * math.sqrt(1.0 - t * t) + t * y)
    if cop.family == "clayton":
        inner = (p * v ** (t + 1.0)) ** (-t / (t + 1.0)) + 1.0 - v ** (-t)
        return inner ** (-1.0 / t)
    if cop.family == "frank":
        em = math.expm1(-t)
        ev = np.expm1(-t * v)
        arg = p * em / (1.0 + ev * (1.0 - p))
        return -np.log1p(arg) / t
    if cop.family == "gumbel":
        p_b, v_b = np.broadcast_arrays(p, v)
        flat_p = np.clip(p_b.ravel(), 1e-14, 1.0 - 1e-14)
        flat_v = v_b.ravel()
        out = _bisect_monotone(
            lambda uu: h_function(cop, uu, flat_v), flat_p, 1e-14, 1.0 - 1e-14
        )
        return out.reshape(p_b.shape)
    raise ConfigurationError(cop.family)


def fit_pair_copula(u, v) -> PairCopula:
    """Fit each pair-copula family by 1-D maximum likelihood; select by AIC.

    A Kendall-tau rank test screens for independence first (5% level, the
    usual asymptotic normal approximation); only if independence is rejected
    are the parametric families fitted and compared by AIC, with the
    independence copula entering the selection at zero parameters and zero
    log-likelihood. Values at exactly 0 or 1 are nudged inward by 1e-10
    with a warning.
    """
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.size != v.size or u.size < 2:
        raise DataError("need two equal-length samples with at least 2 points")
    if np.any((u < 0) | (u > 1) | (v < 0) | (v > 1)):
        raise DomainError("pseudo-observations must lie in [0, 1]")
    if np.any((u <= 0) | (u >= 1) | (v <= 0) | (v >= 1)):
        warnings.warn("pseudo-observations at {0,1} perturbed inward by 1e-10", stacklevel=2)
        u = np.clip(u, _UNIFORM_EPS, 1.0 - _UNIFORM_EPS)
        v = np.clip(v, _UNIFORM_EPS, 1.0 - _UNIFORM_EPS)

    n = u.size
    tau = kendall_tau(u, v)
    tau_sd = math.sqrt(2.0 * (2.0 * n + 5.0) / (9.0 * n * (n - 1.0)))
    if abs(tau) <= 1.959963984540054 * tau_sd:
        return PairCopula("independence", aic=0.0)

    best = PairCopula("independence", aic=0.0)
    for family in ("gaussian", "clayton", "frank", "gumbel"):
        fitted = _mle_pair(family, u, v)
        if fitted is not None and fitted.aic < best.aic:
            best = fitted
    return best


def _mle_pair(family: str, u: np.ndarray, v: np.ndarray) -> PairCopula | None:
    def nll_at(theta: float) -> float:
        try:
            ll = float(np.sum(pair_logpdf(PairCopula(family, theta), u, v)))
        except (FloatingPointError, ValueError):
            return math.inf
        return -ll if math.isfinite(ll) else math.inf

    lo, hi = _THETA_RANGE[family]
    if family == "gaussian":
        brackets = [(lo, hi, lambda s: s)]
    elif family == "clayton":
        brackets = [(math.log(lo), math.log(hi), math.exp)]
    elif family == "gumbel":
        brackets = [(math.log(lo - 1.0), math.log(hi - 1.0), lambda s: 1.0 + math.exp(s))]
    else:  # frank: optimize log|theta| on both signs
        brackets = [
            (math.log(1e-3), math.log(hi), math.exp),
            (math.log(1e-3), math.log(hi), lambda s: -math.exp(s)),
        ]
    best_theta, best_nll = None, math.inf
    with np.errstate(all="ignore"):
        for s_lo, s_hi, transform in brackets:
            res = optimize.minimize_scalar(
                lambda s: nll_at(transform(s)),
                bounds=(s_lo, s_hi),
                method="bounded",
                options={"xatol": 1e-6},
            )
            if res.fun < best_nll:
                best_nll = float(res.fun)
                best_theta = transform(float(res.x))
    if best_theta is None or not math.isfinite(best_nll):
        return None
    aic = 2.0 + 2.0 * best_nll  # k = 1
    return PairCopula(family, best_theta, aic=aic)


# ---------------------------------------------------------------------------
# canonical vine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VineCopula:
    """C-vine copula: root ordering plus one pair-copula list per tree.

    trees[t][j] couples the tree-t root order[t] with variable order[t+1+j],
    conditioned on the previous roots (simplified-vine assumption).
    """

    order: tuple[int, ...]
    trees: tuple[tuple[PairCopula, ...], ...]

    def __post_init__(self):
        k = len(self.order)
        if sorted(self.order) != list(range(k)):
            raise ConfigurationError("vine order must be a permutation of 0..K-1")
        expected = [k - 1 - t for t in range(k - 1)]
        if [len(tree) for tree in self.trees] != expected:
            raise ConfigurationError("vine must hold K-1-t pair copulas in tree t")

    @property
    def dims(self) -> int:
        return len(self.order)

    @property
    def n_pairs(self) -> int:
        return sum(len(t) for t in self.trees)

    def is_independence(self) -> bool:
        return all(c.family == "independence" for tree in self.trees for c in tree)

    def to_dict(self) -> dict:
        return {
            "order": list(self.order),
            "trees": [[c.to_dict() for c in tree] for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VineCopula":
        return cls(
            tuple(int(i) for i in d["order"]),
            tuple(tuple(PairCopula.from_dict(c) for c in tree) for tree in d["trees"]),
        )

    @classmethod
    def independence(cls, dims: int) -> "VineCopula":
        trees = tuple(
            tuple(PairCopula("independence") for _ in range(dims - 1 - t))
            for t in range(dims - 1)
        )
        return cls(tuple(range(dims)), trees)


def fit_vine(U) -> VineCopula:
    """Sequential C-vine inference on pseudo-observations U (n x K).

    The root of every tree is the variable with the largest sum of absolute
    Kendall taus to the remaining ones; pair copulas are fitted tree by tree
    and deeper trees condition through the h-functions of the shallower
    ones (simplified vine, sequential maximum likelihood).
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    n, k = U.shape
    if k < 2:
        raise DataError("vine inference needs at least 2 dimensions")
    if np.any((U <= 0) | (U >= 1)):
        U = np.clip(U, _UNIFORM_EPS, 1.0 - _UNIFORM_EPS)
    V = U.copy()
    remaining = list(range(k))
    order: list[int] = []
    fitted: dict[tuple[int, int], PairCopula] = {}
    for tree in range(k - 1):
        taus = {
            a: sum(abs(kendall_tau(V[:, a], V[:, b])) for b in remaining if b != a)
            for a in remaining
        }
        root = max(remaining, key=lambda a: (taus[a], -a))
        order.append(root)
        remaining.remove(root)
        for other in remaining:
            cop = fit_pair_copula(V[:, other], V[:, root])
            fitted[(tree, other)] = cop
            V[:, other] = np.clip(
                h_function(cop, V[:, other], V[:, root]), _UNIFORM_EPS, 1.0 - _UNIFORM_EPS
            )
    order.append(remaining[0])
    trees = tuple(
        tuple(fitted[(t, order[j])] for j in range(t + 1, k)) for t in range(k - 1)
    )
    return VineCopula(tuple(order), trees)


def vine_sample(vine: VineCopula, W: np.ndarray) -> np.ndarray:
    """Transform iid uniforms W (n x K) into vine-distributed uniforms.

    Conditional-inversion sampling for the C-vine; row i of the output
    depends only on row i of W.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    n, k = W.shape
    if k != vine.dims:
        raise ConfigurationError("uniform matrix width must equal vine dimension")
    if k == 1:
        return W.copy()
    # v[i][j] as in the classical conditional-inversion algorithm, in the
    # ordered coordinate system (column t of X_ord is variable vine.order[t])
    x_ord = np.empty((n, k))
    x_ord[:, 0] = W[:, 0]
    v_diag = [W[:, 0]]  # v[j][j]: conditioned value of root j
    for i in range(1, k):
        t = W[:, i].copy()
        for kk in range(i - 1, -1, -1):
            cop = vine.trees[kk][i - kk - 1]
            t = h_inverse(cop, t, v_diag[kk])
            np.clip(t, _UNIFORM_EPS, 1.0 - _UNIFORM_EPS, out=t)
        x_ord[:, i] = t
        if i < k - 1:
            for j in range(i):
                cop = vine.trees[j][i - j - 1]
                t = np.clip(
                    h_function(cop, t, v_diag[j]), _UNIFORM_EPS, 1.0 - _UNIFORM_EPS
                )
            v_diag.append(t)
    out = np.empty_like(x_ord)
    for pos, var in enumerate(vine.order):
        out[:, var] = x_ord[:, pos]
    return out


# ---------------------------------------------------------------------------
# joint model
# ---------------------------------------------------------------------------

INFERENCE_OPTIONS = {
    1: "gaussian",
    2: "parametric",
    3: "kde",
    4: "kde-copula",
}


@dataclass
class JointDistModel:
    """Joint distribution of the KL coordinates: marginals plus a C-vine."""

    marginals: tuple[MarginalModel, ...]
    vine: VineCopula
    option: int

    def __post_init__(self):
        if len(self.marginals) != self.vine.dims:
            raise ConfigurationError("marginal count must match vine dimension")
        if self.option not in INFERENCE_OPTIONS:
            raise ConfigurationError(f"inference option must be 1..4, got {self.option}")

    @property
    def dims(self) -> int:
        return len(self.marginals)

    def to_dict(self) -> dict:
        return {
            "option": self.option,
            "marginals": [m.to_dict() for m in self.marginals],
            "vine": self.vine.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JointDistModel":
        return cls(
            tuple(MarginalModel.from_dict(m) for m in d["marginals"]),
            VineCopula.from_dict(d["vine"]),
            int(d["option"]),
        )


def fit_joint(xi: np.ndarray, option: int) -> JointDistModel:
    """Infer the joint distribution of the KL coordinates from realizations.

    Parameters
    ----------
    xi : (K, R) matrix of KL-coordinate realizations (one row per mode)
    option : 1 standard Gaussian + independence; 2 parametric marginals +
        vine copula; 3 KDE marginals + independence; 4 KDE marginals + vine.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    k, _ = xi.shape
    if option not in INFERENCE_OPTIONS:
        raise ConfigurationError(f"inference option must be 1..4, got {option}")
    if option == 1:
        marginals = tuple(MarginalModel(kind="gaussian_std") for _ in range(k))
        return JointDistModel(marginals, VineCopula.independence(k), option)
    if option in (2, 4):
        fit_m = fit_marginal_parametric if option == 2 else fit_marginal_kde
        marginals = tuple(fit_m(xi[i]) for i in range(k))
        if k == 1:
            return JointDistModel(marginals, VineCopula.independence(1), option)
        U = np.column_stack(
            [np.clip(m.cdf(xi[i]), _UNIFORM_EPS, 1 - _UNIFORM_EPS) for i, m in enumerate(marginals)]
        )
        return JointDistModel(marginals, fit_vine(U), option)
    marginals = tuple(fit_marginal_kde(xi[i]) for i in range(k))
    return JointDistModel(marginals, VineCopula.independence(k), option)


def sample_joint(model: JointDistModel, n: int, seed) -> np.ndarray:
    """Draw n samples (n x K), deterministic for a given seed.

    The i-th row consumes exactly the i-th block of K uniforms from the
    seeded PCG64 stream, so row i is reproducible independently of n.
    """
    if n < 1:
        raise DataError("need at least one sample")
    rng = np.random.default_rng(seed)
    W = rng.random((n, model.dims))
    np.clip(W, 1e-12, 1.0 - 1e-12, out=W)
    U = vine_sample(model.vine, W)
    out = np.empty_like(U)
    for i, m in enumerate(model.marginals):
        out[:, i] = m.icdf(U[:, i])
    return out
