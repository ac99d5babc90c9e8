"""Extended Karhunen-Loeve expansion computed in PCE coefficient space.

Once every trajectory is re-expressed by OLS on one shared regressor set,
the sample covariance function of the trajectory ensemble is a polynomial,
and the weighted-space integral eigenvalue problem collapses to a dense
symmetric eigenproblem for the centered coefficient matrix: eigenvectors
are the eigenfunctions' coefficients, and the KL-coordinate realizations
follow analytically from orthonormality of the basis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .basis import InputModel, MultiIndexSet, eval_basis
from .errors import ConfigurationError, DataError, DegenerateDataError
from .pce import PceModel, fit_ols

__all__ = [
    "JointBasisResult",
    "Eigenpairs",
    "KleModel",
    "build_joint_basis",
    "eigendecompose",
    "truncate",
    "project_xi",
    "build_kle_model",
]


@dataclass
class JointBasisResult:
    """Shared regressor set with centered per-trajectory OLS coefficients.

    coeff_matrix holds one column per trajectory (P x R), already centered;
    mean_coeffs are the coefficients of the ensemble-mean PCE.
    """

    indices: MultiIndexSet
    coeff_matrix: np.ndarray
    mean_coeffs: np.ndarray
    input_model: InputModel

    def __post_init__(self):
        self.coeff_matrix = np.asarray(self.coeff_matrix, dtype=float)
        self.mean_coeffs = np.asarray(self.mean_coeffs, dtype=float)
        p = len(self.indices)
        if self.coeff_matrix.shape[0] != p or self.mean_coeffs.shape != (p,):
            raise ConfigurationError("coefficient shapes must align with the index set")

    @property
    def n_trajectories(self) -> int:
        return self.coeff_matrix.shape[1]


class Eigenpairs(NamedTuple):
    values: np.ndarray  # descending, clipped at zero
    vectors: np.ndarray  # columns, unit norm, deterministic sign


def build_joint_basis(
    models: Sequence[PceModel],
    trajectories: Sequence[tuple[np.ndarray, np.ndarray]],
    input_model: InputModel,
    n_design: int | None = None,
) -> JointBasisResult:
    """Union the per-trajectory supports, prune, and re-fit everything by OLS.

    The union is pruned down to at most n_design // 2 regressors by
    repeatedly discarding the multi-index with the smallest sum of squared
    coefficients over all trajectories (ties drop the graded-lex-later
    index). Every trajectory is then re-fitted by OLS on the shared set,
    and the column mean is split off as the mean-function PCE.
    """
    if len(models) < 2:
        raise DataError("joint basis needs at least two trajectories")
    if len(models) != len(trajectories):
        raise DataError("one trajectory sample per model is required")
    if n_design is None:
        n_design = min(np.atleast_2d(np.asarray(X)).shape[0] for X, _ in trajectories)
    cap = max(1, n_design // 2)

    union: set[tuple[int, ...]] = set()
    for m in models:
        union |= set(m.indices)
    if not union:
        raise DegenerateDataError("no regressors were selected by any trajectory")
    A = MultiIndexSet(union)

    if len(A) > cap:
        scores = np.zeros(len(A))
        for m in models:
            for alpha, c in zip(m.indices, m.coeffs):
                scores[A.position(alpha)] += float(c) ** 2
        # ascending score, ties dropping the graded-lex-later index first
        drop_order = sorted(range(len(A)), key=lambda i: (scores[i], -i))
        dropped = set(drop_order[: len(A) - cap])
        keep = [alpha for i, alpha in enumerate(A.indices) if i not in dropped]
        if not keep:
            raise DegenerateDataError("pruning removed every regressor")
        A = MultiIndexSet(keep)

    coeffs = np.empty((len(A), len(models)))
    for r, (X, y) in enumerate(trajectories):
        coeffs[:, r] = fit_ols(X, y, input_model, A).coeffs
    mean_coeffs = coeffs.mean(axis=1)
    centered = coeffs - mean_coeffs[:, None]
    return JointBasisResult(A, centered, mean_coeffs, input_model)


def eigendecompose(jb: JointBasisResult) -> Eigenpairs:
    """Full eigenpairs of the coefficient covariance Sigma = a~ a~^T / (R-1).

    Eigenvalues are sorted descending and clipped at zero; each eigenvector
    is normalized with its largest-magnitude entry positive so results are
    reproducible across runs.
    """
    r = jb.n_trajectories
    if r < 2:
        raise DataError("need at least two trajectories")
    sigma = (jb.coeff_matrix @ jb.coeff_matrix.T) / (r - 1)
    values, vectors = np.linalg.eigh(sigma)
    order = np.argsort(values)[::-1]
    values = np.clip(values[order], 0.0, None)
    vectors = vectors[:, order]
    for k in range(vectors.shape[1]):
        lead = np.argmax(np.abs(vectors[:, k]))
        if vectors[lead, k] < 0:
            vectors[:, k] = -vectors[:, k]
    return Eigenpairs(values, vectors)


def truncate(eigenvalues: np.ndarray, epsilon: float) -> int:
    """Smallest K whose leading eigenvalues explain more than 1 - epsilon."""
    if not 0.0 < epsilon < 1.0:
        raise ConfigurationError("epsilon must lie in (0, 1)")
    values = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    total = float(values.sum())
    if total <= 0.0:
        raise DegenerateDataError("all eigenvalues vanish; nothing to truncate")
    ratio = np.cumsum(values) / total
    return int(np.argmax(ratio > 1.0 - epsilon)) + 1


def project_xi(jb: JointBasisResult, eig: Eigenpairs, k_modes: int) -> np.ndarray:
    """Analytical KL-coordinate realizations Xi = (diag(1/sqrt(lambda)) b)^T a~."""
    if k_modes < 1:
        raise ConfigurationError("need at least one mode")
    positive = int(np.sum(eig.values > 0.0))
    if k_modes > positive:
        raise DegenerateDataError(
            f"requested {k_modes} modes but only {positive} positive eigenvalues exist"
        )
    lam = eig.values[:k_modes]
    b = eig.vectors[:, :k_modes]
    return (b / np.sqrt(lam)).T @ jb.coeff_matrix


@dataclass
class KleModel:
    """Truncated extended KLE of a trajectory ensemble.

    Stores the shared index set, mean-function coefficients, the leading
    eigenpairs, the KL-coordinate realizations of the training trajectories,
    and variance bookkeeping of the truncation.
    """

    input_model: InputModel
    indices: MultiIndexSet
    mean_coeffs: np.ndarray
    eigenvalues: np.ndarray
    modes: np.ndarray  # (P, K) eigenfunction coefficients
    xi: np.ndarray  # (K, R) realizations
    explained_fraction: float
    total_variance: float

    def __post_init__(self):
        self.mean_coeffs = np.asarray(self.mean_coeffs, dtype=float)
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        self.modes = np.asarray(self.modes, dtype=float)
        self.xi = np.atleast_2d(np.asarray(self.xi, dtype=float))
        p = len(self.indices)
        k = self.eigenvalues.size
        if self.modes.shape != (p, k) or self.mean_coeffs.shape != (p,):
            raise ConfigurationError("mode matrix must be P x K aligned with the index set")
        if self.xi.shape[0] != k:
            raise ConfigurationError("xi must hold one row per retained mode")
        if np.any(np.diff(self.eigenvalues) > 0):
            raise ConfigurationError("eigenvalues must be non-increasing")

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    @property
    def n_trajectories(self) -> int:
        return self.xi.shape[1]

    def eigenfunction(self, mode: int, X) -> np.ndarray:
        """Evaluate eigenfunction `mode` (0-based) at physical points."""
        if not 0 <= mode < self.n_modes:
            raise ConfigurationError(f"mode must lie in [0, {self.n_modes})")
        return eval_basis(self.indices, self.input_model, X) @ self.modes[:, mode]

    def mean_function(self, X) -> np.ndarray:
        return eval_basis(self.indices, self.input_model, X) @ self.mean_coeffs

    def covariance(self, X, X2=None) -> np.ndarray:
        """Truncated Mercer sum: sum_k lambda_k phi_k(X) phi_k(X2)^T."""
        phi1 = eval_basis(self.indices, self.input_model, X) @ self.modes
        phi2 = phi1 if X2 is None else eval_basis(self.indices, self.input_model, X2) @ self.modes
        return (phi1 * self.eigenvalues) @ phi2.T

    def trajectory_coeffs(self, z: np.ndarray) -> np.ndarray:
        """Coefficients of the trajectory with KL coordinates z (one column per draw)."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if z.shape[1] != self.n_modes:
            raise ConfigurationError("draws must have one column per mode")
        scaled = self.modes * np.sqrt(self.eigenvalues)
        out = np.empty((len(self.indices), z.shape[0]))
        for i in range(z.shape[0]):  # per-column loop keeps draw i independent of the batch
            out[:, i] = self.mean_coeffs + scaled @ z[i]
        return out

    def to_dict(self) -> dict:
        return {
            "indices": self.indices.to_lists(),
            "mean_coeffs": self.mean_coeffs.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "eigvec_matrix": self.modes.tolist(),
            "xi": self.xi.tolist(),
            "explained_fraction": float(self.explained_fraction),
            "total_variance": float(self.total_variance),
        }

    @classmethod
    def from_dict(cls, d: dict, input_model: InputModel) -> "KleModel":
        return cls(
            input_model=input_model,
            indices=MultiIndexSet(d["indices"]),
            mean_coeffs=np.array(d["mean_coeffs"], dtype=float),
            eigenvalues=np.array(d["eigenvalues"], dtype=float),
            modes=np.array(d["eigvec_matrix"], dtype=float),
            xi=np.array(d["xi"], dtype=float),
            explained_fraction=float(d["explained_fraction"]),
            total_variance=float(d["total_variance"]),
        )


def build_kle_model(jb: JointBasisResult, epsilon: float) -> KleModel:
    """Chain eigendecomposition, truncation, and KL-coordinate projection."""
    eig = eigendecompose(jb)
    k_modes = truncate(eig.values, epsilon)
    xi = project_xi(jb, eig, k_modes)
    total = float(eig.values.sum())
    explained = float(eig.values[:k_modes].sum() / total)
    return KleModel(
        input_model=jb.input_model,
        indices=jb.indices,
        mean_coeffs=jb.mean_coeffs.copy(),
        eigenvalues=eig.values[:k_modes].copy(),
        modes=eig.vectors[:, :k_modes].copy(),
        xi=xi,
        explained_fraction=explained,
        total_variance=total,
    )
