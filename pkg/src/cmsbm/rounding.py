"""Correlation-preserving projection, sign rounding, and recovery metrics.

`psd_project` maps a raw recovery matrix to a nearby unit-diagonal PSD
matrix that keeps a floor of correlation with the input, via cyclic
projections with Dykstra corrections.  `sign_round` draws a Gaussian vector
with the projected matrix as covariance and takes coordinate-wise signs.
`metrics` scores either object against the planted signs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import Infeasible, InvalidParams, MissingTruth, NoConvergence
from .model import _TAG_ROUND, LatentState, rng_stream


@dataclass(frozen=True)
class ProjectionConfig:
    """Constraint level and iteration budget for psd_project.

    correlation_floor  level t of the half-space <phi_hat, phi> >= t*n*||phi||_F
    max_iters          cycle budget for the alternating projections
    tol                feasibility and stopping tolerance (Frobenius)
    """

    correlation_floor: float = 0.05
    max_iters: int = 5000
    tol: float = 1e-8

    def __post_init__(self):
        if not (self.correlation_floor > 0):
            raise InvalidParams(f"correlation_floor must be positive, got {self.correlation_floor}")
        if self.max_iters < 1:
            raise InvalidParams(f"max_iters must be >= 1, got {self.max_iters}")
        if not (self.tol > 0):
            raise InvalidParams(f"tol must be positive, got {self.tol}")


@dataclass(frozen=True)
class Estimate:
    """Projected matrix, optional rounded signs, and projection diagnostics."""

    phi_hat: np.ndarray
    x_hat: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)


def _project_unit_diag(M: np.ndarray) -> np.ndarray:
    out = M.copy()
    np.fill_diagonal(out, 1.0)
    return out


def _project_psd(M: np.ndarray) -> np.ndarray:
    sym = (M + M.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    vals = np.clip(vals, 0.0, None)
    out = (vecs * vals) @ vecs.T
    return (out + out.T) / 2.0


def psd_project(phi: np.ndarray, cfg: ProjectionConfig = ProjectionConfig()) -> Estimate:
    """Feasible point of {unit diagonal} I {PSD} I {correlation half-space},
    computed from phi by cyclic Dykstra projections.

    The half-space is scale-invariant in phi (both sides are linear in
    ||phi||_F), so the feasible set depends only on phi's direction; the
    iteration therefore starts from phi rescaled to Frobenius norm n — the
    natural scale of a correlation matrix — which keeps the projection
    well-conditioned when the raw statistic's norm is far from n.  The floor
    slack is measured in correlation units (floor minus achieved
    correlation), matching the scale-free constraint.

    Raises Infeasible when the floor exceeds 1 (a unit-diagonal PSD matrix
    has Frobenius norm at most n, so correlation above 1 is unreachable),
    NoConvergence when the iteration budget runs out with constraint slack
    above tol.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise InvalidParams(f"phi must be square, got shape {phi.shape}")
    target = (phi + phi.T) / 2.0
    norm = float(np.linalg.norm(target))
    if norm == 0.0:
        raise InvalidParams("phi must be nonzero")
    n = target.shape[0]
    if cfg.correlation_floor > 1.0:
        raise Infeasible(
            f"correlation floor {cfg.correlation_floor} > 1: a unit-diagonal PSD "
            f"matrix has Frobenius norm at most n, so the half-space cannot "
            f"meet the other two constraints"
        )
    direction = target / norm
    bound = cfg.correlation_floor * n  # in <M, direction> units

    def _project_halfspace(M: np.ndarray) -> np.ndarray:
        gap = bound - float(np.tensordot(M, direction))
        if gap <= 0.0:
            return M
        return M + gap * direction

    def _slack(M: np.ndarray) -> float:
        diag_dev = float(np.max(np.abs(np.diag(M) - 1.0)))
        min_eig = float(np.linalg.eigvalsh((M + M.T) / 2.0)[0])
        corr_gap = (bound - float(np.tensordot(M, direction))) / n
        return max(diag_dev, -min_eig, corr_gap, 0.0)

    projections = (_project_unit_diag, _project_psd, _project_halfspace)
    increments = [np.zeros_like(target) for _ in projections]
    M = n * direction
    iters = cfg.max_iters
    for it in range(1, cfg.max_iters + 1):
        previous = M
        for i, proj in enumerate(projections):
            shifted = M + increments[i]
            M = proj(shifted)
            increments[i] = shifted - M
        # the Estimate invariants promise feasibility within tol, so small
        # iterate motion alone is not enough to stop
        if float(np.linalg.norm(M - previous)) < cfg.tol and _slack(M) <= cfg.tol:
            iters = it
            break
    else:
        if _slack(M) > cfg.tol:
            raise NoConvergence(
                f"projection did not reach tol={cfg.tol} within "
                f"{cfg.max_iters} cycles (slack {_slack(M):.3e})"
            )
    min_eig = float(np.linalg.eigvalsh((M + M.T) / 2.0)[0])
    achieved = float(np.tensordot(M, direction)) / n
    m_norm = float(np.linalg.norm(M))
    return Estimate(
        phi_hat=M,
        diagnostics={
            "min_eigenvalue": min_eig,
            "constraint_slack": _slack(M),
            "iters": iters,
            "achieved_correlation": achieved,
            "correlation_floor": cfg.correlation_floor,
            # proximity monitor: direction cosine between output and input
            "cosine_to_input": (
                float(np.tensordot(M, direction)) / m_norm if m_norm > 0 else 0.0
            ),
        },
    )


def sign_round(est: Estimate, seed: int) -> np.ndarray:
    """Coordinate-wise signs of w ~ N(0, phi_hat); zeros resolve to +1.

    The Gaussian square root clips negative eigenvalues to zero and adds a
    1e-10 diagonal jitter so degenerate covariances still sample.
    """
    phi_hat = np.asarray(est.phi_hat, dtype=float)
    n = phi_hat.shape[0]
    vals, vecs = np.linalg.eigh((phi_hat + phi_hat.T) / 2.0)
    vals = np.clip(vals, 0.0, None) + 1e-10
    root = vecs * np.sqrt(vals)
    g = rng_stream(seed, _TAG_ROUND).standard_normal(n)
    w = root @ g
    signs = np.where(w >= 0.0, 1, -1).astype(np.int64)
    return signs


def metrics(phi_or_xhat: np.ndarray, truth: Optional[LatentState]) -> dict:
    """Frobenius cosine against xx^T for matrix input, normalized absolute
    sign agreement for vector input; the inapplicable key is None."""
    if truth is None:
        raise MissingTruth("metrics need the planted signs")
    x = np.asarray(truth.x, dtype=float)
    n = x.shape[0]
    arr = np.asarray(phi_or_xhat, dtype=float)
    if arr.ndim == 2:
        if arr.shape != (n, n):
            raise InvalidParams(
                f"matrix shape {arr.shape} does not match the {n} planted signs"
            )
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            return {"cosine": 0.0, "overlap": None}
        cosine = float(x @ arr @ x) / (norm * n)
        return {"cosine": cosine, "overlap": None}
    if arr.ndim == 1:
        if arr.shape != (n,):
            raise InvalidParams(
                f"vector length {arr.shape[0]} does not match the {n} planted signs"
            )
        overlap = abs(float(arr @ x)) / n
        return {"cosine": None, "overlap": overlap}
    raise InvalidParams(f"expected a vector or square matrix, got ndim={arr.ndim}")
