"""Closed-form feasibility quantities.

Each channel carries a scalar signal strength: mu^2/gamma for the feature
channel and epsilon^2*lambda for each graph layer.  The aggregate threshold F,
the channel interaction matrix P and its top eigenvalue sigma_plus, the
open-chain word recursion, and a Gaussian chi-square surrogate are all pure
arithmetic in those strengths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NoConvergence
from .model import ModelParams


def signal_strengths(params: ModelParams) -> np.ndarray:
    """Per-channel signal strengths (mu^2/gamma, eps_1^2*lam_1, ...)."""
    out = np.empty(params.L + 1)
    out[0] = params.mu**2 / params.gamma
    for ell in range(params.L):
        out[ell + 1] = params.eps[ell] ** 2 * params.lam[ell]
    return out


def threshold_F(params: ModelParams, variant: str = "intro") -> float:
    """Aggregate signal strength F; detection/recovery is feasible iff F > 1.

    F is the max of three candidates: the feature strength alone, the best
    single graph layer alone, and a combined term where each layer's
    contribution is damped by the flip correlation.  The two variants differ
    in the combined term's per-layer summand: "intro" uses
    rho^4*s/(1-(1-rho^4)*s) with s = eps^2*lam, "sec3" uses the same with s
    replaced by s^2.  Summands are evaluated literally (a negative denominator
    yields a negative summand; only an exactly-zero denominator yields +inf).
    """
    if variant not in ("intro", "sec3"):
        raise ValueError(f"unknown variant {variant!r}")
    s = signal_strengths(params)
    mu2g = float(s[0])
    rho4 = params.rho**4
    combined = mu2g
    for ell in range(params.L):
        base = float(s[ell + 1])
        if variant == "sec3":
            base = base**2
        den = 1.0 - (1.0 - rho4) * base
        combined += math.inf if den == 0.0 else rho4 * base / den
    candidates = [mu2g, combined]
    if params.L:
        candidates.append(float(s[1:].max()))
    return max(candidates)


@dataclass(frozen=True)
class InteractionMatrix:
    """Channel interaction matrix P = D*V and its symmetrization
    sqrt(D)*V*sqrt(D), which shares P's characteristic polynomial and is
    positive semidefinite."""

    entries: np.ndarray
    symmetrized: np.ndarray


def interaction_matrix(params: ModelParams) -> InteractionMatrix:
    """Build the (L+1)x(L+1) interaction matrix.

    D is the diagonal of per-channel strengths; V has unit diagonal, rho^2
    between the feature channel and any layer, and rho^4 between two distinct
    layers.
    """
    s = signal_strengths(params)
    k = params.L + 1
    rho2 = params.rho**2
    V = np.full((k, k), rho2**2)
    V[0, :] = rho2
    V[:, 0] = rho2
    np.fill_diagonal(V, 1.0)
    P = s[:, None] * V  # D @ V
    root = np.sqrt(s)
    P_sym = root[:, None] * V * root[None, :]
    return InteractionMatrix(entries=P, symmetrized=P_sym)


def sigma_plus(M: InteractionMatrix) -> float:
    """Largest eigenvalue of the interaction matrix (via its PSD
    symmetrization; relative accuracy ~1e-10 from the symmetric eigensolve)."""
    try:
        eigs = np.linalg.eigvalsh(M.symmetrized)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - degenerate input
        raise NoConvergence(f"symmetric eigensolve failed: {exc}") from exc
    return float(max(eigs[-1], 0.0))


def word_recursion(params: ModelParams, aleph: int) -> np.ndarray:
    """Open-chain weighted word sums of length `aleph`, one entry per leading
    color: entry c is the sum over all length-aleph color words starting at c
    of the product of per-letter strengths and squared adjacent-pair damping
    (rho^2 where a 0-letter meets a colored letter, rho^4 where two distinct
    colors meet).  Equals P^(aleph-1) applied to the length-1 base vector.
    """
    if aleph < 1:
        raise ValueError(f"aleph must be >= 1, got {aleph}")
    v = signal_strengths(params)
    P = interaction_matrix(params).entries
    for _ in range(aleph - 1):
        v = P @ v
    return v


@dataclass(frozen=True)
class GaussianSurrogate:
    """Closed-form chi-square surrogate value; +inf with a reason when the
    underlying Gaussian moment generating function diverges."""

    value: float
    divergence_reason: Optional[str] = None

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


def chi2_surrogate(params: ModelParams, t: float = 0.0) -> GaussianSurrogate:
    """Gaussian surrogate for the chi-square divergence at spike offset t.

    Writing s_ell = eps_ell^2*lam_ell, the value is
        (1 - (1+t)^2*mu^2/gamma - sum_ell rho^4*s_ell/(1-(1-rho^4)*s_ell))^(-1/2)
        * prod_ell (1 - s_ell*(1-rho^4))^(-1/2),
    obtained by integrating the layer variables conditionally on the shared
    one.  Divergence is a value, not an error: the layer product diverges
    ("LayerFactor") when some s_ell*(1-rho^4) >= 1, else the leading factor
    diverges ("SpikeFactor") when the bracket is <= 0.
    """
    s = signal_strengths(params)
    rho4 = params.rho**4
    layer_prod = 1.0
    for ell in range(params.L):
        a = 1.0 - s[ell + 1] * (1.0 - rho4)
        if a <= 0.0:
            return GaussianSurrogate(value=math.inf, divergence_reason="LayerFactor")
        layer_prod *= a
    bracket = 1.0 - (1.0 + t) ** 2 * s[0]
    for ell in range(params.L):
        den = 1.0 - (1.0 - rho4) * s[ell + 1]
        bracket -= rho4 * s[ell + 1] / den
    if bracket <= 0.0:
        return GaussianSurrogate(value=math.inf, divergence_reason="SpikeFactor")
    return GaussianSurrogate(value=bracket**-0.5 * layer_prod**-0.5)
