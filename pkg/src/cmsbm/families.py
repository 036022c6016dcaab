"""Decorated cycle and path families encoded as color words.

A decorated cycle (path) on `aleph` subject vertices is described by a word of
length `aleph` over colors {0, ..., L}: letter 0 is a two-edge detour through
a fresh feature vertex, letter ell >= 1 is a single subject-subject edge of
that color.  Unlabeled shapes are word orbits: under the dihedral group
(rotations + reflections) for cycles, under reversal for paths.

Each class carries the signal weight
    Xi = rho^(dif0 + 2*dif) * prod_c strength_c^(count_c / 2),
where dif0 counts adjacent pairs mixing a 0-letter with a colored letter and
dif counts adjacent pairs of two distinct nonzero colors (cyclically for
cycles, along the open chain for paths), and the family normalizer is
    beta = sum over classes of Xi^2 / aut.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import BudgetExceeded, InvalidParams
from .model import ModelParams
from .thresholds import InteractionMatrix, signal_strengths, sigma_plus

DEFAULT_WORD_BUDGET = 10**7


@dataclass(frozen=True)
class ColorWord:
    """A cycle or path decoration: letters over {0..L} plus the topology."""

    letters: tuple[int, ...]
    topology: str  # "cycle" or "path"

    def __post_init__(self):
        if self.topology not in ("cycle", "path"):
            raise InvalidParams(f"unknown topology {self.topology!r}")
        if self.topology == "cycle" and len(self.letters) < 3:
            raise InvalidParams(
                "cycles need at least 3 subject vertices (a 2-cycle with a "
                "colored edge pair would be a multi-edge)"
            )


@dataclass(frozen=True)
class FamilyClass:
    """One unlabeled shape: canonical word, automorphism count, dif counts,
    per-color letter counts, and signal weight Xi."""

    word: ColorWord
    aut: int
    dif0: int
    dif: int
    counts: tuple[int, ...]
    xi: float


@dataclass(frozen=True)
class FamilyWeights:
    """A full family at one length: its classes and normalizer beta."""

    classes: tuple[FamilyClass, ...]
    beta: float
    aleph: int
    topology: str


def dif_counts(letters: Sequence[int], topology: str) -> tuple[int, int]:
    """Count adjacent mixed pairs: (0 vs colored, colored vs distinct
    colored).  Cycles include the wraparound pair; paths do not."""
    k = len(letters)
    pairs = range(k) if topology == "cycle" else range(k - 1)
    dif0 = dif = 0
    for i in pairs:
        a, b = letters[i], letters[(i + 1) % k]
        if a == b:
            continue
        if a == 0 or b == 0:
            dif0 += 1
        else:
            dif += 1
    return dif0, dif


def _cycle_orbit(letters: tuple[int, ...]) -> set[tuple[int, ...]]:
    k = len(letters)
    doubled = letters + letters
    rev = letters[::-1]
    rev_doubled = rev + rev
    orbit = {doubled[i : i + k] for i in range(k)}
    orbit.update(rev_doubled[i : i + k] for i in range(k))
    return orbit


def canonical_cycle(letters: tuple[int, ...]) -> tuple[tuple[int, ...], int]:
    """Lexicographically minimal dihedral representative and orbit size."""
    orbit = _cycle_orbit(letters)
    return min(orbit), len(orbit)


def canonical_path(letters: tuple[int, ...]) -> tuple[tuple[int, ...], int]:
    """Minimal representative under reversal and orbit size (1 or 2)."""
    rev = letters[::-1]
    if rev == letters:
        return letters, 1
    return min(letters, rev), 2


def classify_word(
    letters: Sequence[int], topology: str, params: ModelParams
) -> FamilyClass:
    """Canonicalize one word and compute its class data."""
    letters = tuple(int(c) for c in letters)
    strengths = signal_strengths(params)
    if topology == "cycle":
        canon, orbit = canonical_cycle(letters)
        aut = 2 * len(letters) // orbit
    else:
        canon, orbit = canonical_path(letters)
        aut = 2 // orbit
    d0, d = dif_counts(canon, topology)
    counts = tuple(canon.count(c) for c in range(params.L + 1))
    xi = params.rho ** (d0 + 2 * d)
    for c, cnt in enumerate(counts):
        xi *= strengths[c] ** (cnt / 2.0)
    return FamilyClass(
        word=ColorWord(letters=canon, topology=topology),
        aut=aut,
        dif0=d0,
        dif=d,
        counts=counts,
        xi=float(xi),
    )


def _enumerate(
    aleph: int,
    params: ModelParams,
    topology: str,
    color_restrict: Optional[int],
    budget: int,
) -> FamilyWeights:
    n_colors = params.L + 1
    if color_restrict is not None:
        if not 0 <= color_restrict < n_colors:
            raise InvalidParams(f"color_restrict {color_restrict} out of range")
        words = [(color_restrict,) * aleph]
    else:
        total = n_colors**aleph
        if total > budget:
            raise BudgetExceeded(
                f"{total} words of length {aleph} over {n_colors} colors "
                f"exceed the enumeration budget {budget}; reduce aleph or L"
            )
        words = itertools.product(range(n_colors), repeat=aleph)

    seen: dict[tuple[int, ...], FamilyClass] = {}
    for w in words:
        if topology == "cycle":
            canon, _ = canonical_cycle(w)
        else:
            canon, _ = canonical_path(w)
        if canon not in seen:
            seen[canon] = classify_word(canon, topology, params)
    classes = tuple(seen[k] for k in sorted(seen))
    beta = math.fsum(cls.xi**2 / cls.aut for cls in classes)
    return FamilyWeights(classes=classes, beta=beta, aleph=aleph, topology=topology)


def enumerate_cycles(
    aleph: int,
    params: ModelParams,
    color_restrict: Optional[int] = None,
    budget: int = DEFAULT_WORD_BUDGET,
) -> FamilyWeights:
    """All unlabeled decorated cycles on `aleph` subject vertices.

    `color_restrict` keeps only the monochromatic word of that color (the
    single-channel baseline family).
    """
    if aleph < 3:
        raise InvalidParams(f"cycle families need aleph >= 3, got {aleph}")
    return _enumerate(aleph, params, "cycle", color_restrict, budget)


def enumerate_paths(
    aleph: int,
    params: ModelParams,
    leaf_restricted: bool = False,
    color_restrict: Optional[int] = None,
    budget: int = DEFAULT_WORD_BUDGET,
) -> FamilyWeights:
    """All unlabeled decorated paths with `aleph` letters (aleph+1 subject
    vertices).

    In the word encoding both endpoints are automatically subject vertices,
    so `leaf_restricted` True/False give identical families; the flag only
    documents which variant a caller meant.
    """
    if aleph < 1:
        raise InvalidParams(f"path families need aleph >= 1, got {aleph}")
    del leaf_restricted  # identical by construction; see module docstring
    return _enumerate(aleph, params, "path", color_restrict, budget)


def per_edge_weights(params: ModelParams) -> dict:
    """Multiplicative decomposition of Xi into per-letter and adjacent-pair
    factors, used by the transfer backend.

    base[c]    = strength_c^(1/2) for each letter of color c
    pair[c,c'] = 1 if c == c', rho if exactly one of c, c' is 0, rho^2 if
                 c != c' are both colored
    so that Xi(word) = prod_i base[w_i] * prod_adjacent pair[w_i, w_(i+1)].
    """
    strengths = signal_strengths(params)
    k = params.L + 1
    pair = np.full((k, k), params.rho**2)
    pair[0, :] = params.rho
    pair[:, 0] = params.rho
    np.fill_diagonal(pair, 1.0)
    return {"base": np.sqrt(strengths), "pair": pair}


def xi_from_pairs(letters: Sequence[int], topology: str, params: ModelParams) -> float:
    """Reconstruct Xi from the per-edge decomposition (cross-check path)."""
    w = per_edge_weights(params)
    k = len(letters)
    out = 1.0
    for c in letters:
        out *= w["base"][c]
    pairs = range(k) if topology == "cycle" else range(k - 1)
    for i in pairs:
        out *= w["pair"][letters[i], letters[(i + 1) % k]]
    return float(out)


def beta_bounds_check(weights: FamilyWeights, M: InteractionMatrix) -> dict:
    """Ratios comparing beta against the top-eigenvalue growth rate.

    Returns beta / sigma_plus^aleph, plus for cycles the aleph^2-corrected
    ratio matching the known lower-bound shape.
    """
    sp = sigma_plus(M)
    ratio = weights.beta / sp**weights.aleph
    report = {
        "aleph": weights.aleph,
        "topology": weights.topology,
        "beta": weights.beta,
        "sigma_plus": sp,
        "ratio": ratio,
        "ratio_corrected": ratio * weights.aleph**2 if weights.topology == "cycle" else None,
    }
    return report


def beta_band_check(reports: Sequence[dict], band: float = 20.0) -> dict:
    """Check that a sequence of beta ratios stays within a factor-`band`
    envelope (max/min <= band), per topology-appropriate ratio."""
    values = [
        r["ratio_corrected"] if r["ratio_corrected"] is not None else r["ratio"]
        for r in reports
    ]
    spread = max(values) / min(values)
    return {
        "values": values,
        "spread": spread,
        "band": band,
        "within_band": spread <= band,
    }
