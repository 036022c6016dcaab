"""Independent brute-force ground truth.

Everything here is written for transparency, not speed: literal loops over
labeled decorated subgraphs, exhaustive sign-configuration enumeration, and
pairing-by-pairing Gaussian moments.  The fast statistic backends are tested
against these implementations, never the other way around.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BudgetExceeded, DominanceViolated, InfeasibleSize
from .families import classify_word, enumerate_cycles, enumerate_paths
from .model import ModelParams, Observation, center_layer


# ---------------------------------------------------------------------------
# Moment oracles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentQuery:
    """Even-moment query: exponent 2*alpha on the shared-labeling overlap and
    2*alphas[ell] on each per-layer overlap, at ambient dimension n_small."""

    alpha: int
    alphas: tuple[int, ...]
    n_small: int

    def __post_init__(self):
        if self.alpha + sum(self.alphas) > 4:
            raise BudgetExceeded(
                f"total moment order {self.alpha + sum(self.alphas)} exceeds the"
                " exhaustive-enumeration budget of 4"
            )


def bernoulli_moment(q: MomentQuery, rho: float) -> float:
    """E[(<x,x'>/sqrt(n))^(2a) * prod_ell (<x_ell,x_ell'>/sqrt(n))^(2a_ell)]
    for independent uniform sign vectors x, x' and per-layer flips with
    correlation rho.

    The expectation factorizes over coordinates: assigning per-coordinate
    factor counts b = (b_0, b_1, ..., b_L) contributes
    1{sum(b) even} * rho^(2 * #{ell >= 1 : b_ell odd}), so a dynamic program
    over coordinates with multinomial splitting evaluates the sum exactly.
    """
    n = q.n_small
    r_full = (2 * q.alpha,) + tuple(2 * a for a in q.alphas)
    n_channels = len(r_full)

    def per_coord(b: tuple[int, ...]) -> float:
        if sum(b) % 2:
            return 0.0
        odd_layers = sum(1 for v in b[1:] if v % 2)
        return rho ** (2 * odd_layers)

    @lru_cache(maxsize=None)
    def dp(k: int, r: tuple[int, ...]) -> float:
        if k == 0:
            return 1.0 if not any(r) else 0.0
        total = 0.0
        for b in itertools.product(*(range(v + 1) for v in r)):
            m = per_coord(b)
            if m == 0.0:
                continue
            weight = 1.0
            for c in range(n_channels):
                weight *= math.comb(r[c], b[c])
            total += weight * m * dp(k - 1, tuple(r[c] - b[c] for c in range(n_channels)))
        return total

    scale = n ** (q.alpha + sum(q.alphas))
    return dp(n, r_full) / scale


def bernoulli_moment_literal(q: MomentQuery, rho: float) -> float:
    """The same moment by literal enumeration of every sign configuration
    (x, x', all z_ell, z_ell'); exponential cost, n_small <= 3 only."""
    n = q.n_small
    L = len(q.alphas)
    if n > 3:
        raise BudgetExceeded(f"literal enumeration needs n_small <= 3, got {n}")
    signs = list(itertools.product((1, -1), repeat=n))
    p_plus = (1.0 + rho) / 2.0

    def z_weight(z: tuple[int, ...]) -> float:
        w = 1.0
        for s in z:
            w *= p_plus if s == 1 else 1.0 - p_plus
        return w

    sqrt_n = math.sqrt(n)
    total = 0.0
    for x in signs:
        for xp in signs:
            base = (sum(a * b for a, b in zip(x, xp)) / sqrt_n) ** (2 * q.alpha)
            if base == 0.0 and q.alpha > 0:
                continue
            # Layers are conditionally independent given (x, x'); enumerate
            # each layer's (z, z') pairs exhaustively.
            layer_val = 1.0
            for ell in range(L):
                acc = 0.0
                for z in signs:
                    wz = z_weight(z)
                    for zp in signs:
                        ov = sum(a * za * b * zb for a, za, b, zb in zip(x, z, xp, zp))
                        acc += wz * z_weight(zp) * (ov / sqrt_n) ** (2 * q.alphas[ell])
                layer_val *= acc
            total += base * layer_val
    return total / 4.0**n  # uniform weight for x and x'


def gaussian_moment(q: MomentQuery, rho: float) -> float:
    """E[U^(2a) * prod V_ell^(2a_ell)] for jointly centered Gaussians with
    unit variances, Cov(U, V_ell) = rho^2 and Cov(V_ell, V_ell') = rho^4,
    by explicit enumeration of pair matchings."""
    variables: list[int] = [0] * (2 * q.alpha)
    for ell, a in enumerate(q.alphas, start=1):
        variables.extend([ell] * (2 * a))
    if len(variables) > 8:
        raise BudgetExceeded(f"total degree {len(variables)} exceeds 8")

    def cov(a: int, b: int) -> float:
        if a == b:
            return 1.0
        if a == 0 or b == 0:
            return rho**2
        return rho**4

    def pairings(vs: tuple[int, ...]) -> float:
        if not vs:
            return 1.0
        head, rest = vs[0], vs[1:]
        total = 0.0
        for j in range(len(rest)):
            total += cov(head, rest[j]) * pairings(rest[:j] + rest[j + 1 :])
        return total

    return pairings(tuple(variables))


def moment_dominance_suite(
    L: int = 2,
    rhos: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0),
    n_values: tuple[int, ...] = (2, 3, 4, 5, 6),
    max_degree: int = 3,
    slack: float = 1e-12,
) -> dict:
    """Assert the sign-vector moment never exceeds the Gaussian moment, over
    every query with alpha + sum(alphas) <= max_degree, each n, each rho.

    Returns a report with the worst (most positive) gap; raises
    DominanceViolated if any gap exceeds `slack`.
    """
    exponents = [
        e
        for e in itertools.product(range(max_degree + 1), repeat=L + 1)
        if 0 < sum(e) <= max_degree
    ]
    worst = -math.inf
    worst_case = None
    checked = 0
    for rho in rhos:
        for n in n_values:
            for e in exponents:
                q = MomentQuery(alpha=e[0], alphas=tuple(e[1:]), n_small=n)
                bern = bernoulli_moment(q, rho)
                gauss = gaussian_moment(q, rho)
                gap = bern - gauss
                checked += 1
                if gap > worst:
                    worst = gap
                    worst_case = {"rho": rho, "n": n, "alpha": e[0], "alphas": e[1:]}
                if gap > slack:
                    raise DominanceViolated(
                        f"sign-vector moment exceeds Gaussian moment by {gap} at "
                        f"rho={rho}, n={n}, exponents={e}"
                    )
    return {"checked": checked, "max_gap": worst, "worst_case": worst_case, "pass": True}


# ---------------------------------------------------------------------------
# Brute-force statistics
# ---------------------------------------------------------------------------


def _check_size(n: int, p: int, aleph: int) -> None:
    if n > 12 or p > 6 or aleph > 3:
        raise InfeasibleSize(
            f"brute force limited to n <= 12, p <= 6, aleph <= 3; got "
            f"n={n}, p={p}, aleph={aleph}"
        )


def _distinct_b_sum(vectors: list[np.ndarray]) -> float:
    """Sum over assignments of pairwise-distinct feature indices, one per
    zero-letter, of the product of that letter's per-index factors."""
    if not vectors:
        return 1.0
    p = vectors[0].shape[0]
    total = 0.0
    for ks in itertools.permutations(range(p), len(vectors)):
        term = 1.0
        for vec, k in zip(vectors, ks):
            term *= vec[k]
        total += term
    return total


def brute_force_detection(
    obs: Observation, params: ModelParams, aleph: int, color_restrict: int | None = None
) -> float:
    """Literal transcription of the normalized decorated-cycle count: loop
    over every canonical vertex tuple, every color word, and every
    distinct-feature-vertex assignment."""
    n, p = params.n, params.p
    _check_size(n, p, aleph)
    if aleph < 3:
        raise InfeasibleSize(f"cycle statistic needs aleph >= 3, got {aleph}")
    centered = [center_layer(obs, ell, params).values for ell in range(params.L)]
    Y = obs.Y
    family = enumerate_cycles(aleph, params, color_restrict=color_restrict)

    words: list[tuple[int, ...]]
    if color_restrict is None:
        words = list(itertools.product(range(params.L + 1), repeat=aleph))
    else:
        words = [(color_restrict,) * aleph]

    terms: list[float] = []
    for word in words:
        xi = classify_word(word, "cycle", params).xi
        c0 = word.count(0)
        norm = xi / (n ** (aleph / 2.0) * p ** (c0 / 2.0))
        for tup in itertools.permutations(range(n), aleph):
            # Canonical pointed/directed representative: smallest vertex
            # first, smaller neighbor second, so each labeled cycle is
            # visited exactly once.
            if tup[0] != min(tup) or tup[1] > tup[-1]:
                continue
            colored = 1.0
            zvecs: list[np.ndarray] = []
            for i in range(aleph):
                u, w = tup[i], tup[(i + 1) % aleph]
                c = word[i]
                if c == 0:
                    zvecs.append(Y[u] * Y[w])
                else:
                    colored *= centered[c - 1][u, w]
            if colored == 0.0:
                continue
            terms.append(norm * colored * _distinct_b_sum(zvecs))
    return math.fsum(terms) / math.sqrt(family.beta)


def brute_force_recovery(
    obs: Observation, params: ModelParams, aleph: int, color_restrict: int | None = None
) -> np.ndarray:
    """Literal decorated-path accumulation: every distinct-vertex chain of
    aleph letters adds its weighted product to the entry of its two
    endpoints.  Returns a symmetric matrix with zero diagonal."""
    n, p = params.n, params.p
    _check_size(n, p, aleph)
    centered = [center_layer(obs, ell, params).values for ell in range(params.L)]
    Y = obs.Y
    family = enumerate_paths(aleph, params, color_restrict=color_restrict)

    words: list[tuple[int, ...]]
    if color_restrict is None:
        words = list(itertools.product(range(params.L + 1), repeat=aleph))
    else:
        words = [(color_restrict,) * aleph]

    phi = np.zeros((n, n))
    for word in words:
        xi = classify_word(word, "path", params).xi
        c0 = word.count(0)
        norm = xi / (n ** (aleph / 2.0 - 1.0) * p ** (c0 / 2.0) * family.beta)
        for tup in itertools.permutations(range(n), aleph + 1):
            # Each labeled path is visited once: orient from its smaller leaf.
            if tup[0] > tup[-1]:
                continue
            colored = 1.0
            zvecs = []
            for i in range(aleph):
                u, w = tup[i], tup[i + 1]
                c = word[i]
                if c == 0:
                    zvecs.append(Y[u] * Y[w])
                else:
                    colored *= centered[c - 1][u, w]
            if colored == 0.0:
                continue
            val = norm * colored * _distinct_b_sum(zvecs)
            phi[tup[0], tup[-1]] += val
            phi[tup[-1], tup[0]] += val
    return phi
