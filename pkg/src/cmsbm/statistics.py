"""Detection statistic and recovery matrix.

Both statistics are normalized sums of weighted products over embedded
decorated cycles/paths with pairwise-distinct subject vertices and pairwise-
distinct feature vertices.  Two backends are provided:

* "exact": vectorized enumeration over distinct subject tuples; the
  distinct-feature-vertex sum per word is evaluated through an exact set-
  partition identity (sum over partitions of the word's 0-positions with
  Mobius weights and pooled per-block feature sums).

* "transfer": chain contractions of color-stacked operators, summing all
  words at once.  Subject-vertex distinctness is enforced exactly via
  Mobius inclusion-exclusion over set partitions of the chain positions.
  Feature-vertex collisions are removed exactly when
  `b_collision_correction` is on (per-word correction terms); switched off
  they contribute a documented O(aleph^2/p) relative bias (their mean under
  the null is still exactly zero).

Results are deterministic: accumulation order is fixed (canonical word
order, partition order, lexicographic tuples) and independent of thread
count.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import BudgetExceeded, InfeasibleSize, PartitionBudgetExceeded
from .families import FamilyWeights, classify_word, enumerate_cycles, enumerate_paths, per_edge_weights
from .model import ModelParams, Observation, center_layer

_MAX_POSITIONS = 7  # Bell(8) = 4140 partitions is past the supported range


@dataclass(frozen=True)
class StatisticConfig:
    """How to evaluate a statistic.

    aleph                  number of letters (cycle length / path length)
    backend                "exact" or "transfer"
    threshold_c            detection threshold constant c in (0, 1)
    b_collision_correction transfer backend: remove feature-vertex collisions
    color_restrict         None for the full family, or a single color for
                           the monochromatic baseline
    op_budget              hard abort above this estimated operation count
    """

    aleph: int
    backend: str = "transfer"
    threshold_c: float = 0.5
    b_collision_correction: bool = True
    color_restrict: Optional[int] = None
    op_budget: float = 1e11


@dataclass(frozen=True)
class StatisticReport:
    """Result of one statistic evaluation."""

    beta: float
    backend: str
    elapsed: float
    aleph: int
    value: Optional[float] = None
    matrix: Optional[np.ndarray] = None
    tau: Optional[float] = None
    decision: Optional[bool] = None


# ---------------------------------------------------------------------------
# Set partitions and Mobius weights
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def set_partitions(m: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """All set partitions of range(m), deterministic order."""
    if m == 0:
        return ((),)
    if m == 1:
        return (((0,),),)
    out = []
    for smaller in set_partitions(m - 1):
        last = m - 1
        for i in range(len(smaller)):
            out.append(smaller[:i] + (smaller[i] + (last,),) + smaller[i + 1 :])
        out.append(smaller + ((last,),))
    return tuple(out)


def mobius_weight(partition: tuple[tuple[int, ...], ...]) -> float:
    """Inclusion-exclusion weight making the partition sum equal the
    distinct-index sum: prod over blocks of (-1)^(|B|-1) * (|B|-1)!."""
    w = 1.0
    for block in partition:
        k = len(block)
        w *= (-1.0) ** (k - 1) * math.factorial(k - 1)
    return w


def _partitions_of(items: tuple[int, ...]):
    for pat in set_partitions(len(items)):
        yield tuple(tuple(items[i] for i in block) for block in pat)


# ---------------------------------------------------------------------------
# Shared precomputation
# ---------------------------------------------------------------------------


class _Context:
    """Per-observation dense operators shared by words and variants."""

    def __init__(self, obs: Observation, params: ModelParams):
        self.params = params
        self.n = params.n
        self.p = params.p
        self.Y = obs.Y
        self.M0 = obs.Y @ obs.Y.T / math.sqrt(params.p)  # true diagonal kept
        self.centered = [center_layer(obs, ell, params).values for ell in range(params.L)]
        # Color-stacked operators with per-letter weights folded in, and the
        # adjacent-pair damping table.
        w = per_edge_weights(params)
        self.base = w["base"]
        self.pair = w["pair"]
        ops = [self.M0] + self.centered
        self.A = np.stack([self.base[c] * ops[c] for c in range(params.L + 1)])
        # W[c, u, c', v] = pair[c, c'] * A[c'][u, v]
        K = params.L + 1
        W = np.empty((K, self.n, K, self.n))
        for c in range(K):
            for cp in range(K):
                W[c, :, cp, :] = self.pair[c, cp] * self.A[cp]
        self.W = W

    def op(self, color: int) -> np.ndarray:
        """Unweighted operator for one letter color (feature detour or
        centered layer)."""
        return self.M0 if color == 0 else self.centered[color - 1]


def _words(params: ModelParams, aleph: int, color_restrict: Optional[int]):
    if color_restrict is not None:
        return [(color_restrict,) * aleph]
    return list(itertools.product(range(params.L + 1), repeat=aleph))


def _family(params: ModelParams, aleph: int, topology: str, color_restrict: Optional[int]) -> FamilyWeights:
    if topology == "cycle":
        return enumerate_cycles(aleph, params, color_restrict=color_restrict)
    return enumerate_paths(aleph, params, color_restrict=color_restrict)


# ---------------------------------------------------------------------------
# Exact backend: distinct subject tuples, vectorized
# ---------------------------------------------------------------------------


_TUPLE_CACHE: dict[tuple[int, int, str], np.ndarray] = {}


def _canonical_tuples(n: int, k: int, topology: str) -> np.ndarray:
    """Index arrays of pairwise-distinct subject tuples, one canonical
    representative per labeled shape: cycles fix the smallest vertex first
    with its smaller neighbor second; paths orient from the smaller leaf."""
    key = (n, k, topology)
    cached = _TUPLE_CACHE.get(key)
    if cached is not None:
        return cached
    tuples = np.array(list(itertools.permutations(range(n), k)), dtype=np.int32)
    if topology == "cycle":
        mask = (tuples.min(axis=1) == tuples[:, 0]) & (tuples[:, 1] < tuples[:, -1])
    else:
        mask = tuples[:, 0] < tuples[:, -1]
    tuples = np.ascontiguousarray(tuples[mask])
    _TUPLE_CACHE[key] = tuples
    return tuples


def _estimate_exact_cost(n: int, p: int, k: int, n_words: int) -> float:
    fall = 1.0
    for i in range(k):
        fall *= n - i
    return fall * n_words * max(p, 1)


def _word_values(
    ctx: _Context, word: tuple[int, ...], tuples: np.ndarray, topology: str
) -> np.ndarray:
    """Per-tuple weighted products for one word over the distinct-tuple
    array: colored letters gather centered-layer entries, 0-letters are
    summed over pairwise-distinct feature vertices via the partition
    identity.  No Xi or global normalization applied here."""
    aleph = len(word)
    T = tuples.shape[0]
    vals = np.ones(T)
    zsegs: list[tuple[np.ndarray, np.ndarray]] = []
    for i, c in enumerate(word):
        u = tuples[:, i]
        w = tuples[:, (i + 1) % tuples.shape[1]] if topology == "cycle" and i == aleph - 1 else tuples[:, i + 1]
        if c == 0:
            zsegs.append((u, w))
        else:
            vals = vals * ctx.centered[c - 1][u, w]
    if zsegs:
        Y = ctx.Y
        btotal = np.zeros(T)
        for partition in set_partitions(len(zsegs)):
            term = np.ones(T)
            for block in partition:
                pooled = np.ones((T, ctx.p))
                for q in block:
                    u, w = zsegs[q]
                    pooled = pooled * (Y[u] * Y[w])
                term = term * pooled.sum(axis=1)
            btotal += mobius_weight(partition) * term
        vals = vals * btotal
    return vals


def _exact_detection(ctx: _Context, cfg: StatisticConfig, family: FamilyWeights) -> float:
    params = ctx.params
    words = _words(params, cfg.aleph, cfg.color_restrict)
    cost = _estimate_exact_cost(ctx.n, ctx.p, cfg.aleph, len(words))
    if cost > cfg.op_budget:
        raise BudgetExceeded(f"estimated exact-backend cost {cost:.3g} ops exceeds budget {cfg.op_budget:.3g}")
    tuples = _canonical_tuples(ctx.n, cfg.aleph, "cycle")
    total = 0.0
    for word in words:
        xi = classify_word(word, "cycle", params).xi
        c0 = word.count(0)
        vals = _word_values(ctx, word, tuples, "cycle")
        total += xi / (ctx.n ** (cfg.aleph / 2.0) * ctx.p ** (c0 / 2.0)) * float(vals.sum())
    return total / math.sqrt(family.beta)


def _exact_recovery(ctx: _Context, cfg: StatisticConfig, family: FamilyWeights) -> np.ndarray:
    params = ctx.params
    words = _words(params, cfg.aleph, cfg.color_restrict)
    cost = _estimate_exact_cost(ctx.n, ctx.p, cfg.aleph + 1, len(words))
    if cost > cfg.op_budget:
        raise BudgetExceeded(f"estimated exact-backend cost {cost:.3g} ops exceeds budget {cfg.op_budget:.3g}")
    tuples = _canonical_tuples(ctx.n, cfg.aleph + 1, "path")
    phi = np.zeros((ctx.n, ctx.n))
    heads, tails = tuples[:, 0], tuples[:, -1]
    for word in words:
        xi = classify_word(word, "path", params).xi
        c0 = word.count(0)
        norm = xi / (ctx.n ** (cfg.aleph / 2.0 - 1.0) * ctx.p ** (c0 / 2.0) * family.beta)
        vals = norm * _word_values(ctx, word, tuples, "path")
        np.add.at(phi, (heads, tails), vals)
        np.add.at(phi, (tails, heads), vals)
    return phi


# ---------------------------------------------------------------------------
# Transfer backend: chain contractions with partition inclusion-exclusion
# ---------------------------------------------------------------------------

_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
_MAX_ELEMENTS = int(2e8)  # hard cap on any contraction intermediate


def _simplify_factor(subs: str, arr: np.ndarray) -> tuple[str, np.ndarray]:
    """Collapse repeated indices inside one factor (diagonal extraction)."""
    if len(set(subs)) == len(subs):
        return subs, arr
    dedup = "".join(sorted(set(subs), key=subs.index))
    return dedup, np.einsum(f"{subs}->{dedup}", arr)


def _contract_network(
    factors: list[tuple[str, np.ndarray]], out: str, dims: dict[str, int]
):
    """Contract a tensor network by greedy group-wise index elimination.

    numpy's einsum path search is unreliable on the merged-index networks
    the partition sums generate (some partitions blow up to naive nested
    loops), so the order is chosen here: repeatedly pick the index whose
    merged tensor is smallest (ties broken alphabetically) and sum out, in
    the same merge, every other contractible index confined to the same
    factor group.  In chain networks the color and vertex indices linking
    two neighbours are always confined together, so this contracts the
    chain link-by-link with intermediates no larger than one link, instead
    of building their full union.  Fully deterministic and size-bounded."""
    facs = [_simplify_factor(s, np.asarray(a)) for s, a in factors]
    while True:
        present: set[str] = set()
        for s, _ in facs:
            present.update(s)
        cands = sorted(ch for ch in present if ch not in out)
        if not cands:
            break
        membership = {c: frozenset(i for i, (s, _) in enumerate(facs) if c in s) for c in cands}
        best = None
        for ch in cands:
            group_idx = membership[ch]
            elim = {c for c in cands if membership[c] <= group_idx}
            union = sorted({c for i in group_idx for c in facs[i][0]} - elim)
            size = 1
            for c in union:
                size *= dims[c]
            if best is None or (size, ch) < (best[0], best[1]):
                best = (size, ch, sorted(group_idx), union)
        size, ch, group_idx, union = best
        if size > _MAX_ELEMENTS:
            raise BudgetExceeded(
                f"contraction intermediate of {size:.3g} elements "
                f"exceeds the supported size"
            )
        group = [facs[i] for i in group_idx]
        out_str = "".join(union)
        if len(group) == 1:
            merged = np.einsum(f"{group[0][0]}->{out_str}", group[0][1])
        else:
            # Pairwise chain over the group; an index is kept only while a
            # later group factor (or the merged output) still references it,
            # so confined indices are summed out as early as possible.
            acc_s, acc = group[0]
            for k in range(1, len(group)):
                s, a = group[k]
                needed = set(union)
                for later_s, _ in group[k + 1 :]:
                    needed.update(later_s)
                keep_set = (set(acc_s) | set(s)) & needed
                keep = "".join(sorted(keep_set))
                ksize = 1
                for c in keep:
                    ksize *= dims[c]
                if ksize > _MAX_ELEMENTS:
                    raise BudgetExceeded(
                        f"contraction intermediate of {ksize:.3g} elements "
                        f"exceeds the supported size"
                    )
                acc = np.einsum(f"{acc_s},{s}->{keep}", acc, a, optimize=True)
                acc_s = keep
            merged = acc if acc_s == out_str else np.einsum(f"{acc_s}->{out_str}", acc)
        facs = [f for i, f in enumerate(facs) if i not in group_idx]
        facs.append((out_str, merged))
    acc_s, acc = facs[0]
    for s, a in facs[1:]:
        keep = "".join(sorted(set(acc_s) | set(s)))
        acc = np.einsum(f"{acc_s},{s}->{keep}", acc, a, optimize=True)
        acc_s = keep
    if acc_s != out:
        acc = np.einsum(f"{acc_s}->{out}", acc)
    return acc


def _block_map(partition: tuple[tuple[int, ...], ...]) -> dict[int, int]:
    blk = {}
    for b, block in enumerate(partition):
        for pos in block:
            blk[pos] = b
    return blk


def _collapsed_cycle_value(ctx: _Context, aleph: int) -> float:
    """Sum over all words and all subject tuples with pairwise-distinct
    subject vertices (feature collisions included) of the weighted products:
    a single color-stacked contraction per position partition."""
    K = ctx.params.L + 1
    total = 0.0
    for partition in set_partitions(aleph):
        blk = _block_map(partition)
        dims: dict[str, int] = {}
        factors = []
        for i in range(aleph):
            j = (i + 1) % aleph
            subs = _LETTERS[i] + _LETTERS[aleph + blk[i]] + _LETTERS[j] + _LETTERS[aleph + blk[j]]
            dims[_LETTERS[i]] = K
            dims[_LETTERS[j]] = K
            dims[_LETTERS[aleph + blk[i]]] = ctx.n
            dims[_LETTERS[aleph + blk[j]]] = ctx.n
            factors.append((subs, ctx.W))
        value = _contract_network(factors, "", dims)
        total += mobius_weight(partition) * float(value)
    return total


def _collapsed_path_matrix(ctx: _Context, aleph: int) -> np.ndarray:
    """Directed-chain analogue of _collapsed_cycle_value: returns the n x n
    matrix of endpoint-indexed sums over all words and distinct subject
    tuples (feature collisions included)."""
    n = ctx.n
    K = ctx.params.L + 1
    phi = np.zeros((n, n))
    for partition in set_partitions(aleph + 1):
        blk = _block_map(partition)
        if blk[0] == blk[aleph]:
            continue  # would land on the (identically zero) diagonal
        # color indices: positions 1..aleph; vertex indices: one per block
        dims: dict[str, int] = {}
        first = _LETTERS[1] + _LETTERS[aleph + 1 + blk[0]] + _LETTERS[aleph + 1 + blk[1]]
        factors: list[tuple[str, np.ndarray]] = [(first, ctx.A)]
        for i in range(2, aleph + 1):
            subs = (
                _LETTERS[i - 1]
                + _LETTERS[aleph + 1 + blk[i - 1]]
                + _LETTERS[i]
                + _LETTERS[aleph + 1 + blk[i]]
            )
            factors.append((subs, ctx.W))
        for i in range(1, aleph + 1):
            dims[_LETTERS[i]] = K
        for b in range(len(partition)):
            dims[_LETTERS[aleph + 1 + b]] = n
        out = _LETTERS[aleph + 1 + blk[0]] + _LETTERS[aleph + 1 + blk[aleph]]
        term = _contract_network(factors, out, dims)
        phi += mobius_weight(partition) * term
    return phi


def _word_correction_contract(
    ctx: _Context,
    word: tuple[int, ...],
    a_partition: tuple[tuple[int, ...], ...],
    b_partition: tuple[tuple[int, ...], ...],
    topology: str,
    want_matrix: bool,
):
    """One per-word contraction with subject positions merged per
    `a_partition` and the word's 0-letters sharing feature indices per
    `b_partition`.  Returns a scalar (cycles) or an endpoint matrix
    (paths)."""
    aleph = len(word)
    n_pos = aleph if topology == "cycle" else aleph + 1
    blk = _block_map(a_partition)
    zero_positions = [i for i, c in enumerate(word) if c == 0]
    kblk = {}
    for b, block in enumerate(b_partition):
        for q in block:
            kblk[zero_positions[q]] = b
    n_ablocks = len(a_partition)
    dims: dict[str, int] = {}
    for b in range(n_ablocks):
        dims[_LETTERS[b]] = ctx.n
    for b in range(len(b_partition)):
        dims[_LETTERS[n_ablocks + b]] = ctx.p
    factors: list[tuple[str, np.ndarray]] = []
    for i, c in enumerate(word):
        u_idx = _LETTERS[blk[i]]
        w_idx = _LETTERS[blk[(i + 1) % n_pos]]
        if c == 0:
            k_idx = _LETTERS[n_ablocks + kblk[i]]
            factors.append((u_idx + k_idx, ctx.Y))
            factors.append((w_idx + k_idx, ctx.Y))
        else:
            factors.append((u_idx + w_idx, ctx.centered[c - 1]))
    out = _LETTERS[blk[0]] + _LETTERS[blk[n_pos - 1]] if want_matrix else ""
    return _contract_network(factors, out, dims)


def _b_corrections(ctx: _Context, family: FamilyWeights, want_matrix: bool):
    """Sum of per-word feature-collision correction terms (all feature-index
    partitions except all-singletons), with exact subject distinctness.

    Words are grouped by unlabeled shape: rotations of a cycle word and
    reversals of a path word contract to the same scalar (or to transposed
    endpoint matrices), so one representative per class is contracted and
    scaled by the orbit size."""
    aleph = family.aleph
    topology = family.topology
    n_pos = aleph if topology == "cycle" else aleph + 1
    total: float | np.ndarray = np.zeros((ctx.n, ctx.n)) if want_matrix else 0.0
    for fc in family.classes:
        c0 = fc.counts[0]
        if c0 < 2 or fc.xi == 0.0:
            continue
        word = fc.word.letters
        orbit = (2 * aleph if topology == "cycle" else 2) // fc.aut
        scale = fc.xi / ctx.p ** (c0 / 2.0)
        for b_partition in set_partitions(c0):
            if len(b_partition) == c0:
                continue  # all singletons: already in the collapsed core
            wb = mobius_weight(b_partition)
            for a_partition in set_partitions(n_pos):
                if want_matrix:
                    blk0 = next(i for i, blockset in enumerate(a_partition) if 0 in blockset)
                    blk_last = next(
                        i for i, blockset in enumerate(a_partition) if (n_pos - 1) in blockset
                    )
                    if blk0 == blk_last:
                        continue
                wa = mobius_weight(a_partition)
                term = _word_correction_contract(
                    ctx, word, a_partition, b_partition, topology, want_matrix
                )
                if want_matrix:
                    # the reversed word's chains run opposite: its matrix is
                    # the transpose of the representative's
                    term = term + term.T if orbit == 2 else term
                else:
                    term = term * orbit
                total = total + scale * wb * wa * term
    return total


def _single_color_core(
    ctx: _Context, aleph: int, color: int, topology: str, want_matrix: bool
):
    """Collapsed core restricted to one monochromatic word (no color sum)."""
    word = (color,) * aleph
    xi = classify_word(word, topology, ctx.params).xi
    c0 = word.count(0)
    scale = xi / ctx.p ** (c0 / 2.0)
    n_pos = aleph if topology == "cycle" else aleph + 1
    singleton_b = tuple((q,) for q in range(c0))
    total: float | np.ndarray = np.zeros((ctx.n, ctx.n)) if want_matrix else 0.0
    for a_partition in set_partitions(n_pos):
        if want_matrix:
            blk0 = next(i for i, blockset in enumerate(a_partition) if 0 in blockset)
            blk_last = next(i for i, blockset in enumerate(a_partition) if (n_pos - 1) in blockset)
            if blk0 == blk_last:
                continue
        wa = mobius_weight(a_partition)
        term = _word_correction_contract(ctx, word, a_partition, singleton_b, topology, want_matrix)
        total = total + scale * wa * term
    return total


def _transfer_detection(ctx: _Context, cfg: StatisticConfig, family: FamilyWeights) -> float:
    aleph = cfg.aleph
    if aleph > 6:
        raise PartitionBudgetExceeded(f"transfer backend supports aleph <= 6, got {aleph}")
    if cfg.color_restrict is None:
        core = _collapsed_cycle_value(ctx, aleph)
    else:
        core = _single_color_core(ctx, aleph, cfg.color_restrict, "cycle", want_matrix=False)
    if cfg.b_collision_correction:
        core += _b_corrections(ctx, family, want_matrix=False)
    # every labeled cycle is traversed once per starting point and direction
    return core / (2.0 * aleph * ctx.n ** (aleph / 2.0) * math.sqrt(family.beta))


def _transfer_recovery(ctx: _Context, cfg: StatisticConfig, family: FamilyWeights) -> np.ndarray:
    aleph = cfg.aleph
    if aleph > 6:
        raise PartitionBudgetExceeded(f"transfer backend supports aleph <= 6, got {aleph}")
    if cfg.color_restrict is None:
        raw = _collapsed_path_matrix(ctx, aleph)
    else:
        raw = _single_color_core(ctx, aleph, cfg.color_restrict, "path", want_matrix=True)
    if cfg.b_collision_correction:
        raw = raw + _b_corrections(ctx, family, want_matrix=True)
    phi = raw / (ctx.n ** (aleph / 2.0 - 1.0) * family.beta)
    phi = (phi + phi.T) / 2.0
    np.fill_diagonal(phi, 0.0)
    return phi


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def detection_statistic(
    obs: Observation, params: ModelParams, cfg: StatisticConfig
) -> StatisticReport:
    """Normalized decorated-cycle count with decision threshold
    tau = threshold_c * sqrt(beta)."""
    if cfg.aleph < 3:
        raise InfeasibleSize(f"detection needs aleph >= 3, got {cfg.aleph}")
    if params.n < 2 * cfg.aleph or params.p < cfg.aleph:
        raise InfeasibleSize(
            f"need n >= 2*aleph and p >= aleph to embed cycles; got "
            f"n={params.n}, p={params.p}, aleph={cfg.aleph}"
        )
    start = time.perf_counter()
    family = _family(params, cfg.aleph, "cycle", cfg.color_restrict)
    ctx = _Context(obs, params)
    if cfg.backend == "exact":
        value = _exact_detection(ctx, cfg, family)
    elif cfg.backend == "transfer":
        value = _transfer_detection(ctx, cfg, family)
    else:
        raise ValueError(f"unknown backend {cfg.backend!r}")
    tau = cfg.threshold_c * math.sqrt(family.beta)
    return StatisticReport(
        value=float(value),
        beta=family.beta,
        tau=tau,
        decision=bool(value >= tau),
        backend=cfg.backend,
        elapsed=time.perf_counter() - start,
        aleph=cfg.aleph,
    )


def detection_test(report: StatisticReport) -> bool:
    """Accept (declare planted) iff the statistic reaches its threshold."""
    if report.value is None or report.tau is None:
        raise ValueError("report carries no detection value/threshold")
    return bool(report.value >= report.tau)


def recovery_matrix(
    obs: Observation, params: ModelParams, cfg: StatisticConfig
) -> StatisticReport:
    """Decorated-path recovery matrix: symmetric, zero diagonal."""
    if cfg.aleph < 1:
        raise InfeasibleSize(f"recovery needs aleph >= 1, got {cfg.aleph}")
    if params.n < cfg.aleph + 2:
        raise InfeasibleSize(
            f"need n >= aleph + 2 to embed a path and keep an off-diagonal "
            f"entry; got n={params.n}, aleph={cfg.aleph}"
        )
    start = time.perf_counter()
    family = _family(params, cfg.aleph, "path", cfg.color_restrict)
    ctx = _Context(obs, params)
    if cfg.backend == "exact":
        matrix = _exact_recovery(ctx, cfg, family)
    elif cfg.backend == "transfer":
        matrix = _transfer_recovery(ctx, cfg, family)
    else:
        raise ValueError(f"unknown backend {cfg.backend!r}")
    return StatisticReport(
        matrix=matrix,
        beta=family.beta,
        backend=cfg.backend,
        elapsed=time.perf_counter() - start,
        aleph=cfg.aleph,
    )


def transfer_backend(
    obs: Observation, params: ModelParams, cfg: StatisticConfig, kind: str = "detection"
) -> StatisticReport:
    """Run the transfer backend explicitly (kind = "detection" or
    "recovery"); equivalent to the corresponding statistic with
    cfg.backend = "transfer"."""
    cfg = replace(cfg, backend="transfer")
    if kind == "detection":
        return detection_statistic(obs, params, cfg)
    if kind == "recovery":
        return recovery_matrix(obs, params, cfg)
    raise ValueError(f"unknown kind {kind!r}")
