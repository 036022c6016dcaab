"""Model parameters and seeded samplers.

The planted distribution couples a spiked n-by-p Gaussian feature matrix with
L sparse two-community graphs whose labelings are correlated flips of a shared
global labeling.  The null distribution is the product of an i.i.d. Gaussian
matrix and independent Erdos-Renyi graphs with the same mean degrees.

Sampling is deterministic per (params, seed): every entity group (global
labels, each flip mask, the feature spike, the feature noise, each layer's
edge coins) draws from its own counter-based Philox stream keyed by
(seed, tag, index), in a fixed canonical order.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import IndexOutOfRange, InvalidParams, MissingTruth

# Entity tags for the per-group random streams.
_TAG_X = 1
_TAG_Z = 2
_TAG_U = 3
_TAG_NOISE = 4
_TAG_LAYER = 5
_TAG_ROUND = 6

_MAGIC_Y = b"CMSY"
_MAGIC_PHI = b"CMSP"


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for one entity group of one sample."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed),) + tuple(int(k) for k in key))))


@dataclass(frozen=True)
class ModelParams:
    """All scalars defining the planted and null distributions.

    n, p     subjects and features
    L        number of graph layers
    mu       feature spike strength (>= 0)
    rho      label-flip correlation in [0, 1]
    lam      per-layer mean degrees (length L, all > 0)
    eps      per-layer edge affinities (length L, all in (0, 1))
    """

    n: int
    p: int
    L: int
    mu: float
    rho: float
    lam: tuple[float, ...] = ()
    eps: tuple[float, ...] = ()

    @property
    def gamma(self) -> float:
        """Aspect ratio n/p."""
        return self.n / self.p

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "L": self.L,
            "mu": self.mu,
            "rho": self.rho,
            "lambda": list(self.lam),
            "epsilon": list(self.eps),
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelParams":
        missing = [k for k in ("n", "p", "L", "mu", "rho") if k not in d]
        if missing:
            raise InvalidParams(f"params dict is missing fields: {missing}")
        lam = d.get("lambda", d.get("lam", ()))
        eps = d.get("epsilon", d.get("eps", ()))
        return ModelParams(
            n=int(d["n"]),
            p=int(d["p"]),
            L=int(d["L"]),
            mu=float(d["mu"]),
            rho=float(d["rho"]),
            lam=tuple(float(v) for v in lam),
            eps=tuple(float(v) for v in eps),
        )

    def replace(self, **kwargs) -> "ModelParams":
        d = self.to_dict()
        for k, v in kwargs.items():
            key = {"lam": "lambda", "eps": "epsilon"}.get(k, k)
            d[key] = v
        return ModelParams.from_dict(d)


def load_params(path: str) -> ModelParams:
    """Read parameters from a JSON (canonical) or TOML file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".toml"):
        try:
            import tomllib  # py >= 3.11
        except ModuleNotFoundError:  # pragma: no cover - depends on runtime
            import tomli as tomllib
        data = tomllib.loads(raw.decode("utf-8"))
    else:
        data = json.loads(raw.decode("utf-8"))
    return ModelParams.from_dict(data)


def validate_params(params: ModelParams, n_context: Optional[int] = None) -> None:
    """Raise InvalidParams naming the first violated constraint."""
    n = params.n if n_context is None else int(n_context)
    if not isinstance(params.n, int) or params.n <= 0:
        raise InvalidParams(f"n must be a positive integer, got {params.n}")
    if not isinstance(params.p, int) or params.p <= 0:
        raise InvalidParams(f"p must be a positive integer, got {params.p}")
    if not isinstance(params.L, int) or params.L < 0:
        raise InvalidParams(f"L must be a non-negative integer, got {params.L}")
    if params.mu < 0:
        raise InvalidParams(f"mu must be non-negative, got {params.mu}")
    if not 0.0 <= params.rho <= 1.0:
        raise InvalidParams(f"rho must be in [0, 1], got {params.rho}")
    if len(params.lam) != params.L or len(params.eps) != params.L:
        raise InvalidParams(
            f"lambda/epsilon must have length L={params.L}, got {len(params.lam)}/{len(params.eps)}"
        )
    for ell, lam in enumerate(params.lam):
        if not lam > 0:
            raise InvalidParams(f"lambda[{ell}] must be positive, got {lam}")
    for ell, eps in enumerate(params.eps):
        if not 0.0 < eps < 1.0:
            raise InvalidParams(f"epsilon[{ell}] must be in the open interval (0, 1), got {eps}")
    gamma = params.n / params.p
    if not np.isfinite(gamma) or gamma <= 0:
        raise InvalidParams(f"gamma = n/p must be finite and positive, got {gamma}")
    for ell in range(params.L):
        hi = (1.0 + params.eps[ell]) * params.lam[ell] / n
        if hi > 1.0:
            raise InvalidParams(
                f"edge probability (1+epsilon[{ell}])*lambda[{ell}]/n = {hi} exceeds 1"
            )


@dataclass(frozen=True)
class LatentState:
    """Ground truth of one planted sample.

    x        global labeling, n signs
    z        flip masks, L vectors of n signs
    x_layer  per-layer labelings x * z[ell]
    u        feature spike direction, p reals
    """

    x: np.ndarray
    z: tuple[np.ndarray, ...]
    x_layer: tuple[np.ndarray, ...]
    u: np.ndarray


@dataclass(frozen=True)
class Layer:
    """One undirected simple graph: sorted edge list plus adjacency lookup."""

    edges: np.ndarray  # (m, 2) int64, i < j, lexicographically sorted
    adj: np.ndarray  # (n, n) bool, symmetric, zero diagonal

    @property
    def edge_count(self) -> int:
        return int(self.edges.shape[0])

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.adj[i, j])


@dataclass(frozen=True)
class Observation:
    """One sample: feature matrix, graph layers, and optional ground truth."""

    Y: np.ndarray
    layers: tuple[Layer, ...]
    truth: Optional[LatentState]
    provenance: str  # "planted" or "null"
    seed: int


@dataclass(frozen=True)
class CenteredLayer:
    """Centered, rescaled adjacency: per-entry value on edges is
    (1 - lambda/n)/sqrt(lambda/n), on non-edges -(lambda/n)/sqrt(lambda/n),
    and the diagonal is zero."""

    values: np.ndarray


def _pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    # Canonical row-major order of unordered pairs i < j.
    return np.triu_indices(n, k=1)


def _layer_from_mask(n: int, iu: tuple[np.ndarray, np.ndarray], mask: np.ndarray) -> Layer:
    ii = iu[0][mask]
    jj = iu[1][mask]
    edges = np.column_stack([ii, jj]).astype(np.int64)
    adj = np.zeros((n, n), dtype=bool)
    adj[ii, jj] = True
    adj[jj, ii] = True
    return Layer(edges=edges, adj=adj)


def sample_planted(params: ModelParams, seed: int) -> Observation:
    """Draw one sample from the planted distribution."""
    validate_params(params)
    n, p, L = params.n, params.p, params.L

    x = 2 * rng_stream(seed, _TAG_X).integers(0, 2, size=n).astype(np.int8) - 1
    z = []
    for ell in range(L):
        coins = rng_stream(seed, _TAG_Z, ell).random(n)
        z.append(np.where(coins < (1.0 + params.rho) / 2.0, 1, -1).astype(np.int8))
    x_layer = tuple(x * z_ell for z_ell in z)

    u = rng_stream(seed, _TAG_U).standard_normal(p)
    noise = rng_stream(seed, _TAG_NOISE).standard_normal((n, p))
    Y = np.sqrt(params.mu / n) * np.outer(x.astype(float), u) + noise

    iu = _pair_indices(n)
    layers = []
    for ell in range(L):
        same = x_layer[ell][iu[0]] == x_layer[ell][iu[1]]
        base = params.lam[ell] / n
        prob = np.where(same, (1.0 + params.eps[ell]) * base, (1.0 - params.eps[ell]) * base)
        coins = rng_stream(seed, _TAG_LAYER, ell).random(iu[0].shape[0])
        layers.append(_layer_from_mask(n, iu, coins < prob))

    truth = LatentState(x=x, z=tuple(z), x_layer=x_layer, u=u)
    return Observation(Y=Y, layers=tuple(layers), truth=truth, provenance="planted", seed=int(seed))


def sample_null(params: ModelParams, seed: int) -> Observation:
    """Draw one sample from the null distribution (i.i.d. Gaussian features,
    independent Erdos-Renyi layers)."""
    validate_params(params)
    n, p, L = params.n, params.p, params.L

    Y = rng_stream(seed, _TAG_NOISE).standard_normal((n, p))
    iu = _pair_indices(n)
    layers = []
    for ell in range(L):
        prob = params.lam[ell] / n
        coins = rng_stream(seed, _TAG_LAYER, ell).random(iu[0].shape[0])
        layers.append(_layer_from_mask(n, iu, coins < prob))

    return Observation(Y=Y, layers=tuple(layers), truth=None, provenance="null", seed=int(seed))


def center_layer(obs: Observation, ell: int, params: ModelParams) -> CenteredLayer:
    """Center and rescale layer `ell` so every off-diagonal entry has mean 0
    and variance 1 - lambda/n under the null."""
    if not 0 <= ell < len(obs.layers):
        raise IndexOutOfRange(f"layer index {ell} out of range for L={len(obs.layers)}")
    n = obs.Y.shape[0]
    rate = params.lam[ell] / n
    scale = np.sqrt(rate)
    values = np.where(obs.layers[ell].adj, (1.0 - rate) / scale, -rate / scale)
    np.fill_diagonal(values, 0.0)
    return CenteredLayer(values=values)


# ---------------------------------------------------------------------------
# Serialization.  A sample is a directory holding params.json, Y.bin in the
# binary matrix format below, and one edge-list CSV per layer; planted samples
# also carry truth.json.  Binary matrix layout (documented in README):
# 16-byte header = 4-byte ASCII magic ("CMSY" for feature matrices, "CMSP"
# for recovery matrices) + uint32 rows + uint32 cols (little endian) + 4 zero
# pad bytes, followed by rows*cols little-endian float64 values, row major.
# ---------------------------------------------------------------------------


def save_matrix(path: str, M: np.ndarray, magic: bytes = _MAGIC_PHI) -> None:
    M = np.ascontiguousarray(M, dtype="<f8")
    header = struct.pack("<4sII4x", magic, M.shape[0], M.shape[1])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(M.tobytes())


def load_matrix(path: str, magic: Optional[bytes] = None) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(16)
        got_magic, rows, cols = struct.unpack("<4sII4x", header)
        if magic is not None and got_magic != magic:
            raise InvalidParams(f"unexpected magic {got_magic!r} in {path} (wanted {magic!r})")
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
    return data.reshape(rows, cols).copy()


def save_observation(obs: Observation, params: ModelParams, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    meta = params.to_dict()
    meta["provenance"] = obs.provenance
    meta["seed"] = obs.seed
    with open(os.path.join(out_dir, "params.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    save_matrix(os.path.join(out_dir, "Y.bin"), obs.Y, magic=_MAGIC_Y)
    for ell, layer in enumerate(obs.layers):
        with open(os.path.join(out_dir, f"layer_{ell:02d}.csv"), "w") as fh:
            fh.write("i,j\n")
            for i, j in layer.edges:
                fh.write(f"{i},{j}\n")
    if obs.truth is not None:
        truth = {
            "x": obs.truth.x.astype(int).tolist(),
            "z": [z.astype(int).tolist() for z in obs.truth.z],
            "u": obs.truth.u.tolist(),
        }
        with open(os.path.join(out_dir, "truth.json"), "w") as fh:
            json.dump(truth, fh)
            fh.write("\n")


def load_observation(in_dir: str) -> tuple[Observation, ModelParams]:
    with open(os.path.join(in_dir, "params.json")) as fh:
        meta = json.load(fh)
    params = ModelParams.from_dict(meta)
    Y = load_matrix(os.path.join(in_dir, "Y.bin"), magic=_MAGIC_Y)
    n = params.n
    layers = []
    for ell in range(params.L):
        pairs = []
        with open(os.path.join(in_dir, f"layer_{ell:02d}.csv")) as fh:
            next(fh)  # header
            for line in fh:
                i, j = line.strip().split(",")
                pairs.append((int(i), int(j)))
        edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        adj = np.zeros((n, n), dtype=bool)
        if edges.size:
            adj[edges[:, 0], edges[:, 1]] = True
            adj[edges[:, 1], edges[:, 0]] = True
        layers.append(Layer(edges=edges, adj=adj))
    truth = None
    truth_path = os.path.join(in_dir, "truth.json")
    if os.path.exists(truth_path):
        with open(truth_path) as fh:
            t = json.load(fh)
        x = np.array(t["x"], dtype=np.int8)
        z = tuple(np.array(v, dtype=np.int8) for v in t["z"])
        truth = LatentState(x=x, z=z, x_layer=tuple(x * zz for zz in z), u=np.array(t["u"]))
    return (
        Observation(
            Y=Y,
            layers=tuple(layers),
            truth=truth,
            provenance=str(meta.get("provenance", "planted" if truth else "null")),
            seed=int(meta.get("seed", 0)),
        ),
        params,
    )


def require_truth(obs: Observation) -> LatentState:
    if obs.truth is None:
        raise MissingTruth("observation carries no latent ground truth")
    return obs.truth
