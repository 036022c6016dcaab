"""Tests for sampling, centering, parameter handling, and serialization."""
from __future__ import annotations

import json
import math
import os

import numpy as np
import pytest

from cmsbm.errors import IndexOutOfRange, InvalidParams, MissingTruth
from cmsbm.model import (
    ModelParams,
    center_layer,
    load_matrix,
    load_observation,
    load_params,
    require_truth,
    rng_stream,
    sample_null,
    sample_planted,
    save_matrix,
    save_observation,
    validate_params,
)

REFERENCE = ModelParams(n=100, p=50, L=2, mu=0.5, rho=0.6, lam=(3.0, 3.0), eps=(0.5, 0.5))


def test_params_basic_fields() -> None:
    assert REFERENCE.gamma == pytest.approx(2.0)
    d = REFERENCE.to_dict()
    assert d["lambda"] == [3.0, 3.0]
    assert d["epsilon"] == [0.5, 0.5]
    assert ModelParams.from_dict(d) == REFERENCE
    # Alternate key spellings are accepted.
    alt = dict(d)
    alt["lam"] = alt.pop("lambda")
    alt["eps"] = alt.pop("epsilon")
    assert ModelParams.from_dict(alt) == REFERENCE


def test_params_replace() -> None:
    q = REFERENCE.replace(lam=(9.0, 9.0))
    assert q.lam == (9.0, 9.0)
    assert q.mu == REFERENCE.mu
    assert REFERENCE.lam == (3.0, 3.0)  # original untouched


def test_load_params_json_and_toml(tmp_path) -> None:
    jpath = tmp_path / "params.json"
    jpath.write_text(json.dumps(REFERENCE.to_dict()))
    assert load_params(str(jpath)) == REFERENCE
    tpath = tmp_path / "params.toml"
    tpath.write_text(
        'n = 100\np = 50\nL = 2\nmu = 0.5\nrho = 0.6\n'
        '"lambda" = [3.0, 3.0]\nepsilon = [0.5, 0.5]\n'
    )
    assert load_params(str(tpath)) == REFERENCE


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n=0),
        dict(p=0),
        dict(L=-1, lam=(), eps=()),
        dict(mu=-0.1),
        dict(rho=1.5),
        dict(rho=-0.2),
        dict(lam=(3.0,)),  # length mismatch with L=2
        dict(lam=(0.0, 3.0)),
        dict(eps=(0.5, 0.0)),
        dict(eps=(0.5, 1.0)),
        dict(n=4, lam=(3.0, 3.0)),  # (1+eps)*lam/n > 1
    ],
)
def test_validate_params_rejects(kwargs) -> None:
    base = dict(n=100, p=50, L=2, mu=0.5, rho=0.6, lam=(3.0, 3.0), eps=(0.5, 0.5))
    base.update(kwargs)
    with pytest.raises(InvalidParams):
        validate_params(ModelParams(**base))


def test_validate_params_accepts_valid() -> None:
    validate_params(REFERENCE)
    validate_params(ModelParams(n=10, p=5, L=0, mu=0.0, rho=0.0))


def test_rng_stream_determinism_and_tag_separation() -> None:
    a = rng_stream(7, 1).standard_normal(8)
    b = rng_stream(7, 1).standard_normal(8)
    c = rng_stream(7, 2).standard_normal(8)
    d = rng_stream(8, 1).standard_normal(8)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert not np.allclose(a, d)


def test_sample_planted_determinism() -> None:
    o1 = sample_planted(REFERENCE, seed=11)
    o2 = sample_planted(REFERENCE, seed=11)
    o3 = sample_planted(REFERENCE, seed=12)
    np.testing.assert_array_equal(o1.Y, o2.Y)
    truth1 = require_truth(o1)
    truth2 = require_truth(o2)
    np.testing.assert_array_equal(truth1.x, truth2.x)
    np.testing.assert_array_equal(truth1.u, truth2.u)
    for l1, l2 in zip(o1.layers, o2.layers):
        np.testing.assert_array_equal(l1.edges, l2.edges)
    assert not np.array_equal(o1.Y, o3.Y)


def test_sample_planted_shapes_and_support() -> None:
    obs = sample_planted(REFERENCE, seed=3)
    truth = require_truth(obs)
    assert obs.Y.shape == (100, 50)
    assert obs.provenance == "planted"
    assert set(np.unique(truth.x)) <= {-1, 1}
    assert len(truth.z) == 2 and all(z.shape == (100,) for z in truth.z)
    assert len(truth.x_layer) == 2
    for z, xl in zip(truth.z, truth.x_layer):
        np.testing.assert_array_equal(xl, truth.x * z)
    assert truth.u.shape == (50,)
    for layer in obs.layers:
        assert layer.adj.shape == (100, 100)
        assert layer.adj.dtype == np.bool_
        np.testing.assert_array_equal(layer.adj, layer.adj.T)
        assert not layer.adj.diagonal().any()
        edges = layer.edges
        assert (edges[:, 0] < edges[:, 1]).all()
        assert layer.edge_count == len(edges)
        if len(edges):
            i, j = edges[0]
            assert layer.has_edge(int(i), int(j))


def test_rho_one_gives_identical_layer_labels() -> None:
    params = REFERENCE.replace(rho=1.0)
    truth = require_truth(sample_planted(params, seed=5))
    np.testing.assert_array_equal(truth.x_layer, np.broadcast_to(truth.x, (2, 100)))


def test_null_sample_has_no_truth() -> None:
    obs = sample_null(REFERENCE, seed=4)
    assert obs.provenance == "null"
    assert obs.truth is None
    with pytest.raises(MissingTruth):
        require_truth(obs)


def test_edge_count_monte_carlo() -> None:
    # Mean edge count per layer is lam*(n-1)/2 under both laws.
    params = REFERENCE
    expected = 3.0 * 99 / 2.0
    for sampler in (sample_planted, sample_null):
        counts = np.array(
            [sampler(params, seed=s).layers[0].edge_count for s in range(300)],
            dtype=float,
        )
        se = counts.std(ddof=1) / math.sqrt(len(counts))
        assert abs(counts.mean() - expected) <= 3.0 * se + 1e-9, (
            f"{sampler.__name__}: mean {counts.mean():.3f} vs {expected:.3f} (se {se:.3f})"
        )


def test_signal_part_of_y_matches_truth() -> None:
    # Y - sqrt(mu/n) x u^T has iid standard normal entries; check first two moments.
    obs = sample_planted(REFERENCE, seed=21)
    truth = require_truth(obs)
    resid = obs.Y - math.sqrt(0.5 / 100.0) * np.outer(truth.x, truth.u)
    flat = resid.ravel()
    assert abs(flat.mean()) <= 4.0 / math.sqrt(flat.size)
    assert abs(flat.var() - 1.0) <= 0.1


def test_center_layer_values() -> None:
    # At lam=3, n=100: edge value (1-0.03)/sqrt(0.03), non-edge -sqrt(0.03).
    obs = sample_planted(REFERENCE, seed=9)
    cent = center_layer(obs, 0, REFERENCE)
    vals = cent.values
    assert vals.shape == (100, 100)
    np.testing.assert_allclose(vals, vals.T)
    np.testing.assert_allclose(vals.diagonal(), 0.0)
    scale = math.sqrt(0.03)
    edge_val = (1.0 - 0.03) / scale
    non_edge_val = -0.03 / scale
    assert edge_val == pytest.approx(5.600297134977907)
    assert non_edge_val == pytest.approx(-0.17320508075688773)
    adj = obs.layers[0].adj
    off = ~np.eye(100, dtype=bool)
    np.testing.assert_allclose(vals[adj], edge_val)
    np.testing.assert_allclose(vals[off & ~adj], non_edge_val)


def test_centered_layer_null_mean_zero() -> None:
    # Under the null the centered layer has zero mean and unit variance per
    # off-diagonal entry.
    params = ModelParams(n=40, p=10, L=1, mu=0.0, rho=0.5, lam=(3.0,), eps=(0.5,))
    iu = np.triu_indices(40, 1)
    tot = 0.0
    m = 0
    for seed in range(200):
        vals = center_layer(sample_null(params, seed), 0, params).values
        tot += vals[iu].sum()
        m += len(iu[0])
    assert abs(tot / m) <= 3.0 / math.sqrt(m)


def test_center_layer_bad_index() -> None:
    obs = sample_planted(REFERENCE, seed=2)
    with pytest.raises(IndexOutOfRange):
        center_layer(obs, 2, REFERENCE)
    with pytest.raises(IndexOutOfRange):
        center_layer(obs, -1, REFERENCE)


def test_matrix_roundtrip(tmp_path) -> None:
    M = rng_stream(0, 42).standard_normal((7, 3))
    path = str(tmp_path / "m.bin")
    save_matrix(path, M, magic=b"CMSY")
    back = load_matrix(path, magic=b"CMSY")
    np.testing.assert_array_equal(M, back)
    # Default magic is the estimator magic.
    path2 = str(tmp_path / "phi.bin")
    save_matrix(path2, M)
    np.testing.assert_array_equal(load_matrix(path2, magic=b"CMSP"), M)
    with pytest.raises(InvalidParams):
        load_matrix(path2, magic=b"CMSY")


def test_matrix_header_layout(tmp_path) -> None:
    # 16-byte header: 4-byte magic, uint32 rows, uint32 cols, 4 pad bytes; then
    # row-major float64, all little-endian.
    M = np.arange(6, dtype=float).reshape(2, 3)
    path = str(tmp_path / "m.bin")
    save_matrix(path, M, magic=b"CMSY")
    raw = open(path, "rb").read()
    assert raw[:4] == b"CMSY"
    assert int.from_bytes(raw[4:8], "little") == 2
    assert int.from_bytes(raw[8:12], "little") == 3
    assert len(raw) == 16 + 6 * 8
    np.testing.assert_array_equal(
        np.frombuffer(raw[16:], dtype="<f8").reshape(2, 3), M
    )


def test_observation_roundtrip(tmp_path) -> None:
    obs = sample_planted(REFERENCE, seed=31)
    out = str(tmp_path / "obs")
    save_observation(obs, REFERENCE, out)
    assert os.path.exists(os.path.join(out, "params.json"))
    assert os.path.exists(os.path.join(out, "Y.bin"))
    assert os.path.exists(os.path.join(out, "layer_00.csv"))
    assert os.path.exists(os.path.join(out, "layer_01.csv"))
    back, params_back = load_observation(out)
    assert params_back == REFERENCE
    assert back.provenance == "planted"
    assert back.seed == obs.seed
    np.testing.assert_array_equal(back.Y, obs.Y)
    for a, b in zip(obs.layers, back.layers):
        np.testing.assert_array_equal(a.edges, b.edges)
        np.testing.assert_array_equal(a.adj, b.adj)
    t0 = require_truth(obs)
    t1 = require_truth(back)
    np.testing.assert_array_equal(t0.x, t1.x)
    np.testing.assert_array_equal(t0.z, t1.z)
    np.testing.assert_allclose(t0.u, t1.u)


def test_null_observation_roundtrip(tmp_path) -> None:
    obs = sample_null(REFERENCE, seed=8)
    out = str(tmp_path / "obs")
    save_observation(obs, REFERENCE, out)
    back, _ = load_observation(out)
    assert back.truth is None
    assert back.provenance == "null"
    np.testing.assert_array_equal(back.Y, obs.Y)


def test_layer_csv_format(tmp_path) -> None:
    obs = sample_planted(REFERENCE, seed=13)
    out = str(tmp_path / "obs")
    save_observation(obs, REFERENCE, out)
    lines = open(os.path.join(out, "layer_00.csv")).read().splitlines()
    assert lines[0] == "i,j"
    pairs = np.array([[int(v) for v in line.split(",")] for line in lines[1:]])
    np.testing.assert_array_equal(pairs, obs.layers[0].edges)
