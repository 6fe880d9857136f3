import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsindy.grid_model import (
    DEFAULT_OMEGA_R,
    EffectiveNetwork,
    GridState,
    NetworkFileError,
    ParameterRanges,
    equilibrium_residual,
    generate_synthetic,
    load_network,
    network_to_dict,
    save_network,
    stacked_field,
    vector_field,
)
from lsindy.ode import IntegrationConfig, integrate
from oracles import swing_rhs_scalar


def two_gen(gamma=0.2):
    K = np.array([[0.0, 1.3], [1.3, 0.0]])
    G = np.array([[0.0, gamma], [-gamma, 0.0]])
    return EffectiveNetwork(DEFAULT_OMEGA_R, [3.0, 4.0], [1.0, 1.0], [0.0, 0.0], K, G)


def test_isolated_generator_at_rest():
    net = EffectiveNetwork(DEFAULT_OMEGA_R, [4.0], [1.0], [0.0], [[0.0]], [[0.0]])
    d = vector_field(net, GridState([0.3], [0.0]))
    assert d.delta[0] == 0.0 and d.omega[0] == 0.0


def test_two_generators_at_phase_shift_are_stationary():
    net = two_gen(0.2)
    d = vector_field(net, GridState([0.5, 0.3], [0.0, 0.0]))
    np.testing.assert_allclose(d.as_vector(), 0.0, atol=1e-15)


def test_matches_scalar_oracle():
    rng = np.random.default_rng(11)
    net = generate_synthetic(3, "ring", seed=5)
    for _ in range(20):
        delta, omega = rng.normal(size=3), rng.normal(size=3)
        got = vector_field(net, GridState(delta, omega)).as_vector()
        ref = swing_rhs_scalar(net.omega_R, net.H, net.D, net.F, net.K.tolist(), net.gamma.tolist(),
                               delta, omega)
        np.testing.assert_allclose(got, ref, rtol=0, atol=1e-14 * max(1.0, np.abs(ref).max()))


def test_batched_evaluation_matches_columns():
    net = generate_synthetic(6, "random-sparse", seed=2, density=0.5)
    X = np.random.default_rng(0).normal(size=(12, 7))
    batch = vector_field(net, GridState.from_vector(X)).as_vector()
    cols = np.column_stack([stacked_field(net)(0.0, X[:, k]) for k in range(7)])
    np.testing.assert_array_equal(batch, cols)


def test_dimension_mismatch_and_nonfinite_rejected():
    net = generate_synthetic(3, seed=0)
    with pytest.raises(ValueError):
        vector_field(net, GridState(np.zeros(4), np.zeros(4)))
    with pytest.raises(ValueError):
        GridState([0.0, np.nan, 0.0], [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        GridState([0.0, 0.0], [0.0])


@settings(max_examples=50, deadline=None)
@given(shift=st.floats(-10, 10), seed=st.integers(0, 2**16))
def test_translation_invariance(shift, seed):
    net = generate_synthetic(5, "random-sparse", seed=seed, density=0.6)
    rng = np.random.default_rng(seed)
    delta, omega = rng.normal(size=5), rng.normal(size=5)
    a = vector_field(net, GridState(delta, omega)).as_vector()
    b = vector_field(net, GridState(delta + shift, omega)).as_vector()
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-11)


def test_lossless_energy_conserved():
    rng = np.random.default_rng(4)
    n = 4
    K = np.triu(rng.uniform(0.5, 2, (n, n)), 1)
    K = K + K.T
    # zero-sum injections keep the mean angle from drifting
    F = rng.uniform(-0.2, 0.2, n)
    F -= F.mean()
    net = EffectiveNetwork(DEFAULT_OMEGA_R, rng.uniform(2, 6, n), np.zeros(n), F, K, np.zeros((n, n)))

    def energy(x):
        d, w = x[:n], x[n:]
        kin = np.sum(net.H / net.omega_R * w**2)
        pot = -np.sum(F * d) - 0.5 * np.sum(K * np.cos(d[:, None] - d[None, :]))
        return kin + pot

    cfg = IntegrationConfig(0.0, 5.0, 0.01, rel_tol=1e-10, abs_tol=1e-12)
    x0 = np.concatenate([rng.uniform(-0.3, 0.3, n), rng.uniform(-1, 1, n)])
    traj = integrate(stacked_field(net), x0, cfg)
    e = np.array([energy(traj.states[:, k]) for k in range(traj.times.size)])
    assert np.abs(e - e[0]).max() < 1e-10 * 1e2 * max(1.0, abs(e[0]))


def test_single_generator_has_empty_coupling():
    net = generate_synthetic(1, "random-sparse", seed=9)
    assert net.n_g == 1 and not net.K.any() and net.edges[0].size == 0


def test_generation_is_deterministic():
    a = generate_synthetic(3, "ring", seed=7)
    b = generate_synthetic(3, "ring", seed=7)
    assert a.equal(b)
    assert not a.equal(generate_synthetic(3, "ring", seed=8))


def test_sparse_equilibrium_residual():
    net, delta_eq = generate_synthetic(50, "random-sparse", seed=1, density=0.1,
                                       return_equilibrium=True)
    assert equilibrium_residual(net, delta_eq) < 1e-8


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n_g=st.integers(1, 12),
       topology=st.sampled_from(["ring", "random-sparse"]), density=st.floats(0.05, 1.0))
def test_generated_networks_are_valid(seed, n_g, topology, density):
    net, delta_eq = generate_synthetic(n_g, topology, seed, density=density, return_equilibrium=True)
    assert (net.H > 0).all() and (net.D >= 0).all() and (net.K >= 0).all()
    np.testing.assert_array_equal(net.K != 0, net.gamma != 0)
    np.testing.assert_array_equal(net.K, net.K.T)
    assert equilibrium_residual(net, delta_eq) < 1e-10


def test_random_sparse_is_connected():
    from scipy.sparse.csgraph import connected_components

    net = generate_synthetic(40, "random-sparse", seed=3, density=0.02)
    assert connected_components(net.K > 0, directed=False)[0] == 1


@pytest.mark.parametrize("bad", [
    dict(H=(6.0, 2.0)), dict(H=(0.0, 1.0)), dict(D=(-1.0, 1.0)), dict(K=(2.0, 1.0)),
])
def test_infeasible_ranges(bad):
    with pytest.raises(ValueError):
        generate_synthetic(3, seed=0, ranges=ParameterRanges(**bad))


def test_bad_topology_and_density():
    with pytest.raises(ValueError):
        generate_synthetic(3, "star")
    with pytest.raises(ValueError):
        generate_synthetic(3, "random-sparse", density=0.0)


def test_file_round_trip_is_exact(tmp_path):
    net = generate_synthetic(3, "ring", seed=7)
    save_network(net, tmp_path / "n.json")
    assert load_network(tmp_path / "n.json").equal(net)
    big = generate_synthetic(30, "random-sparse", seed=2)
    save_network(big, tmp_path / "b.json")
    assert load_network(tmp_path / "b.json").equal(big)


def _write(tmp_path, doc):
    p = tmp_path / "net.json"
    p.write_text(json.dumps(doc))
    return p


def test_nonpositive_inertia_names_field_and_index(tmp_path):
    doc = network_to_dict(generate_synthetic(3, seed=0))
    doc["H"][0] = 0.0
    with pytest.raises(NetworkFileError, match=r"H\[0\]"):
        load_network(_write(tmp_path, doc))


def test_sparsity_mismatch_rejected(tmp_path):
    doc = network_to_dict(generate_synthetic(3, seed=0))
    doc["coupling"][0]["K"] = 0.0
    with pytest.raises(NetworkFileError, match="sparsity"):
        load_network(_write(tmp_path, doc))


@pytest.mark.parametrize("mutate, pattern", [
    (lambda d: d.update(extra=1), "unknown keys"),
    (lambda d: d.pop("F"), "missing keys"),
    (lambda d: d["coupling"].append({"i": 0, "j": 0, "K": 1.0, "gamma": 0.0}), "self-coupling"),
    (lambda d: d["coupling"].append(dict(d["coupling"][0])), "duplicate"),
    (lambda d: d["coupling"].append({"i": 0, "j": 9, "K": 1.0, "gamma": 0.0}), "out of range"),
    (lambda d: d["coupling"][0].update(weight=2), "exactly the keys"),
    (lambda d: d.update(D=[1.0, 1.0]), "D: expected length 3"),
    (lambda d: d.update(n_g=True), "n_g"),
])
def test_schema_violations(tmp_path, mutate, pattern):
    doc = network_to_dict(generate_synthetic(3, seed=0))
    mutate(doc)
    with pytest.raises(NetworkFileError, match=pattern):
        load_network(_write(tmp_path, doc))


def test_invalid_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(NetworkFileError):
        load_network(p)


def test_network_arrays_are_read_only():
    net = generate_synthetic(3, seed=0)
    with pytest.raises(ValueError):
        net.H[0] = 1.0
