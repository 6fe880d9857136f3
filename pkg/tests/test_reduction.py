import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsindy.grid_model import generate_synthetic, stacked_field
from lsindy.ode import IntegrationConfig, integrate
from lsindy.reduction import (
    compute_basis,
    cumulative_energy,
    project,
    project_states,
    read_basis,
    read_spectrum_csv,
    reconstruct,
    write_basis_csv,
    write_spectrum_csv,
)
from lsindy.snapshots import SnapshotSet, assemble


def random_snapshots(n, m, seed):
    rng = np.random.default_rng(seed)
    return SnapshotSet(np.arange(m) * 0.01, rng.normal(size=(n, m)), rng.normal(size=(n, m)))


@pytest.fixture(scope="module")
def three_gen():
    net, delta_eq = generate_synthetic(3, "ring", seed=3, return_equilibrium=True)
    x0 = np.concatenate([delta_eq + [0.1, -0.08, 0.05], np.zeros(3)])
    return assemble(integrate(stacked_field(net), x0, IntegrationConfig()), net)


def test_rank_one_matrix():
    rng = np.random.default_rng(0)
    u, v = rng.normal(size=6), rng.normal(size=40)
    X = 5 * np.outer(u / np.linalg.norm(u), v / np.linalg.norm(v))
    b = compute_basis(X, energy=0.999)
    assert b.r == 1
    assert b.singular_values[0] == pytest.approx(5.0, rel=1e-12)
    assert np.abs(b.singular_values[1:]).max() < 1e-12


def test_flat_spectrum_keeps_everything():
    X = 3.0 * np.eye(4)
    b = compute_basis(X, energy=0.999)
    assert b.r == 4 and b.energy_captured == pytest.approx(1.0)


def test_full_rank_trajectory_is_lossless(three_gen):
    b = compute_basis(three_gen, rank=6)
    X = three_gen.X
    assert np.linalg.norm(X - b.Phi_r @ (b.Phi_r.T @ X)) < 1e-10
    lat = project(three_gen, b)
    np.testing.assert_allclose(reconstruct(lat.Z, b), X, atol=1e-10)


def test_projection_lossless_in_span():
    rng = np.random.default_rng(1)
    Q = np.linalg.qr(rng.normal(size=(8, 3)))[0]
    X = Q @ rng.normal(size=(3, 50))
    b = compute_basis(X, rank=3)
    np.testing.assert_allclose(reconstruct(project_states(X, b), b), X, atol=1e-12)


def test_pythagoras():
    s = random_snapshots(6, 500, seed=2)
    b = compute_basis(s, rank=3)
    Xr = reconstruct(project(s, b).Z, b)
    lhs = np.linalg.norm(s.X - Xr) ** 2 + np.linalg.norm(Xr) ** 2
    assert lhs == pytest.approx(np.linalg.norm(s.X) ** 2, abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(2, 12), m=st.integers(2, 40),
       r=st.integers(1, 12))
def test_eckart_young(seed, n, m, r):
    X = np.random.default_rng(seed).normal(size=(n, m))
    b = compute_basis(X, rank=r)
    err = np.linalg.norm(X - reconstruct(project_states(X, b), b))
    assert err == pytest.approx(np.sqrt(np.sum(b.singular_values[b.r:] ** 2)), abs=1e-8)
    np.testing.assert_allclose(b.Phi_r.T @ b.Phi_r, np.eye(b.r), atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_monotone_in_rank(seed):
    X = np.random.default_rng(seed).normal(size=(7, 30))
    energies, errors = [], []
    for r in range(1, 8):
        b = compute_basis(X, rank=r)
        energies.append(b.energy_captured)
        errors.append(np.linalg.norm(X - reconstruct(project_states(X, b), b)))
    assert np.all(np.diff(energies) >= 0)
    assert np.all(np.diff(errors) <= 1e-12)


def test_spectrum_ordering_and_energy_rule():
    X = np.random.default_rng(5).normal(size=(10, 80)) * np.logspace(0, -3, 10)[:, None]
    b = compute_basis(X, energy=0.99)
    sv = b.singular_values
    assert np.all(np.diff(sv) <= 0) and np.all(sv >= 0)
    e = cumulative_energy(sv)
    assert e[b.r - 1] >= 0.99 and (b.r == 1 or e[b.r - 2] < 0.99)


def test_idempotence():
    X = np.random.default_rng(6).normal(size=(9, 40))
    b = compute_basis(X, rank=4)
    Z = np.random.default_rng(7).normal(size=(4, 11))
    np.testing.assert_allclose(project_states(reconstruct(Z, b), b), Z, atol=1e-10)


def test_zero_latent_gives_zero_state():
    b = compute_basis(np.random.default_rng(8).normal(size=(5, 9)), rank=2)
    assert not reconstruct(np.zeros((2, 3)), b).any()


def test_sign_convention_is_stable():
    X = np.random.default_rng(9).normal(size=(6, 20))
    a, b = compute_basis(X, rank=3), compute_basis(-X, rank=3)
    np.testing.assert_allclose(a.Phi_r, b.Phi_r, atol=1e-12)
    idx = np.argmax(np.abs(a.Phi_r), axis=0)
    assert (a.Phi_r[idx, range(3)] > 0).all()


def test_rank_is_clamped():
    assert compute_basis(np.random.default_rng(0).normal(size=(4, 3)), rank=10).r == 3


def test_errors():
    with pytest.raises(ValueError):
        compute_basis(np.zeros((4, 10)))
    with pytest.raises(ValueError):
        compute_basis(np.ones((4, 1)))
    with pytest.raises(ValueError):
        compute_basis(np.ones((4, 5)), energy=1.5)
    b = compute_basis(np.random.default_rng(0).normal(size=(4, 6)), rank=2)
    with pytest.raises(ValueError):
        reconstruct(np.zeros((3, 2)), b)
    with pytest.raises(ValueError):
        project(random_snapshots(6, 10, 0), b)


def test_centering_option():
    X = np.random.default_rng(3).normal(size=(5, 30)) + 10.0
    b = compute_basis(X, rank=5, center=True)
    np.testing.assert_allclose(reconstruct(project_states(X, b), b), X, atol=1e-10)
    np.testing.assert_allclose(b.center, X.mean(axis=1))


def test_csv_round_trip(tmp_path, three_gen):
    b = compute_basis(three_gen, energy=0.999)
    write_spectrum_csv(b, tmp_path / "spectrum.csv")
    write_basis_csv(b, tmp_path / "basis.csv")
    assert (tmp_path / "spectrum.csv").read_text().startswith("index,sigma,cumulative_energy")
    np.testing.assert_array_equal(read_spectrum_csv(tmp_path / "spectrum.csv"), b.singular_values)
    back = read_basis(tmp_path / "basis.csv", tmp_path / "spectrum.csv")
    np.testing.assert_array_equal(back.Phi_r, b.Phi_r)
    assert back.energy_captured == pytest.approx(b.energy_captured)
