from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsindy.library import LibraryEvaluator, LibrarySpec, LibraryTooLarge, build, polynomial_count
from oracles import count_monomials, evaluate_descriptor


def test_hand_evaluable_quadratic():
    lib = build(np.array([[2.0]]), LibrarySpec(poly_order=2))
    assert lib.descriptors == ("1", "x1", "x1²")
    np.testing.assert_array_equal(lib.Theta, [[1.0, 2.0, 4.0]])


def test_two_variable_quadratic_layout():
    lib = build(np.array([[2.0], [3.0]]), LibrarySpec(poly_order=2))
    assert lib.descriptors == ("1", "x1", "x2", "x1²", "x1·x2", "x2²")
    np.testing.assert_array_equal(lib.Theta[0], [1, 2, 3, 4, 6, 9])


def test_quartic_in_twelve_latent_coordinates():
    spec = LibrarySpec(poly_order=4)
    ev = LibraryEvaluator(12, spec, "z")
    assert ev.n_terms == 1820 == comb(16, 4) == count_monomials(12, 4)
    assert "z1·z3" in ev.descriptors and "z12⁴" in ev.descriptors


@pytest.mark.parametrize("d", range(1, 7))
@pytest.mark.parametrize("p", range(1, 5))
@pytest.mark.parametrize("const", [True, False])
def test_polynomial_block_size(d, p, const):
    ev = LibraryEvaluator(d, LibrarySpec(poly_order=p, include_constant=const))
    assert ev.n_terms == polynomial_count(d, p, const) == count_monomials(d, p, const)
    assert ev.n_terms == comb(d + p, p) - (0 if const else 1)


def test_pairwise_trig_columns():
    lib = build(np.zeros((3, 2)), LibrarySpec(poly_order=0, include_constant=False,
                                              trig="pairwise-difference"))
    assert lib.descriptors == ("sin(x1-x2)", "sin(x1-x3)", "sin(x2-x3)",
                               "cos(x1-x2)", "cos(x1-x3)", "cos(x2-x3)")
    assert lib.n_terms == 2 * comb(3, 2)


def test_column_order_constant_linear_monomials_trig():
    spec = LibrarySpec(poly_order=2, trig="per-coordinate", trig_frequency=2.0)
    lib = build(np.ones((2, 3)), spec, var_prefix="z")
    assert lib.descriptors == ("1", "z1", "z2", "z1²", "z1·z2", "z2²",
                               "sin(2·z1)", "sin(2·z2)", "cos(2·z1)", "cos(2·z2)")


def test_restricted_coordinates():
    spec = LibrarySpec(1, True, "pairwise-difference", trig_coordinates=(0, 1), poly_coordinates=(2, 3))
    lib = build(np.ones((4, 2)), spec)
    assert lib.descriptors == ("1", "x3", "x4", "sin(x1-x2)", "cos(x1-x2)")


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), d=st.integers(1, 4), p=st.integers(0, 4),
       trig=st.sampled_from(["none", "per-coordinate", "pairwise-difference"]),
       w=st.sampled_from([1.0, 2.0, 0.5]), const=st.booleans())
def test_columns_match_descriptor_oracle(seed, d, p, trig, w, const):
    if p == 0 and not const and trig == "none":
        return
    data = np.random.default_rng(seed).uniform(-2, 2, size=(d, 5))
    lib = build(data, LibrarySpec(p, const, trig, w))
    assert lib.Theta.shape == (5, len(lib.descriptors))
    assert len(set(lib.descriptors)) == len(lib.descriptors)
    for k in range(5):
        values = {f"x{i + 1}": float(data[i, k]) for i in range(d)}
        ref = [evaluate_descriptor(s, values) for s in lib.descriptors]
        np.testing.assert_allclose(lib.Theta[k], ref, rtol=1e-13, atol=1e-13)


def test_single_state_evaluation_matches_batch():
    spec = LibrarySpec(3, True, "per-coordinate")
    ev = LibraryEvaluator(4, spec)
    X = np.random.default_rng(0).normal(size=(4, 6))
    batch = ev.evaluate_columns(X)
    for k in range(6):
        np.testing.assert_array_equal(ev(X[:, k]), batch[:, k])


def test_deterministic_order():
    X = np.random.default_rng(1).normal(size=(3, 4))
    a, b = build(X, LibrarySpec(3, trig="pairwise-difference")), build(X, LibrarySpec(3, trig="pairwise-difference"))
    assert a.descriptors == b.descriptors
    np.testing.assert_array_equal(a.Theta, b.Theta)


def test_column_norms_recorded_and_theta_unscaled():
    X = np.random.default_rng(2).normal(size=(2, 10)) * 7
    lib = build(X, LibrarySpec(2))
    np.testing.assert_allclose(lib.column_norms, np.linalg.norm(lib.Theta, axis=0))
    np.testing.assert_array_equal(lib.Theta[:, 1], X[0])


def test_memory_guard_reports_size():
    with pytest.raises(LibraryTooLarge) as info:
        build(np.zeros((30, 1000)), LibrarySpec(poly_order=3), memory_budget=10**6)
    assert info.value.n_bytes == 8 * 1000 * comb(33, 3)
    assert "MiB" in str(info.value)


@pytest.mark.parametrize("kwargs", [
    dict(poly_order=6), dict(poly_order=-1), dict(trig="tan"),
    dict(poly_order=0, include_constant=False), dict(trig_coordinates=(0, 0)),
])
def test_invalid_specs(kwargs):
    with pytest.raises(ValueError):
        LibrarySpec(**kwargs)


def test_nonfinite_data_and_bad_indices():
    with pytest.raises(ValueError):
        build(np.array([[np.nan, 1.0]]), LibrarySpec())
    with pytest.raises(ValueError):
        build(np.ones((2, 3)), LibrarySpec(trig="per-coordinate", trig_coordinates=(5,)))


def test_spec_dict_round_trip():
    spec = LibrarySpec(2, False, "pairwise-difference", 2.0, (0, 1), (2, 3))
    assert LibrarySpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError):
        LibrarySpec.from_dict({"poly_order": 1, "bogus": 2})
