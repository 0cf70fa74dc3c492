"""Complementarity pair construction and residual measures."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from citoplan import PlanarState, block, hopper
from citoplan.contact import (
    ComplementarityPair,
    ContactVars,
    contact_pairs,
    max_complementarity_violation,
    min_residual,
)


def test_min_residual_examples():
    assert min_residual(0.0, 5.0) == 0.0
    assert min_residual(2.0, 3.0) == 2.0
    np.testing.assert_allclose(min_residual([1.0, 4.0], [2.0, 3.0]), [1.0, 3.0])


nonneg = st.one_of(st.just(0.0), st.floats(1e-6, 100.0))


@given(a=nonneg, b=nonneg)
@settings(max_examples=200, deadline=None)
def test_min_residual_zero_iff_product_zero(a, b):
    # For nonnegative arguments min(a, b) == 0 exactly when a * b == 0.
    # Magnitudes are kept above the underflow threshold so the float product
    # faithfully represents the real one.
    if min_residual(a, b) == 0.0:
        assert a * b == 0.0
    if a * b == 0.0:
        assert min_residual(a, b) == 0.0


def test_resting_block_pairs_all_solved():
    model = block()
    state = PlanarState(np.array([0.0, 0.5]), np.zeros(2))
    cvars = ContactVars([9.8], [0.0, 0.0], [0.0])
    pairs = contact_pairs(model, state, cvars)
    assert len(pairs) == 4
    assert max_complementarity_violation(pairs) == 0.0


def test_pair_count_scales_with_contacts():
    model = hopper()
    state = PlanarState(np.array([0.0, 0.9553, 0.3, -0.3, 0.0]), np.zeros(5))
    pairs = contact_pairs(model, state, ContactVars.zeros(2))
    assert len(pairs) == 8
    kinds = [p.kind for p in pairs]
    assert kinds.count("distance") == 2
    assert kinds.count("sliding") == 4
    assert kinds.count("friction_cone") == 2


def test_flight_pairs_solved_with_zero_forces():
    model = block()
    state = PlanarState(np.array([0.0, 1.5]), np.zeros(2))
    pairs = contact_pairs(model, state, ContactVars.zeros(1))
    assert max_complementarity_violation(pairs) == 0.0
    dist = [p for p in pairs if p.kind == "distance"][0]
    assert dist.b == pytest.approx(1.0)


def test_sliding_block_pairs():
    # Block sliding right at 1 m/s with kinetic friction fully engaged:
    # gamma equals the slip speed, the -x force balances the cone, and all
    # four pairs are complementary.
    model = block()
    state = PlanarState(np.array([0.0, 0.5]), np.array([1.0, 0.0]))
    cvars = ContactVars([9.8], [0.0, 4.9], [1.0])
    pairs = contact_pairs(model, state, cvars, mu=0.5)
    by_kind = {}
    for p in pairs:
        by_kind.setdefault(p.kind, []).append(p)
    s0, s1 = by_kind["sliding"]
    assert (s0.a, s0.b) == (0.0, pytest.approx(2.0))
    assert (s1.a, s1.b) == (pytest.approx(4.9), pytest.approx(0.0))
    cone = by_kind["friction_cone"][0]
    assert (cone.a, cone.b) == (1.0, pytest.approx(0.0))
    assert max_complementarity_violation(pairs) == pytest.approx(0.0)


def test_violation_measures():
    pairs = [ComplementarityPair(2.0, 3.0, "distance", 0)]
    assert max_complementarity_violation(pairs) == pytest.approx(6.0)
    pairs = [ComplementarityPair(-0.1, 3.0, "distance", 0)]
    assert max_complementarity_violation(pairs) == pytest.approx(0.3)
    # Negativity dominates the product when it is the larger magnitude.
    pairs = [ComplementarityPair(-2.0, 0.5, "distance", 0)]
    assert max_complementarity_violation(pairs) == pytest.approx(2.0)


def test_contact_vars_validation():
    with pytest.raises(ValueError):
        ContactVars([1.0], [0.0], [0.0])
    with pytest.raises(ValueError):
        contact_pairs(
            block(),
            PlanarState(np.array([0.0, 0.5]), np.zeros(2)),
            ContactVars.zeros(2),
        )
    with pytest.raises(ValueError):
        ComplementarityPair(1.0, 1.0, "normal", 0)


@given(
    lam=st.floats(0, 50),
    phi=st.floats(0, 5),
)
@settings(max_examples=100, deadline=None)
def test_violation_zero_iff_all_pairs_solved(lam, phi):
    pairs = [ComplementarityPair(lam, phi, "distance", 0)]
    v = max_complementarity_violation(pairs)
    assert (v == 0.0) == (lam * phi == 0.0)
