"""Dynamics-model checks against independent numerical and symbolic oracles."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from citoplan import PlanarState, block, cart, hopper, make_model

MODELS = {"block": block(), "cart": cart(), "hopper": hopper()}


def random_q(rng, model, scale=np.pi):
    q = rng.uniform(-scale, scale, model.nq)
    # Keep translations in a moderate range; angles already are.
    q[: model.nq] *= 1.0
    return q


# ----------------------------------------------------------------------
# The kinetic-energy oracle itself is validated first, on the one model
# whose mass matrix is known in closed form.
# ----------------------------------------------------------------------
def test_ke_oracle_matches_block_identity():
    bodies = oracles.block_bodies()
    rng = np.random.default_rng(0)
    for _ in range(5):
        q = rng.normal(size=2)
        M = oracles.mass_matrix_oracle(bodies, q)
        np.testing.assert_allclose(M, np.eye(2), atol=1e-9)


def test_gravity_oracle_matches_block():
    bodies = oracles.block_bodies()
    g = oracles.gravity_oracle(bodies, np.array([0.3, 0.8]))
    np.testing.assert_allclose(g, [0.0, 9.8], atol=1e-8)


# ----------------------------------------------------------------------
# Mass matrix
# ----------------------------------------------------------------------
@pytest.mark.parametrize("name", ["block", "cart", "hopper"])
def test_mass_matrix_matches_ke_oracle(name):
    model = MODELS[name]
    bodies = oracles.BODY_SETS[name]()
    rng = np.random.default_rng(1)
    for _ in range(20):
        q = random_q(rng, model)
        M = model.mass_matrix(q)
        M_ref = oracles.mass_matrix_oracle(bodies, q)
        np.testing.assert_allclose(M, M_ref, rtol=1e-8, atol=1e-9)


@pytest.mark.parametrize("name", ["block", "cart", "hopper"])
def test_mass_matrix_symmetric_positive_definite(name):
    model = MODELS[name]
    rng = np.random.default_rng(2)
    qs = rng.uniform(-np.pi, np.pi, (1000, model.nq))
    M = model.mass_matrix(qs)
    np.testing.assert_allclose(M, np.swapaxes(M, -1, -2), atol=1e-12)
    eigs = np.linalg.eigvalsh(M)
    assert eigs.min() > 0.0


def test_block_mass_matrix_is_identity():
    M = MODELS["block"].mass_matrix(np.array([0.0, 0.5]))
    np.testing.assert_allclose(M, np.eye(2), atol=0.0)


def test_mass_matrix_batched_matches_loop():
    model = MODELS["hopper"]
    rng = np.random.default_rng(3)
    qs = rng.uniform(-2, 2, (7, model.nq))
    M_batch = model.mass_matrix(qs)
    for i in range(7):
        np.testing.assert_allclose(M_batch[i], model.mass_matrix(qs[i]), atol=0.0)


# ----------------------------------------------------------------------
# Bias forces
# ----------------------------------------------------------------------
def test_block_bias_is_gravity():
    C = MODELS["block"].bias_forces(np.array([0.0, 0.5]), np.zeros(2))
    np.testing.assert_allclose(C, [0.0, 9.8], atol=0.0)


@pytest.mark.parametrize("name", ["cart", "hopper"])
def test_bias_at_rest_matches_potential_gradient(name):
    model = MODELS[name]
    bodies = oracles.BODY_SETS[name]()
    rng = np.random.default_rng(4)
    for _ in range(10):
        q = random_q(rng, model)
        C = model.bias_forces(q, np.zeros(model.nq))
        np.testing.assert_allclose(C, oracles.gravity_oracle(bodies, q), atol=1e-6)


@pytest.mark.parametrize("name", ["block", "cart", "hopper"])
def test_bias_velocity_terms_match_lagrangian_oracle(name):
    model = MODELS[name]
    bodies = oracles.BODY_SETS[name]()
    rng = np.random.default_rng(5)
    for _ in range(10):
        q = random_q(rng, model)
        qd = rng.normal(size=model.nq)
        C = model.bias_forces(q, qd)
        np.testing.assert_allclose(C, oracles.bias_oracle(bodies, q, qd), atol=1e-6)


# ----------------------------------------------------------------------
# Contact kinematics
# ----------------------------------------------------------------------
def test_block_contact_point_is_bottom_center():
    p = MODELS["block"].end_effector_positions(np.array([0.0, 0.5]))
    np.testing.assert_allclose(p, [[0.0, 0.0]], atol=0.0)


def test_cart_tip_hangs_two_meters_below_center():
    p = MODELS["cart"].end_effector_positions(np.array([1.2, 0.0, 0.0]))
    np.testing.assert_allclose(p, [[1.2, -0.5]], atol=1e-14)


def test_hopper_kinematics_match_symbolic_chain():
    # Forward kinematics recomputed symbolically from the documented joint
    # chain, independent of the package's aggregate-coefficient form.
    sp = pytest.importorskip("sympy")
    x, y, t1, t2, t3 = sp.symbols("x y t1 t2 t3")
    ankle = sp.Matrix(
        [
            x + sp.sin(t1) / 2 + sp.sin(t2) / 2,
            y - sp.cos(t1) / 2 - sp.cos(t2) / 2,
        ]
    )
    heel = ankle
    toe = ankle + sp.Matrix([sp.cos(t3), sp.sin(t3)]) / 5
    fk = sp.lambdify((x, y, t1, t2, t3), sp.Matrix.hstack(toe, heel), "numpy")
    model = MODELS["hopper"]
    rng = np.random.default_rng(6)
    for _ in range(50):
        q = random_q(rng, model)
        expected = np.array(fk(*q)).T
        np.testing.assert_allclose(model.end_effector_positions(q), expected, atol=1e-12)


def test_block_normal_distance_examples():
    model = MODELS["block"]
    assert model.normal_distance(np.array([3.0, 0.5])) == pytest.approx(0.0)
    assert model.normal_distance(np.array([-1.0, 1.5])) == pytest.approx(1.0)


@pytest.mark.parametrize("name", ["block", "cart", "hopper"])
def test_normal_distance_composes_with_positions(name):
    model = MODELS[name]
    rng = np.random.default_rng(7)
    eta = model.terrain.eta
    for _ in range(10):
        q = random_q(rng, model)
        p = model.end_effector_positions(q)
        phi = model.normal_distance(q)
        np.testing.assert_allclose(phi, p @ eta - model.terrain.height, atol=1e-14)


def test_block_contact_jacobian_exact():
    JN, JT = MODELS["block"].contact_jacobian(np.array([0.0, 0.5]))
    np.testing.assert_allclose(JN, [[0.0, 1.0]], atol=0.0)
    np.testing.assert_allclose(JT, [[1.0, 0.0], [-1.0, 0.0]], atol=0.0)


@pytest.mark.parametrize("name", ["block", "cart", "hopper"])
def test_contact_jacobian_matches_finite_differences(name):
    model = MODELS[name]
    rng = np.random.default_rng(8)
    for _ in range(10):
        q = random_q(rng, model)
        JN, JT = model.contact_jacobian(q)
        JN_fd = oracles.fd_jacobian(lambda qq: model.normal_distance(qq), q)
        np.testing.assert_allclose(JN, JN_fd, atol=1e-5)
        tangent = model.terrain.tangent
        Jt_fd = oracles.fd_jacobian(
            lambda qq: model.end_effector_positions(qq) @ tangent, q
        )
        np.testing.assert_allclose(JT[0::2], Jt_fd, atol=1e-5)


@pytest.mark.parametrize("name", ["block", "cart", "hopper"])
def test_tangential_rows_sum_to_zero(name):
    model = MODELS[name]
    rng = np.random.default_rng(9)
    q = random_q(rng, model)
    _, JT = model.contact_jacobian(q)
    np.testing.assert_allclose(JT[0::2] + JT[1::2], 0.0, atol=0.0)


def test_contact_velocities_match_position_rate():
    model = MODELS["hopper"]
    rng = np.random.default_rng(10)
    q = random_q(rng, model)
    qd = rng.normal(size=model.nq)
    v = model.contact_velocities(q, qd)
    h = 1e-7
    v_fd = (
        model.end_effector_positions(q + h * qd) - model.end_effector_positions(q - h * qd)
    ) / (2 * h)
    np.testing.assert_allclose(v, v_fd, atol=1e-6)


# ----------------------------------------------------------------------
# Analytic derivative helpers (these feed the planner's Jacobians)
# ----------------------------------------------------------------------
@pytest.mark.parametrize("name", ["block", "cart", "hopper"])
def test_mass_matrix_prod_jac_matches_fd(name):
    model = MODELS[name]
    rng = np.random.default_rng(11)
    for _ in range(5):
        q = random_q(rng, model)
        a = rng.normal(size=model.nq)
        D = model.mass_matrix_prod_jac(q, a)
        D_fd = oracles.fd_jacobian(lambda qq: model.mass_matrix(qq) @ a, q)
        np.testing.assert_allclose(D, D_fd, atol=1e-7)


@pytest.mark.parametrize("name", ["block", "cart", "hopper"])
def test_bias_jacobians_match_fd(name):
    model = MODELS[name]
    rng = np.random.default_rng(12)
    for _ in range(5):
        q = random_q(rng, model)
        qd = rng.normal(size=model.nq)
        Cq, Cv = model.bias_jacobians(q, qd)
        Cq_fd = oracles.fd_jacobian(lambda qq: model.bias_forces(qq, qd), q)
        Cv_fd = oracles.fd_jacobian(lambda vv: model.bias_forces(q, vv), qd)
        np.testing.assert_allclose(Cq, Cq_fd, atol=1e-6)
        np.testing.assert_allclose(Cv, Cv_fd, atol=1e-6)


@pytest.mark.parametrize("name", ["block", "cart", "hopper"])
def test_contact_force_jac_matches_fd(name):
    model = MODELS[name]
    rng = np.random.default_rng(13)
    for _ in range(5):
        q = random_q(rng, model)
        f = rng.normal(size=(model.num_contacts, 2))

        def gen_force(qq):
            Jp = model._point_jacobians(np.asarray(qq))
            return np.einsum("cdj,cd->j", Jp, f)

        D = model.contact_force_jac(q, f)
        np.testing.assert_allclose(D, oracles.fd_jacobian(gen_force, q), atol=1e-6)


@pytest.mark.parametrize("name", ["cart", "hopper"])
def test_contact_velocity_jac_matches_fd(name):
    model = MODELS[name]
    rng = np.random.default_rng(14)
    for _ in range(5):
        q = random_q(rng, model)
        qd = rng.normal(size=model.nq)
        D = model.contact_velocity_jac(q, qd)
        D_fd = oracles.fd_jacobian(lambda qq: model.contact_velocities(qq, qd), q)
        np.testing.assert_allclose(D, D_fd, atol=1e-6)


# ----------------------------------------------------------------------
# API surface
# ----------------------------------------------------------------------
def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        MODELS["cart"].mass_matrix(np.zeros(4))
    with pytest.raises(ValueError):
        MODELS["block"].bias_forces(np.zeros(2), np.zeros(3))


def test_make_model_lookup():
    assert make_model("hopper").nq == 5
    with pytest.raises(ValueError):
        make_model("pendulum")


def test_planar_state_validation():
    s = PlanarState(np.zeros(2), np.ones(2))
    np.testing.assert_allclose(s.as_vector(), [0, 0, 1, 1])
    with pytest.raises(ValueError):
        PlanarState(np.zeros(2), np.zeros(3))


def test_model_shape_constants():
    assert (MODELS["block"].nq, MODELS["block"].nu, MODELS["block"].num_contacts) == (2, 1, 1)
    assert (MODELS["cart"].nq, MODELS["cart"].nu, MODELS["cart"].num_contacts) == (3, 2, 1)
    assert (MODELS["hopper"].nq, MODELS["hopper"].nu, MODELS["hopper"].num_contacts) == (5, 3, 2)
    assert MODELS["hopper"].total_mass == pytest.approx(1.6)


@given(
    th=st.lists(st.floats(-np.pi, np.pi), min_size=2, max_size=2),
    xc=st.floats(-5, 5),
)
@settings(max_examples=50, deadline=None)
def test_cart_mass_matrix_positive_definite_property(th, xc):
    M = MODELS["cart"].mass_matrix(np.array([xc, *th]))
    assert np.linalg.eigvalsh(M).min() > 1e-3
