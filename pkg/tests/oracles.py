"""Independent numerical oracles shared across the test suite.

Everything here deliberately avoids the package's internal chain
representation: body positions are written out longhand from the documented
geometry conventions, and all derivatives are taken by finite differences.
The dynamics tests validate the oracle itself on the block (whose mass
matrix is the identity) before using it on the articulated models.
"""
from __future__ import annotations

import numpy as np

GRAV = 9.8


# ----------------------------------------------------------------------
# Longhand body descriptions: (mass, CoM position function, angle index or
# None, inertia about CoM).  Angle indices refer to coordinates of q.
# ----------------------------------------------------------------------
def block_bodies():
    return [
        {"mass": 1.0, "pos": lambda q: np.array([q[0], q[1]]), "angle": None, "inertia": 0.0},
    ]


def cart_bodies():
    rod = lambda m, l: m * l**2 / 12.0
    return [
        {"mass": 1.0, "pos": lambda q: np.array([q[0], 1.5]), "angle": None, "inertia": 0.0},
        {
            "mass": 1.0,
            "pos": lambda q: np.array(
                [q[0] + 0.5 * np.sin(q[1]), 1.5 - 0.5 * np.cos(q[1])]
            ),
            "angle": 1,
            "inertia": rod(1.0, 1.0),
        },
        {
            "mass": 1.0,
            "pos": lambda q: np.array(
                [
                    q[0] + np.sin(q[1]) + 0.5 * np.sin(q[2]),
                    1.5 - np.cos(q[1]) - 0.5 * np.cos(q[2]),
                ]
            ),
            "angle": 2,
            "inertia": rod(1.0, 1.0),
        },
    ]


def hopper_bodies():
    rod = lambda m, l: m * l**2 / 12.0
    return [
        {"mass": 1.0, "pos": lambda q: np.array([q[0], q[1]]), "angle": None, "inertia": 0.0},
        {
            "mass": 0.25,
            "pos": lambda q: np.array(
                [q[0] + 0.25 * np.sin(q[2]), q[1] - 0.25 * np.cos(q[2])]
            ),
            "angle": 2,
            "inertia": rod(0.25, 0.5),
        },
        {
            "mass": 0.25,
            "pos": lambda q: np.array(
                [
                    q[0] + 0.5 * np.sin(q[2]) + 0.25 * np.sin(q[3]),
                    q[1] - 0.5 * np.cos(q[2]) - 0.25 * np.cos(q[3]),
                ]
            ),
            "angle": 3,
            "inertia": rod(0.25, 0.5),
        },
        {
            "mass": 0.1,
            "pos": lambda q: np.array(
                [
                    q[0] + 0.5 * np.sin(q[2]) + 0.5 * np.sin(q[3]) + 0.1 * np.cos(q[4]),
                    q[1] - 0.5 * np.cos(q[2]) - 0.5 * np.cos(q[3]) + 0.1 * np.sin(q[4]),
                ]
            ),
            "angle": 4,
            "inertia": rod(0.1, 0.2),
        },
    ]


BODY_SETS = {"block": block_bodies, "cart": cart_bodies, "hopper": hopper_bodies}


# ----------------------------------------------------------------------
# Finite differencing
# ----------------------------------------------------------------------
def fd_jacobian(f, x, h=1e-6):
    """Central-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x), dtype=float)
    J = np.zeros(f0.shape + x.shape)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        J[..., i] = (np.asarray(f(xp)) - np.asarray(f(xm))) / (2 * h)
    return J


def fd_gradient(f, x, h=1e-6):
    return fd_jacobian(lambda y: np.atleast_1d(f(y)), x, h)[0]


def cs_jacobian(f, x, h=1e-30):
    """Complex-step Jacobian: machine-precision derivatives for analytic
    functions, with no subtractive cancellation.  Used where an oracle is
    differentiated a second time and central differences would lose half the
    significant digits."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x), dtype=float)
    J = np.zeros(f0.shape + x.shape)
    for i in range(x.size):
        xc = x.astype(complex)
        xc.flat[i] += 1j * h
        J[..., i] = np.imag(np.asarray(f(xc))) / h
    return J


# ----------------------------------------------------------------------
# Dynamics oracles
# ----------------------------------------------------------------------
def kinetic_energy(bodies, q, qdot, method="cs"):
    """Kinetic energy from numerically differentiated body positions."""
    ke = 0.0
    for b in bodies:
        J = cs_jacobian(b["pos"], q) if method == "cs" else fd_jacobian(b["pos"], q)
        v = J @ qdot
        ke += 0.5 * b["mass"] * float(v @ v)
        if b["angle"] is not None:
            ke += 0.5 * b["inertia"] * qdot[b["angle"]] ** 2
    return ke


def mass_matrix_oracle(bodies, q, method="cs"):
    """Mass matrix as the Hessian of the kinetic energy in qdot.

    The kinetic energy is an exact quadratic form in qdot, so polarization
    on basis vectors recovers the matrix without a second differencing pass.
    """
    n = len(q)
    M = np.zeros((n, n))
    eye = np.eye(n)
    ke_basis = [kinetic_energy(bodies, q, eye[i], method) for i in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j:
                M[i, i] = 2 * ke_basis[i]
            else:
                M[i, j] = (
                    kinetic_energy(bodies, q, eye[i] + eye[j], method)
                    - ke_basis[i]
                    - ke_basis[j]
                )
    return M


def potential_energy(bodies, q):
    return sum(b["mass"] * GRAV * b["pos"](q)[1] for b in bodies)


def gravity_oracle(bodies, q, h=1e-6):
    return fd_gradient(lambda qq: potential_energy(bodies, qq), q, h)


def velocity_bias_oracle(bodies, q, qdot, h=1e-5):
    """Velocity-product terms Mdot qdot - 0.5 d/dq (qdot^T M qdot) via
    finite differences of the mass-matrix oracle."""
    n = len(q)
    dM = np.zeros((n, n, n))  # dM[k] = dM/dq_k
    for k in range(n):
        qp = q.copy()
        qm = q.copy()
        qp[k] += h
        qm[k] -= h
        dM[k] = (mass_matrix_oracle(bodies, qp) - mass_matrix_oracle(bodies, qm)) / (2 * h)
    term1 = np.einsum("kij,k,j->i", dM, qdot, qdot)
    term2 = 0.5 * np.einsum("ijk,j,k->i", dM, qdot, qdot)
    return term1 - term2


def bias_oracle(bodies, q, qdot):
    return velocity_bias_oracle(bodies, q, qdot) + gravity_oracle(bodies, q)


def total_energy(bodies, q, qdot):
    return kinetic_energy(bodies, q, qdot) + potential_energy(bodies, q)


# ----------------------------------------------------------------------
# Monte Carlo oracle for expected min-residuals
# ----------------------------------------------------------------------
class MinResidualMC:
    """Monte Carlo estimates of E[min(z, F)^k] for F ~ N(mean, sigma^2).

    One pool of standard normal draws is sorted once; for any (z, mean,
    sigma) the sample mean of min(z, F)^2 splits at the threshold
    xi = (z - mean) / sigma into a truncated polynomial part (recovered from
    prefix sums of xi powers) and a constant part, so each estimate costs a
    binary search instead of a pass over the pool.  The estimates are exactly
    what a direct pass over the same draws would produce.
    """

    def __init__(self, n=10_000_000, seed=20240817):
        xi = np.random.default_rng(seed).standard_normal(n)
        xi.sort()
        self.xi = xi
        self.n = n
        self.cum = [
            np.concatenate([[0.0], np.cumsum(xi**k)]) for k in range(1, 5)
        ]

    def _truncated_power_sums(self, z, mean, sigma):
        k = int(np.searchsorted(self.xi, (z - mean) / sigma))
        c1, c2, c3, c4 = (c[k] for c in self.cum)
        return k, c1, c2, c3, c4

    def estimate_min_sq(self, z, mean, sigma):
        """Returns (estimate, standard error) of E[min(z, F)^2]."""
        if sigma == 0:
            return min(z, mean) ** 2, 0.0
        n = self.n
        k, c1, c2, c3, c4 = self._truncated_power_sums(z, mean, sigma)
        m2 = (
            k * mean**2 + 2 * mean * sigma * c1 + sigma**2 * c2 + (n - k) * z**2
        ) / n
        m4 = (
            k * mean**4
            + 4 * mean**3 * sigma * c1
            + 6 * mean**2 * sigma**2 * c2
            + 4 * mean * sigma**3 * c3
            + sigma**4 * c4
            + (n - k) * z**4
        ) / n
        se = np.sqrt(max(m4 - m2**2, 0.0) / n)
        return m2, se

    def estimate_min(self, z, mean, sigma):
        """Returns (estimate, standard error) of E[min(z, F)]."""
        if sigma == 0:
            return min(z, mean), 0.0
        n = self.n
        k, c1, c2, _, _ = self._truncated_power_sums(z, mean, sigma)
        m1 = (k * mean + sigma * c1 + (n - k) * z) / n
        m2 = (
            k * mean**2 + 2 * mean * sigma * c1 + sigma**2 * c2 + (n - k) * z**2
        ) / n
        se = np.sqrt(max(m2 - m1**2, 0.0) / n)
        return m1, se

    def estimate_cdf(self, z, mean, sigma):
        """Empirical P(F <= z) over the pool."""
        return np.searchsorted(self.xi, (z - mean) / sigma) / self.n
