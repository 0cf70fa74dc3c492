"""Planar rigid-body models with flat-terrain contact.

Three benchmark systems are provided:

* ``block``   -- a 1 kg, 1 m square sliding block, ``q = [x, z]`` locating the
  center of mass, actuated by a single horizontal force.  One contact point at
  the bottom center.
* ``cart``    -- a cart on a frictionless horizontal rail 1.5 m above the
  terrain, carrying a two-link pendulum, ``q = [x_c, th1, th2]``.  The cart
  has no direct horizontal actuation; the two joint torques are the controls
  and the pendulum tip is the single contact point.
* ``hopper``  -- a floating base with a two-link leg and a foot,
  ``q = [x_c, y_c, th1, th2, th3]``, actuated by hip, knee and ankle torques.
  The heel and toe of the foot are the two contact points.

Angle conventions: link angles are absolute, measured from the downward
vertical and positive toward +x.  The hopper foot pitch ``th3`` is measured
from the +x axis, so ``th3 = 0`` lays the foot flat with the toe ahead of the
heel.  Joint torques act on relative joint angles; the constant input map
``B`` accounts for the change of coordinates.

All kinematic and dynamic quantities accept batched configurations: a ``q``
of shape ``(..., nq)`` yields outputs with matching leading dimensions.  The
equations of motion follow the convention

    M(q) qddot + C(q, qdot) = B u + Jc(q)^T lambda

so ``bias_forces`` returns the sum of velocity-product and gravity terms on
the left-hand side.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.8  # m/s^2


@dataclass(frozen=True)
class TerrainSpec:
    """Flat terrain described by a unit normal and a height offset.

    ``height`` is the elevation of the surface measured along the normal, so
    for the default upward normal it is simply the terrain elevation.
    ``mu_nominal`` is the friction coefficient used wherever a deterministic
    value is required.
    """

    normal: tuple[float, float] = (0.0, 1.0)
    height: float = 0.0
    mu_nominal: float = 0.5

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if n.shape != (2,) or not np.isclose(np.linalg.norm(n), 1.0):
            raise ValueError("terrain normal must be a planar unit vector")
        if self.mu_nominal < 0:
            raise ValueError("friction coefficient must be nonnegative")

    @property
    def eta(self) -> np.ndarray:
        return np.asarray(self.normal, dtype=float)

    @property
    def tangent(self) -> np.ndarray:
        # Rotate the normal by -90 degrees so the tangent points toward +x
        # for the default upward normal.
        n = self.eta
        return np.array([n[1], -n[0]])


@dataclass(frozen=True)
class Link:
    """One rigid link: mass, length, CoM offset from the parent joint, and
    rotational inertia about the CoM."""

    name: str
    mass: float
    length: float
    com_offset: float
    inertia: float


@dataclass(frozen=True)
class PlanarState:
    """Configuration and velocity of a planar model."""

    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "qdot", np.asarray(self.qdot, dtype=float))
        if self.q.shape != self.qdot.shape:
            raise ValueError("q and qdot must have matching shapes")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.qdot], axis=-1)


@dataclass(frozen=True)
class PlanarModel:
    """A planar rigid-body system built from a serial chain of links.

    The generalized coordinates are an optional base translation followed by
    absolute link angles.  The internal aggregate arrays (``_mu1``,
    ``_kappa``) are mass-weighted first and second moments of the link
    geometry; together with the trigonometric structure of absolute-angle
    chains they give closed forms for the mass matrix, bias forces, contact
    kinematics, and every derivative the planner needs.
    """

    name: str
    nq: int
    nu: int
    links: tuple[Link, ...]
    terrain: TerrainSpec
    gravity: float
    # Index of the base x coordinate, index of the base y coordinate (or -1
    # when the base height is fixed), and the fixed base height in that case.
    _ix: int
    _iy: int
    _base_height: float
    _angle_idx: tuple[int, ...]
    _angle_offsets: np.ndarray
    _mu1: np.ndarray          # (na,) mass-weighted first moments per angle
    _kappa: np.ndarray        # (na, na) mass-weighted second moments
    _inertia: np.ndarray      # (na,) rotational inertia per angle coordinate
    _m_tot: float
    _B: np.ndarray            # (nq, nu) constant input map
    # Contact points: constant planar offsets (nc, 2) plus per-angle length
    # coefficients (nc, na).
    _contact_offsets: np.ndarray
    _contact_coeffs: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    # ------------------------------------------------------------------
    # Shape helpers
    # ------------------------------------------------------------------
    @property
    def num_contacts(self) -> int:
        return self._contact_offsets.shape[0]

    @property
    def nx(self) -> int:
        return 2 * self.nq

    @property
    def B(self) -> np.ndarray:
        return self._B.copy()

    @property
    def total_mass(self) -> float:
        return self._m_tot

    @property
    def angle_coords(self) -> np.ndarray:
        """Indices of the coordinates that are link angles (the coordinates
        with configuration-dependent kinematics)."""
        return np.array(self._angle_idx, dtype=int)

    def _check_q(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape[-1:] != (self.nq,):
            raise ValueError(
                f"{self.name}: expected trailing dimension {self.nq}, got {q.shape}"
            )
        return q

    def _alphas(self, q: np.ndarray) -> np.ndarray:
        th = q[..., list(self._angle_idx)]
        return th + self._angle_offsets

    # ------------------------------------------------------------------
    # Dynamics
    # ------------------------------------------------------------------
    def mass_matrix(self, q) -> np.ndarray:
        """Configuration-dependent mass matrix, shape ``(..., nq, nq)``."""
        q = self._check_q(q)
        batch = q.shape[:-1]
        M = np.zeros(batch + (self.nq, self.nq))
        M[..., self._ix, self._ix] = self._m_tot
        if self._iy >= 0:
            M[..., self._iy, self._iy] = self._m_tot
        na = len(self._angle_idx)
        if na:
            a = self._alphas(q)
            ca, sa = np.cos(a), np.sin(a)
            idx = list(self._angle_idx)
            for j, gj in enumerate(idx):
                M[..., self._ix, gj] = self._mu1[j] * ca[..., j]
                M[..., gj, self._ix] = M[..., self._ix, gj]
                if self._iy >= 0:
                    M[..., self._iy, gj] = self._mu1[j] * sa[..., j]
                    M[..., gj, self._iy] = M[..., self._iy, gj]
            # cos(a_j - a_k) via the product formula keeps this vectorized.
            cjk = ca[..., :, None] * ca[..., None, :] + sa[..., :, None] * sa[..., None, :]
            ang_block = self._kappa * cjk + np.diag(self._inertia)
            M[..., np.ix_(idx, idx)[0], np.ix_(idx, idx)[1]] = ang_block
        return M

    def bias_forces(self, q, qdot) -> np.ndarray:
        """Velocity-product plus gravity terms ``C(q, qdot)``, shape ``(..., nq)``."""
        q = self._check_q(q)
        qdot = self._check_q(qdot)
        batch = np.broadcast_shapes(q.shape[:-1], qdot.shape[:-1])
        C = np.zeros(batch + (self.nq,))
        if self._iy >= 0:
            C[..., self._iy] += self._m_tot * self.gravity
        na = len(self._angle_idx)
        if na:
            a = self._alphas(q)
            ca, sa = np.cos(a), np.sin(a)
            thd = qdot[..., list(self._angle_idx)]
            thd2 = thd**2
            C[..., self._ix] += -np.sum(self._mu1 * sa * thd2, axis=-1)
            if self._iy >= 0:
                C[..., self._iy] += np.sum(self._mu1 * ca * thd2, axis=-1)
            sjk = sa[..., :, None] * ca[..., None, :] - ca[..., :, None] * sa[..., None, :]
            cent = np.einsum("jk,...jk,...k->...j", self._kappa, sjk, thd2)
            grav = self.gravity * self._mu1 * sa
            for j, gj in enumerate(self._angle_idx):
                C[..., gj] += cent[..., j] + grav[..., j]
        return C

    # ------------------------------------------------------------------
    # Contact kinematics
    # ------------------------------------------------------------------
    def end_effector_positions(self, q) -> np.ndarray:
        """World positions of the contact points, shape ``(..., nc, 2)``."""
        q = self._check_q(q)
        batch = q.shape[:-1]
        nc = self.num_contacts
        p = np.broadcast_to(self._contact_offsets, batch + (nc, 2)).copy()
        p[..., :, 0] += q[..., self._ix][..., None]
        if self._iy >= 0:
            p[..., :, 1] += q[..., self._iy][..., None]
        else:
            p[..., :, 1] += self._base_height
        if self._angle_idx:
            a = self._alphas(q)
            s = np.stack([np.sin(a), -np.cos(a)], axis=-1)  # (..., na, 2)
            p += np.einsum("ck,...kd->...cd", self._contact_coeffs, s)
        return p

    def contact_velocities(self, q, qdot) -> np.ndarray:
        """World velocities of the contact points, shape ``(..., nc, 2)``."""
        q = self._check_q(q)
        qdot = self._check_q(qdot)
        Jp = self._point_jacobians(q)
        return np.einsum("...cdj,...j->...cd", Jp, qdot)

    def normal_distance(self, q) -> np.ndarray:
        """Signed distance from each contact point to the terrain, ``(..., nc)``."""
        p = self.end_effector_positions(q)
        eta = self.terrain.eta
        return np.einsum("...cd,d->...c", p, eta) - self.terrain.height

    def _point_jacobians(self, q: np.ndarray) -> np.ndarray:
        """d p_c / d q for each contact point, shape ``(..., nc, 2, nq)``."""
        batch = q.shape[:-1]
        nc = self.num_contacts
        Jp = np.zeros(batch + (nc, 2, self.nq))
        Jp[..., :, 0, self._ix] = 1.0
        if self._iy >= 0:
            Jp[..., :, 1, self._iy] = 1.0
        if self._angle_idx:
            a = self._alphas(q)
            sp = np.stack([np.cos(a), np.sin(a)], axis=-1)  # s'(a), (..., na, 2)
            for k, gk in enumerate(self._angle_idx):
                Jp[..., :, :, gk] += self._contact_coeffs[:, k, None] * sp[..., None, k, :]
        return Jp

    def contact_jacobian(self, q) -> tuple[np.ndarray, np.ndarray]:
        """Normal and tangential contact Jacobians.

        Returns ``(J_N, J_T)`` with shapes ``(..., nc, nq)`` and
        ``(..., 2*nc, nq)``.  Tangential rows come in pairs per contact: row
        ``2c`` is the +tangent direction and row ``2c + 1`` its negation, so
        the two rows of each pair sum to zero.
        """
        q = self._check_q(q)
        Jp = self._point_jacobians(q)
        eta = self.terrain.eta
        tan = self.terrain.tangent
        JN = np.einsum("...cdj,d->...cj", Jp, eta)
        Jt = np.einsum("...cdj,d->...cj", Jp, tan)
        batch = q.shape[:-1]
        JT = np.zeros(batch + (2 * self.num_contacts, self.nq))
        JT[..., 0::2, :] = Jt
        JT[..., 1::2, :] = -Jt
        return JN, JT

    # ------------------------------------------------------------------
    # Derivative helpers used by the transcription and the tests
    # ------------------------------------------------------------------
    def mass_matrix_prod_jac(self, q, a) -> np.ndarray:
        """Jacobian of ``M(q) a`` with respect to ``q`` for a fixed vector
        ``a``, shape ``(..., nq, nq)``."""
        q = self._check_q(q)
        a = self._check_q(a)
        batch = np.broadcast_shapes(q.shape[:-1], a.shape[:-1])
        D = np.zeros(batch + (self.nq, self.nq))
        na = len(self._angle_idx)
        if not na:
            return D
        al = self._alphas(q)
        ca, sa = np.cos(al), np.sin(al)
        ath = a[..., list(self._angle_idx)]
        ax = a[..., self._ix]
        ay = a[..., self._iy] if self._iy >= 0 else None
        sjk = sa[..., :, None] * ca[..., None, :] - ca[..., :, None] * sa[..., None, :]
        for m, gm in enumerate(self._angle_idx):
            # Rows ix/iy depend only on the m-th angle through column gm.
            D[..., self._ix, gm] = -self._mu1[m] * sa[..., m] * ath[..., m]
            if self._iy >= 0:
                D[..., self._iy, gm] = self._mu1[m] * ca[..., m] * ath[..., m]
            for k, gk in enumerate(self._angle_idx):
                if k == m:
                    val = -self._mu1[k] * sa[..., k] * ax
                    if ay is not None:
                        val = val + self._mu1[k] * ca[..., k] * ay
                    # d/dth_k of kappa_kl cos(a_k - a_l) a_l, summed over l.
                    val = val - np.einsum(
                        "l,...l,...l->...", self._kappa[k], sjk[..., k, :], ath
                    )
                    D[..., gk, gm] = val
                else:
                    D[..., gk, gm] = self._kappa[k, m] * sjk[..., k, m] * ath[..., m]
        return D

    def bias_jacobians(self, q, qdot) -> tuple[np.ndarray, np.ndarray]:
        """Jacobians of ``C(q, qdot)`` with respect to ``q`` and ``qdot``."""
        q = self._check_q(q)
        qdot = self._check_q(qdot)
        batch = np.broadcast_shapes(q.shape[:-1], qdot.shape[:-1])
        Cq = np.zeros(batch + (self.nq, self.nq))
        Cv = np.zeros(batch + (self.nq, self.nq))
        na = len(self._angle_idx)
        if not na:
            return Cq, Cv
        al = self._alphas(q)
        ca, sa = np.cos(al), np.sin(al)
        thd = qdot[..., list(self._angle_idx)]
        thd2 = thd**2
        cjk = ca[..., :, None] * ca[..., None, :] + sa[..., :, None] * sa[..., None, :]
        sjk = sa[..., :, None] * ca[..., None, :] - ca[..., :, None] * sa[..., None, :]
        for m, gm in enumerate(self._angle_idx):
            Cq[..., self._ix, gm] = -self._mu1[m] * ca[..., m] * thd2[..., m]
            Cv[..., self._ix, gm] = -2 * self._mu1[m] * sa[..., m] * thd[..., m]
            if self._iy >= 0:
                Cq[..., self._iy, gm] = -self._mu1[m] * sa[..., m] * thd2[..., m]
                Cv[..., self._iy, gm] = 2 * self._mu1[m] * ca[..., m] * thd[..., m]
            for k, gk in enumerate(self._angle_idx):
                if k == m:
                    val = np.einsum(
                        "l,...l,...l->...", self._kappa[k], cjk[..., k, :], thd2
                    )
                    # The l == k term of the centrifugal sum has no th_k
                    # dependence; remove the spurious diagonal contribution.
                    val = val - self._kappa[k, k] * thd2[..., k]
                    val = val + self.gravity * self._mu1[k] * ca[..., k]
                    Cq[..., gk, gm] = val
                else:
                    Cq[..., gk, gm] = -self._kappa[k, m] * cjk[..., k, m] * thd2[..., m]
                Cv[..., gk, gm] = 2 * self._kappa[k, m] * sjk[..., k, m] * thd[..., m]
        return Cq, Cv

    def contact_force_jac(self, q, forces) -> np.ndarray:
        """Jacobian of ``sum_c (dp_c/dq)^T f_c`` with respect to ``q``.

        ``forces`` has shape ``(..., nc, 2)``: one world-frame force per
        contact point.  The result has shape ``(..., nq, nq)``; with absolute
        angles only the angle-diagonal entries are nonzero.
        """
        q = self._check_q(q)
        forces = np.asarray(forces, dtype=float)
        batch = np.broadcast_shapes(q.shape[:-1], forces.shape[:-2])
        D = np.zeros(batch + (self.nq, self.nq))
        if not self._angle_idx:
            return D
        al = self._alphas(q)
        s = np.stack([np.sin(al), -np.cos(al)], axis=-1)
        for k, gk in enumerate(self._angle_idx):
            # d^2 p_c / d th_k^2 = -b_ck s(a_k); all cross terms vanish.
            D[..., gk, gk] = -np.einsum(
                "c,...d,...cd->...", self._contact_coeffs[:, k], s[..., k, :], forces
            )
        return D

    def contact_velocity_jac(self, q, qdot) -> np.ndarray:
        """Jacobian of the contact-point world velocities with respect to
        ``q``, shape ``(..., nc, 2, nq)``."""
        q = self._check_q(q)
        qdot = self._check_q(qdot)
        batch = np.broadcast_shapes(q.shape[:-1], qdot.shape[:-1])
        D = np.zeros(batch + (self.num_contacts, 2, self.nq))
        if not self._angle_idx:
            return D
        al = self._alphas(q)
        s = np.stack([np.sin(al), -np.cos(al)], axis=-1)
        thd = qdot[..., list(self._angle_idx)]
        for k, gk in enumerate(self._angle_idx):
            D[..., :, :, gk] = (
                -self._contact_coeffs[:, k, None]
                * s[..., None, k, :]
                * thd[..., k][..., None, None]
            )
        return D

    def point_hess_diag(self, q) -> np.ndarray:
        """Pure second derivatives of the contact-point positions.

        With absolute angles every mixed second derivative of ``p_c(q)``
        vanishes, so the array ``D[..., c, j, :] = d^2 p_c / d q_j^2`` of
        shape ``(..., nc, nq, 2)`` carries the full second-order contact
        kinematics: ``-b_ck s(a_k)`` at the angle coordinates, zero at the
        base translations.
        """
        q = self._check_q(q)
        batch = q.shape[:-1]
        D = np.zeros(batch + (self.num_contacts, self.nq, 2))
        if not self._angle_idx:
            return D
        a = self._alphas(q)
        s = np.stack([np.sin(a), -np.cos(a)], axis=-1)
        for k, gk in enumerate(self._angle_idx):
            D[..., :, gk, :] = -self._contact_coeffs[:, k, None] * s[..., None, k, :]
        return D

    def mass_matrix_prod_hess(self, q, a, r) -> np.ndarray:
        """Hessian in ``q`` of the scalar ``r . M(q) a`` for fixed ``a``,
        ``r``, shape ``(..., nq, nq)``.  Only the angle block is nonzero."""
        q = self._check_q(q)
        a = self._check_q(a)
        r = self._check_q(r)
        batch = np.broadcast_shapes(q.shape[:-1], a.shape[:-1], r.shape[:-1])
        H = np.zeros(batch + (self.nq, self.nq))
        na = len(self._angle_idx)
        if not na:
            return H
        al = np.broadcast_to(self._alphas(q), batch + (na,))
        ca, sa = np.cos(al), np.sin(al)
        idx = list(self._angle_idx)
        ath = np.broadcast_to(a[..., idx], batch + (na,))
        rth = np.broadcast_to(r[..., idx], batch + (na,))
        cjk = ca[..., :, None] * ca[..., None, :] + sa[..., :, None] * sa[..., None, :]
        # Coupling terms kappa_kl cos(a_k - a_l): off-diagonal entries carry
        # the symmetrized weight, the diagonal collects the negated row sums.
        W = self._kappa * cjk * (
            rth[..., :, None] * ath[..., None, :] + ath[..., :, None] * rth[..., None, :]
        )
        W[..., np.arange(na), np.arange(na)] = 0.0
        diag = -W.sum(axis=-1)
        rx, ax = r[..., self._ix], a[..., self._ix]
        diag = diag - self._mu1 * ca * (rx[..., None] * ath + rth * ax[..., None])
        if self._iy >= 0:
            ry, ay = r[..., self._iy], a[..., self._iy]
            diag = diag - self._mu1 * sa * (ry[..., None] * ath + rth * ay[..., None])
        W[..., np.arange(na), np.arange(na)] = diag
        ii = np.ix_(idx, idx)
        H[..., ii[0], ii[1]] = W
        return H

    def bias_hess(self, q, qdot, r) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Second derivatives of the scalar ``r . C(q, qdot)``.

        Returns ``(Hqq, Hvq, Hvv)`` with shapes ``(..., nq, nq)`` where
        ``Hvq[..., m, p]`` is the derivative with respect to ``qdot_m`` and
        ``q_p``.  ``Hvv`` is diagonal because the velocity products are pure
        squares of the angle rates.
        """
        q = self._check_q(q)
        qdot = self._check_q(qdot)
        r = self._check_q(r)
        batch = np.broadcast_shapes(q.shape[:-1], qdot.shape[:-1], r.shape[:-1])
        Hqq = np.zeros(batch + (self.nq, self.nq))
        Hvq = np.zeros(batch + (self.nq, self.nq))
        Hvv = np.zeros(batch + (self.nq, self.nq))
        na = len(self._angle_idx)
        if not na:
            return Hqq, Hvq, Hvv
        al = np.broadcast_to(self._alphas(q), batch + (na,))
        ca, sa = np.cos(al), np.sin(al)
        idx = list(self._angle_idx)
        thd = np.broadcast_to(qdot[..., idx], batch + (na,))
        thd2 = thd**2
        rth = np.broadcast_to(r[..., idx], batch + (na,))
        rx = r[..., self._ix]
        cjk = ca[..., :, None] * ca[..., None, :] + sa[..., :, None] * sa[..., None, :]
        sjk = sa[..., :, None] * ca[..., None, :] - ca[..., :, None] * sa[..., None, :]
        kc = self._kappa * cjk
        # centrifugal coupling kappa_kl sin(a_k - a_l) thd_l^2: same
        # off-diagonal/negated-row-sum structure as the mass matrix case
        V = self._kappa * sjk * (
            rth[..., :, None] * thd2[..., None, :] - thd2[..., :, None] * rth[..., None, :]
        )
        dqq = -V.sum(axis=-1) + rx[..., None] * self._mu1 * sa * thd2
        dqq = dqq - self.gravity * self._mu1 * sa * rth
        dvq = -rx[..., None] * self._mu1 * ca
        dvv = -rx[..., None] * self._mu1 * sa
        if self._iy >= 0:
            ry = r[..., self._iy]
            dqq = dqq - ry[..., None] * self._mu1 * ca * thd2
            dvq = dvq - ry[..., None] * self._mu1 * sa
            dvv = dvv + ry[..., None] * self._mu1 * ca
        # angle-angle couplings of the velocity-rate cross derivatives
        kc_diag = kc[..., np.arange(na), np.arange(na)]
        dvq = dvq - (np.einsum("...k,...kp->...p", rth, kc) - rth * kc_diag)
        dvv = dvv + np.einsum("...k,...km->...m", rth, self._kappa * sjk)
        ang_qq = V
        ang_qq[..., np.arange(na), np.arange(na)] = dqq
        ang_vq = 2.0 * thd[..., :, None] * rth[..., None, :] * kc
        ang_vq[..., np.arange(na), np.arange(na)] = 2.0 * thd * dvq
        ii = np.ix_(idx, idx)
        Hqq[..., ii[0], ii[1]] = ang_qq
        Hvq[..., ii[0], ii[1]] = ang_vq
        for m, gm in enumerate(idx):
            Hvv[..., gm, gm] = 2.0 * dvv[..., m]
        return Hqq, Hvq, Hvv


# ----------------------------------------------------------------------
# Model constructors
# ----------------------------------------------------------------------
def block(terrain: TerrainSpec | None = None) -> PlanarModel:
    """1 kg square block, side 1 m, sliding on flat terrain.

    ``q = [x, z]`` is the center of mass, so the resting height is 0.5 m.
    The single control is a horizontal force; leaving the vertical direction
    unactuated keeps the contact interaction essential to the task.
    """
    terrain = terrain or TerrainSpec()
    side = 1.0
    mass = 1.0
    return PlanarModel(
        name="block",
        nq=2,
        nu=1,
        links=(Link("body", mass, side, side / 2, mass * side**2 / 6),),
        terrain=terrain,
        gravity=GRAVITY,
        _ix=0,
        _iy=1,
        _base_height=0.0,
        _angle_idx=(),
        _angle_offsets=np.zeros(0),
        _mu1=np.zeros(0),
        _kappa=np.zeros((0, 0)),
        _inertia=np.zeros(0),
        _m_tot=mass,
        _B=np.array([[1.0], [0.0]]),
        _contact_offsets=np.array([[0.0, -side / 2]]),
        _contact_coeffs=np.zeros((1, 0)),
        metadata={"description": "sliding block, single horizontal actuator"},
    )


def cart(terrain: TerrainSpec | None = None) -> PlanarModel:
    """Contact-driven cart: a cart on a frictionless rail 1.5 m above the
    terrain with a two-link pendulum whose tip can touch the ground.

    ``q = [x_c, th1, th2]`` with absolute link angles.  Each link is 1 m long
    and 1 kg with its CoM at the midpoint; the cart body is 1 kg.  Controls
    are the two joint torques, mapped through ``B`` to the absolute-angle
    coordinates.  The cart itself is unactuated horizontally, so any net
    translation must come through tip contact forces.
    """
    terrain = terrain or TerrainSpec()
    rail_height = 1.5
    l1 = l2 = 1.0
    m_cart = m1 = m2 = 1.0
    rod = lambda m, l: m * l**2 / 12.0
    links = (
        Link("cart", m_cart, 0.0, 0.0, 0.0),
        Link("link1", m1, l1, l1 / 2, rod(m1, l1)),
        Link("link2", m2, l2, l2 / 2, rod(m2, l2)),
    )
    # Segment coefficients per angle: link1 CoM sits l1/2 along angle 1,
    # link2 CoM sits l1 along angle 1 plus l2/2 along angle 2.
    mu1 = np.array([m1 * l1 / 2 + m2 * l1, m2 * l2 / 2])
    kappa = np.array(
        [
            [m1 * (l1 / 2) ** 2 + m2 * l1**2, m2 * l1 * l2 / 2],
            [m2 * l1 * l2 / 2, m2 * (l2 / 2) ** 2],
        ]
    )
    return PlanarModel(
        name="cart",
        nq=3,
        nu=2,
        links=links,
        terrain=terrain,
        gravity=GRAVITY,
        _ix=0,
        _iy=-1,
        _base_height=rail_height,
        _angle_idx=(1, 2),
        _angle_offsets=np.zeros(2),
        _mu1=mu1,
        _kappa=kappa,
        _inertia=np.array([rod(m1, l1), rod(m2, l2)]),
        _m_tot=m_cart + m1 + m2,
        _B=np.array([[0.0, 0.0], [1.0, -1.0], [0.0, 1.0]]),
        _contact_offsets=np.array([[0.0, 0.0]]),
        _contact_coeffs=np.array([[l1, l2]]),
        metadata={"rail_height": rail_height},
    )


def hopper(terrain: TerrainSpec | None = None) -> PlanarModel:
    """Single-legged hopper: floating base, two leg links, and a foot with
    heel and toe contacts.

    ``q = [x_c, y_c, th1, th2, th3]``.  The base is a 1 kg point mass.  The
    upper and lower leg links are 0.5 m, 0.25 kg rods with midpoint CoMs; the
    foot is a 0.2 m, 0.1 kg rod whose ankle joint sits at the heel end.
    ``th1`` and ``th2`` are absolute leg angles from the downward vertical;
    ``th3`` is the foot pitch from the +x axis.  Controls are hip, knee and
    ankle torques.
    """
    terrain = terrain or TerrainSpec()
    l_leg = 0.5
    m_leg = 0.25
    l_foot = 0.2
    m_foot = 0.1
    m_base = 1.0
    rod = lambda m, l: m * l**2 / 12.0
    links = (
        Link("base", m_base, 0.0, 0.0, 0.0),
        Link("upper_leg", m_leg, l_leg, l_leg / 2, rod(m_leg, l_leg)),
        Link("lower_leg", m_leg, l_leg, l_leg / 2, rod(m_leg, l_leg)),
        Link("foot", m_foot, l_foot, l_foot / 2, rod(m_foot, l_foot)),
    )
    # Per-body segment coefficients (angles th1, th2, th3):
    #   upper leg CoM:  [l/2, 0, 0]
    #   lower leg CoM:  [l, l/2, 0]
    #   foot CoM:       [l, l, l_foot/2]
    coeffs = {
        "upper_leg": np.array([l_leg / 2, 0.0, 0.0]),
        "lower_leg": np.array([l_leg, l_leg / 2, 0.0]),
        "foot": np.array([l_leg, l_leg, l_foot / 2]),
    }
    masses = {"upper_leg": m_leg, "lower_leg": m_leg, "foot": m_foot}
    mu1 = np.zeros(3)
    kappa = np.zeros((3, 3))
    for name, a in coeffs.items():
        mu1 += masses[name] * a
        kappa += masses[name] * np.outer(a, a)
    heel = np.array([l_leg, l_leg, 0.0])
    toe = np.array([l_leg, l_leg, l_foot])
    return PlanarModel(
        name="hopper",
        nq=5,
        nu=3,
        links=links,
        terrain=terrain,
        gravity=GRAVITY,
        _ix=0,
        _iy=1,
        _base_height=0.0,
        _angle_idx=(2, 3, 4),
        # Foot pitch is measured from +x: s(th3 + pi/2) = (cos th3, sin th3).
        _angle_offsets=np.array([0.0, 0.0, np.pi / 2]),
        _mu1=mu1,
        _kappa=kappa,
        _inertia=np.array([rod(m_leg, l_leg), rod(m_leg, l_leg), rod(m_foot, l_foot)]),
        _m_tot=m_base + 2 * m_leg + m_foot,
        _B=np.array(
            [
                [0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0],
                [1.0, -1.0, 0.0],
                [0.0, 1.0, -1.0],
                [0.0, 0.0, 1.0],
            ]
        ),
        _contact_offsets=np.zeros((2, 2)),
        _contact_coeffs=np.stack([toe, heel]),
        metadata={"contact_order": ("toe", "heel")},
    )


MODEL_BUILDERS = {"block": block, "cart": cart, "hopper": hopper}


def make_model(name: str, terrain: TerrainSpec | None = None) -> PlanarModel:
    """Look up a benchmark model constructor by name."""
    try:
        builder = MODEL_BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown model '{name}'; choose from {sorted(MODEL_BUILDERS)}")
    return builder(terrain)
