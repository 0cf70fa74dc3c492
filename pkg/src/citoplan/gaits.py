"""Structured seed trajectories for contact gaits.

Linear interpolation is a poor starting point for systems that must earn
their momentum through intermittent contact: the solver inherits a
trajectory whose dynamics rows are violated almost uniformly, and the
cheapest local repair is to spread that violation along the whole horizon
rather than to restructure the contact pattern.  The builders here lay
out an explicit stance/flight phase structure and make the seed nearly
dynamically consistent: configuration rows hold exactly (velocities are
the backward differences of the positions), unactuated momentum is
transported exactly through flight, contact impulses are sized from the
momentum profile they must produce, and the controls are back-solved
from the velocity defect rows.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .dynamics import PlanarModel
from .transcription import ProblemSpec, SolveMode, Trajectory, transcribe

__all__ = ["cart_vault_seed"]


def _tip_offset(model: PlanarModel, q: np.ndarray) -> float:
    """Horizontal distance from the base to the contact tip."""
    return float(model.end_effector_positions(q)[0, 0] - q[0])


def cart_vault_seed(
    spec: ProblemSpec,
    stance_fraction: float = 0.10,
    fold_peak: float = 1.2,
    slide_tol: float = 0.15,
) -> Trajectory:
    """Vaulting-gait seed for a rail cart driven through a pendulum tip.

    The gait has three phases.  During the opening stance the tip stays
    planted where the start pose put it and the base accelerates along a
    triangular-ramp velocity profile, so the stride consumes the reach of
    the pendulum.  Flight follows: the base coasts on its conserved
    horizontal momentum while the links sweep toward the landing pose,
    folded by up to ``fold_peak`` radians to buy terrain clearance.  The
    closing stance mirrors the opening one and brakes to rest exactly at
    the goal pose.  The coast speed is tuned by a fixed point so the three
    phases meet; a touchdown knot that is still sliding gets cone-edge
    kinetic friction when the slip direction allows it.

    Boundary poses must put the tip on the terrain, with enough reach
    ahead of the start pose (and behind the goal pose) to give the
    stances room to stride.
    """
    model = spec.model
    if model.num_contacts != 1 or len(model.angle_coords) != model.nq - 1:
        raise ValueError("the vault seed fits base-plus-pendulum models only")
    N, T = spec.N, spec.T
    dt = T / (N - 1)
    na = max(2, int(round(stance_fraction * (N - 1))))
    if 2 * (na + 1) + 3 > N:
        raise ValueError("stance_fraction leaves no room for flight")
    tt = np.linspace(0.0, 1.0, N)
    ta = na * dt / T
    fl = slice(na + 1, N - na - 1)
    mu = model.terrain.mu_nominal

    q0, qf = np.asarray(spec.x0.q, float), np.asarray(spec.xf.q, float)
    x_start, x_goal = q0[0], qf[0]
    span = x_goal - x_start
    tip0 = x_start + _tip_offset(model, q0)
    tipf = x_goal + _tip_offset(model, qf)
    # two equal links with absolute angles th = u +- w keep the tip on the
    # terrain when 2 l cos(u) cos(w) equals the boundary pose's cosine sum
    l = model.links[1].length
    csum = (np.cos(q0[1]) + np.cos(q0[2])) * l

    def manifold_w(u):
        arg = csum / np.maximum(2.0 * l * np.cos(u), 1e-12)
        return np.arccos(np.clip(arg, -1.0, 1.0))

    def build(v):
        xd = np.where(tt < ta + 1e-12, v * tt / ta, v)
        xd = np.where(tt > 1.0 - ta - 1e-12, v * (1.0 - tt) / ta, xd)
        x = np.zeros(N)
        x[: na + 1] = x_start + np.cumsum(np.r_[0.0, dt * xd[1 : na + 1]])
        x[N - 1] = x_goal
        for k in range(N - 1, N - na - 1, -1):
            x[k - 1] = x[k] - dt * xd[k]
        u_par = np.zeros(N)
        u_par[: na + 1] = np.arctan((tip0 - x[: na + 1]) / csum)
        u_par[N - na - 1 :] = np.arctan((tipf - x[N - na - 1 :]) / csum)
        u_lift, u_land = u_par[na], u_par[N - na - 1]
        du_lift = (u_par[na] - u_par[na - 1]) / dt
        du_land = (u_par[N - na] - u_par[N - na - 1]) / dt
        nf = N - 2 * (na + 1)
        tc = (nf + 1) * dt
        tau = np.arange(1, nf + 1) / (nf + 1)
        h00 = 2 * tau**3 - 3 * tau**2 + 1
        h10 = tau**3 - 2 * tau**2 + tau
        h01 = -2 * tau**3 + 3 * tau**2
        h11 = tau**3 - tau**2
        u_par[fl] = h00 * u_lift + h10 * tc * du_lift + h01 * u_land + h11 * tc * du_land
        w_par = manifold_w(u_par)
        w_par[fl] += (fold_peak - w_par[fl]) * np.sin(np.pi * tau) ** 2
        th1, th2 = u_par + w_par, u_par - w_par
        q = np.stack([x, th1, th2], axis=1)
        # flight: transport the conserved base momentum exactly
        qd = np.zeros_like(q)
        qd[1:] = np.diff(q, axis=0) / dt
        px_lift = float((model.mass_matrix(q[na]) @ qd[na])[0])
        for k in range(na + 1, N - na - 1):
            M = model.mass_matrix(q[k])
            qd_k = (q[k] - q[k - 1]) / dt
            x[k] = x[k - 1] + dt * (px_lift - M[0, 1:] @ qd_k[1:]) / M[0, 0]
            q[k, 0] = x[k]
        return q

    # tune the coast speed until flight meets the braking stance
    v = abs(span) / max(1.0 - 2 * ta, 1e-9) * np.sign(span if span else 1.0)
    for _ in range(25):
        q = build(v)
        gap = q[N - na - 1, 0] - (q[N - na - 2, 0] + dt * v)
        v += gap / max(1.0 - 2 * ta, 1e-9) * 0.9
    q = build(v)

    qd = np.zeros_like(q)
    qd[1:] = np.diff(q, axis=0) / dt
    px = np.einsum("kij,kj->ki", model.mass_matrix(q), qd)[:, 0]
    tv = model.contact_velocities(q, qd)[:, 0, 0]
    gam = np.zeros(N)
    lam_N = np.zeros((N, 1))
    lam_T = np.zeros((N, 2))
    for k in range(1, N):
        if k <= na or k >= N - na:
            f = (px[k] - px[k - 1]) / dt
            lam_T[k] = [f, 0.0] if f >= 0 else [0.0, -f]
            lam_N[k, 0] = max(abs(f) / mu * 1.15, 5.0)
    for k in range(N):
        if abs(tv[k]) > slide_tol:
            # genuinely sliding: kinetic friction at the cone edge if its
            # direction matches the momentum the interval must produce
            gam[k] = abs(tv[k])
            dpx = (px[k] - px[k - 1]) / dt if k else 0.0
            if tv[k] > 0 and dpx < 0:
                lam_T[k] = [0.0, -dpx]
                lam_N[k, 0] = -dpx / mu
            elif tv[k] < 0 and dpx > 0:
                lam_T[k] = [dpx, 0.0]
                lam_N[k, 0] = dpx / mu
            else:
                lam_T[k] = 0.0
                lam_N[k] = 0.0

    states = np.concatenate([q, qd], axis=1)
    controls = np.zeros((N, model.nu))
    # back-solve the controls from the velocity defect rows
    prob = transcribe(replace(spec, mode=SolveMode.ncc()))
    prob.set_relaxation(1e-2)
    L = prob.variable_layout
    W = np.zeros(L.size)
    W[L.X.reshape(N, -1).ravel()] = states.ravel()
    W[L.LN.ravel()] = lam_N.ravel()
    W[L.LT.ravel()] = lam_T.ravel()
    W[L.G.ravel()] = gam.ravel()
    res = prob.to_nlp(W).constraints(W)[0][prob.row_slices["velocity"]]
    res = res.reshape(N - 1, model.nq)
    sol, *_ = np.linalg.lstsq(model.B, res.T / dt, rcond=None)
    controls[1:] = sol.T
    controls[0] = controls[1]

    return Trajectory(
        times=np.linspace(0.0, T, N),
        states=states,
        controls=controls,
        lam_N=lam_N,
        lam_T=lam_T,
        gamma=gam[:, None],
        solve_metadata={"seed": "cart_vault"},
    )
