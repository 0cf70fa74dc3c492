"""Direct transcription of planar contact problems into sparse NLPs.

A trajectory over N knots is packed into one decision vector.  Each knot
holds, in order, the state x_i = (q_i, qdot_i), the control u_i, and the
contact block (lam_N, lam_T, gamma); a worst-case problem appends one
trailing relaxation scalar eps.  Dynamics use backward Euler over the
N - 1 intervals:

    q_{i+1} - q_i - dt qdot_{i+1} = 0
    M(q_{i+1}) (qdot_{i+1} - qdot_i) + dt C(q_{i+1}, qdot_{i+1})
        - dt B u_{i+1} - dt J_c(q_{i+1})^T lam_{i+1} = 0

Contact conditions are imposed at every knot.  The complementarity
products a b = 0 are relaxed to a b <= s with a shared scalar s that an
outer loop drives to zero (see ``RELAXATION_SCHEDULE``); ``plan`` runs
that loop with warm starts.  Solve modes:

- NCC: all four complementarity pairs as relaxed hard constraints at the
  terrain's nominal parameters.
- ExpectedValue: the same rows at the means of the uncertainty model.
- ERM: pairs whose parameter is uncertain (terrain distance under height
  noise, friction cone under coefficient noise) are removed from the
  constraints and charged through the expected squared residual
  E[min(z, F)^2] instead, weighted by beta and summed over knots.  The
  sliding pair always stays a hard constraint; nonnegativity bounds on
  the contact variables are kept.
- WorstCase: the friction cone is enforced for every coefficient in a
  finite instance list, with products capped by the scalar eps that is
  itself minimized.

Jacobian sparsity is fixed at construction; each evaluation only refills
the numeric entries, so repeated solver calls stay cheap.
"""
from __future__ import annotations

import logging
from collections import namedtuple
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .contact import ContactVars, contact_pairs, max_complementarity_violation
from .dynamics import PlanarModel, PlanarState
from .erm import (
    UncertaintyModel,
    erm_min_sq_curv_raw,
    erm_min_sq_grad_raw,
    erm_min_sq_raw,
)
from .solver import NlpProblem, SolveOptions, SolveReport, solve

logger = logging.getLogger(__name__)

#: Relaxation values for the complementarity products, tightened in order.
RELAXATION_SCHEDULE = (1e-2, 1e-4, 1e-6, 0.0)
#: Feasibility tolerance used for the final (s = 0) stage.
FINAL_FEAS_TOL = 1e-8

MODE_VARIANTS = ("NCC", "ExpectedValue", "ERM", "WorstCase")


@dataclass(frozen=True)
class SolveMode:
    """Which treatment the contact conditions receive in the NLP."""

    variant: str = "NCC"
    worst_case_instances: tuple[float, ...] = ()

    def __post_init__(self):
        if self.variant not in MODE_VARIANTS:
            raise ValueError(f"unknown solve mode {self.variant!r}")
        object.__setattr__(
            self, "worst_case_instances", tuple(float(v) for v in self.worst_case_instances)
        )
        if self.variant == "WorstCase" and not self.worst_case_instances:
            raise ValueError("WorstCase mode needs at least one parameter instance")

    @classmethod
    def ncc(cls) -> "SolveMode":
        return cls("NCC")

    @classmethod
    def expected_value(cls) -> "SolveMode":
        return cls("ExpectedValue")

    @classmethod
    def erm(cls) -> "SolveMode":
        return cls("ERM")

    @classmethod
    def worst_case(cls, instances) -> "SolveMode":
        return cls("WorstCase", tuple(instances))


@dataclass
class ProblemSpec:
    """Everything needed to transcribe one trajectory optimization problem.

    Q and R are diagonals of the quadratic running cost
    L = (1/2)((x - xf)^T Q (x - xf) + u^T R u), integrated as dt * L over
    the knots.  ``terminal_weight``, when given, adds a final-state
    quadratic on top (the final state is also pinned by an equality, so
    this defaults to None meaning zero).
    """

    model: PlanarModel
    x0: PlanarState
    xf: PlanarState
    T: float
    N: int
    Q: np.ndarray
    R: np.ndarray
    uncertainty: UncertaintyModel = field(default_factory=UncertaintyModel)
    mode: SolveMode = field(default_factory=SolveMode.ncc)
    terminal_weight: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("need at least two knots")
        if not self.T > 0:
            raise ValueError("horizon must be positive")
        nx, nu = 2 * self.model.nq, self.model.nu
        self.Q = np.asarray(self.Q, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        if self.Q.shape != (nx,) or self.R.shape != (nu,):
            raise ValueError("Q and R must be cost diagonals of length nx and nu")
        if np.any(self.Q < 0) or np.any(self.R < 0):
            raise ValueError("cost weights must be nonnegative")
        if self.terminal_weight is not None:
            self.terminal_weight = np.asarray(self.terminal_weight, dtype=float)
            if self.terminal_weight.shape != (nx,):
                raise ValueError("terminal_weight must be a state-cost diagonal")
        for name, state in (("x0", self.x0), ("xf", self.xf)):
            if state.q.shape != (self.model.nq,):
                raise ValueError(f"{name} does not match the model dimension")

    @property
    def dt(self) -> float:
        return self.T / (self.N - 1)


TrajectoryArrays = namedtuple(
    "TrajectoryArrays", ["states", "controls", "lam_N", "lam_T", "gamma", "eps"]
)


@dataclass(frozen=True)
class VariableLayout:
    """Index map for the flat decision vector.

    Knot i occupies the contiguous slice ``[i * block, (i + 1) * block)``
    with sub-blocks x, u, lam_N, lam_T, gamma in that order; lam_T stores
    the two cone directions interleaved per contact (+tangent then
    -tangent).  ``has_eps`` appends one trailing scalar.
    """

    N: int
    nx: int
    nu: int
    nc: int
    has_eps: bool = False

    @property
    def block(self) -> int:
        return self.nx + self.nu + 4 * self.nc

    @property
    def size(self) -> int:
        return self.N * self.block + (1 if self.has_eps else 0)

    @property
    def eps_index(self) -> Optional[int]:
        return self.N * self.block if self.has_eps else None

    def x_slice(self, i: int) -> slice:
        base = i * self.block
        return slice(base, base + self.nx)

    def u_slice(self, i: int) -> slice:
        base = i * self.block + self.nx
        return slice(base, base + self.nu)

    def lam_N_slice(self, i: int) -> slice:
        base = i * self.block + self.nx + self.nu
        return slice(base, base + self.nc)

    def lam_T_slice(self, i: int) -> slice:
        base = i * self.block + self.nx + self.nu + self.nc
        return slice(base, base + 2 * self.nc)

    def gamma_slice(self, i: int) -> slice:
        base = i * self.block + self.nx + self.nu + 3 * self.nc
        return slice(base, base + self.nc)

    @cached_property
    def X(self) -> np.ndarray:
        base = np.arange(self.N)[:, None] * self.block
        return base + np.arange(self.nx)

    @cached_property
    def U(self) -> np.ndarray:
        base = np.arange(self.N)[:, None] * self.block
        return base + self.nx + np.arange(self.nu)

    @cached_property
    def LN(self) -> np.ndarray:
        base = np.arange(self.N)[:, None] * self.block
        return base + self.nx + self.nu + np.arange(self.nc)

    @cached_property
    def LT(self) -> np.ndarray:
        base = np.arange(self.N)[:, None] * self.block
        return base + self.nx + self.nu + self.nc + np.arange(2 * self.nc)

    @cached_property
    def G(self) -> np.ndarray:
        base = np.arange(self.N)[:, None] * self.block
        return base + self.nx + self.nu + 3 * self.nc + np.arange(self.nc)

    def pack(self, states, controls, lam_N, lam_T, gamma, eps: float = 0.0) -> np.ndarray:
        w = np.zeros(self.size)
        w[self.X] = np.asarray(states, float)
        w[self.U] = np.asarray(controls, float)
        w[self.LN] = np.asarray(lam_N, float)
        w[self.LT] = np.asarray(lam_T, float)
        w[self.G] = np.asarray(gamma, float)
        if self.has_eps:
            w[self.eps_index] = eps
        return w

    def unpack(self, w: np.ndarray) -> TrajectoryArrays:
        w = np.asarray(w, float)
        if w.shape != (self.size,):
            raise ValueError(f"expected a vector of length {self.size}")
        eps = float(w[self.eps_index]) if self.has_eps else 0.0
        return TrajectoryArrays(
            states=w[self.X].copy(),
            controls=w[self.U].copy(),
            lam_N=w[self.LN].copy(),
            lam_T=w[self.LT].copy(),
            gamma=w[self.G].copy(),
            eps=eps,
        )


@dataclass
class Trajectory:
    """A discrete trajectory with per-knot contact variables.

    Forces are stored as struct-of-arrays for serialization; ``contact``
    rebuilds the per-knot ContactVars view.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    lam_N: np.ndarray
    lam_T: np.ndarray
    gamma: np.ndarray
    solve_metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, float)
        self.states = np.asarray(self.states, float)
        self.controls = np.asarray(self.controls, float)
        self.lam_N = np.asarray(self.lam_N, float)
        self.lam_T = np.asarray(self.lam_T, float)
        self.gamma = np.asarray(self.gamma, float)
        N = self.times.shape[0]
        if self.times.ndim != 1 or N < 2:
            raise ValueError("times must hold at least two knots")
        steps = np.diff(self.times)
        if np.any(steps <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError("times must be uniformly spaced")
        for name in ("states", "controls", "lam_N", "lam_T", "gamma"):
            if getattr(self, name).shape[0] != N:
                raise ValueError(f"{name} must have one row per knot")

    @property
    def N(self) -> int:
        return self.times.shape[0]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def contact(self) -> list[ContactVars]:
        return [
            ContactVars(self.lam_N[i], self.lam_T[i], self.gamma[i])
            for i in range(self.N)
        ]

    def state(self, i: int) -> PlanarState:
        nq = self.states.shape[1] // 2
        return PlanarState(self.states[i, :nq], self.states[i, nq:])


def msd(a: Trajectory, b: Trajectory, channel: str) -> float:
    """Mean-squared difference (1/N) sum_i ||w_a(t_i) - w_b(t_i)||^2 over one
    channel: 'state', 'control', or 'force' (normal plus tangential)."""
    if a.N != b.N or not np.isclose(a.dt, b.dt, rtol=1e-9):
        raise ValueError("trajectories use different discretizations")
    if channel == "state":
        d = a.states - b.states
    elif channel == "control":
        d = a.controls - b.controls
    elif channel == "force":
        d = np.hstack(
            [a.lam_N - b.lam_N, a.lam_T - b.lam_T]
        )
    else:
        raise ValueError(f"unknown channel {channel!r}")
    return float(np.mean(np.sum(d * d, axis=1)))


class TranscribedProblem:
    """The assembled NLP for one ProblemSpec.

    Exposes ``cost``, ``equality_constraints``, ``inequality_constraints``
    (each with derivatives), per-variable ``lower``/``upper`` bounds, the
    ``variable_layout``, and a mutable product ``relaxation`` scalar.
    ``evaluate`` computes everything in one pass for the solver.
    """

    def __init__(self, spec: ProblemSpec):
        model = spec.model
        mode = spec.mode
        unc = spec.uncertainty
        self.spec = spec
        self.nq = model.nq
        self.nc = model.num_contacts
        nx, nu, nc, N = 2 * self.nq, model.nu, self.nc, spec.N
        if nc == 0:
            raise ValueError("transcription needs at least one contact point")

        self.soft_distance = mode.variant == "ERM" and unc.height.sigma > 0
        self.soft_friction = mode.variant == "ERM" and unc.friction.sigma > 0
        if mode.variant == "ERM" and not (self.soft_distance or self.soft_friction):
            logger.warning(
                "ERM mode with zero sigmas degenerates to the deterministic problem"
            )
        self.worst_case = mode.variant == "WorstCase"
        if mode.variant == "NCC":
            self.mu_cone = np.array([model.terrain.mu_nominal])
            self.height_shift = 0.0
        elif self.worst_case:
            self.mu_cone = np.array(mode.worst_case_instances)
            self.height_shift = unc.height.mean
        else:
            self.mu_cone = np.array([unc.friction.mean])
            self.height_shift = unc.height.mean
        self.K = len(self.mu_cone)

        self.variable_layout = VariableLayout(N, nx, nu, nc, has_eps=self.worst_case)
        L = self.variable_layout
        n = L.size
        self.n = n
        self.relaxation = RELAXATION_SCHEDULE[0]

        self.lower = np.full(n, -np.inf)
        self.upper = np.full(n, np.inf)
        # contact variables and the worst-case slack are nonnegative
        self.lower[L.LN] = 0.0
        self.lower[L.LT] = 0.0
        self.lower[L.G] = 0.0
        if L.has_eps:
            self.lower[L.eps_index] = 0.0

        self._x0_vec = spec.x0.as_vector()
        self._xf_vec = spec.xf.as_vector()

        # ---- constraint row bookkeeping ------------------------------
        self.row_slices: dict[str, slice] = {}
        self._row_count = 0

        def add_rows(name: str, count: int) -> None:
            self.row_slices[name] = slice(self._row_count, self._row_count + count)
            self._row_count += count

        nq = self.nq
        add_rows("boundary0", nx)
        add_rows("boundaryf", nx)
        add_rows("config", (N - 1) * nq)
        add_rows("velocity", (N - 1) * nq)
        self.num_eq = self._row_count
        if not self.soft_distance:
            add_rows("phi", N * nc)
        add_rows("svel", N * 2 * nc)
        if not self.soft_friction:
            add_rows("cone", N * nc * self.K)
        if not self.soft_distance:
            add_rows("prod_dist", N * nc)
        add_rows("prod_slide", N * 2 * nc)
        if not self.soft_friction:
            add_rows("prod_cone", N * nc * self.K)
        self.num_rows = self._row_count
        self.eq_mask = np.zeros(self.num_rows, dtype=bool)
        self.eq_mask[: self.num_eq] = True

        # ---- Jacobian sparsity, fixed once ---------------------------
        # Families are (rows, cols, constant-data-or-fill-name); evaluate
        # concatenates the data arrays in registration order.
        self._fam_rows: list[np.ndarray] = []
        self._fam_cols: list[np.ndarray] = []
        self._fam_data: list[Optional[np.ndarray]] = []
        self._fam_fill: list[Optional[str]] = []

        def add_family(rows, cols, const=None, fill=None):
            rows = np.asarray(rows).ravel()
            cols = np.asarray(cols).ravel()
            if rows.shape != cols.shape:
                raise AssertionError("family index mismatch")
            self._fam_rows.append(rows.astype(np.int64))
            self._fam_cols.append(cols.astype(np.int64))
            self._fam_data.append(None if const is None else np.asarray(const, float).ravel())
            self._fam_fill.append(fill)

        def block_rows(name: str, width: int) -> np.ndarray:
            # row index repeated for each of `width` entries, raveled in the
            # same order as the (rows..., width) data arrays
            r = np.arange(self.row_slices[name].start, self.row_slices[name].stop)
            return np.repeat(r, width)

        Xi, Ui, LNi, LTi, Gi = L.X, L.U, L.LN, L.LT, L.G
        Qi, QDi = Xi[:, :nq], Xi[:, nq:]
        dt = spec.dt

        # boundary rows: identity on the first and last state blocks
        add_family(np.arange(nx), Xi[0], const=np.ones(nx))
        add_family(nx + np.arange(nx), Xi[-1], const=np.ones(nx))

        # configuration defects: +q_{i+1} - q_i - dt qdot_{i+1}
        cfg = block_rows("config", 1)
        add_family(cfg, Qi[1:], const=np.ones((N - 1) * nq))
        add_family(cfg, Qi[:-1], const=-np.ones((N - 1) * nq))
        add_family(cfg, QDi[1:], const=-dt * np.ones((N - 1) * nq))

        # velocity defects: dense nq x (...) blocks per interval
        vel_q = block_rows("velocity", nq)
        add_family(vel_q, np.broadcast_to(Qi[1:, None, :], (N - 1, nq, nq)), fill="vel_q")
        add_family(vel_q, np.broadcast_to(QDi[1:, None, :], (N - 1, nq, nq)), fill="vel_v")
        add_family(vel_q, np.broadcast_to(QDi[:-1, None, :], (N - 1, nq, nq)), fill="vel_vp")
        add_family(
            block_rows("velocity", nu),
            np.broadcast_to(Ui[1:, None, :], (N - 1, nq, nu)),
            const=np.broadcast_to(-dt * model.B, (N - 1, nq, nu)),
        )
        add_family(
            block_rows("velocity", nc),
            np.broadcast_to(LNi[1:, None, :], (N - 1, nq, nc)),
            fill="vel_lN",
        )
        add_family(
            block_rows("velocity", 2 * nc),
            np.broadcast_to(LTi[1:, None, :], (N - 1, nq, 2 * nc)),
            fill="vel_lT",
        )

        G2 = np.repeat(Gi, 2, axis=1)            # gamma column per sliding row
        LTe, LTo = LTi[:, 0::2], LTi[:, 1::2]    # +tangent / -tangent columns

        if not self.soft_distance:
            add_family(
                block_rows("phi", nq),
                np.broadcast_to(Qi[:, None, :], (N, nc, nq)),
                fill="phi_q",
            )
        add_family(block_rows("svel", 1), G2, const=np.ones(N * 2 * nc))
        add_family(
            block_rows("svel", nq),
            np.broadcast_to(QDi[:, None, :], (N, 2 * nc, nq)),
            fill="sv_qd",
        )
        add_family(
            block_rows("svel", nq),
            np.broadcast_to(Qi[:, None, :], (N, 2 * nc, nq)),
            fill="sv_q",
        )
        if not self.soft_friction:
            cone_cols = np.stack(
                [
                    np.broadcast_to(LNi[:, :, None], (N, nc, self.K)),
                    np.broadcast_to(LTe[:, :, None], (N, nc, self.K)),
                    np.broadcast_to(LTo[:, :, None], (N, nc, self.K)),
                ],
                axis=-1,
            )
            cone_data = np.empty((N, nc, self.K, 3))
            cone_data[..., 0] = self.mu_cone
            cone_data[..., 1] = -1.0
            cone_data[..., 2] = -1.0
            add_family(block_rows("cone", 3), cone_cols, const=cone_data)
        if not self.soft_distance:
            add_family(block_rows("prod_dist", 1), LNi, fill="pd_ln")
            add_family(
                block_rows("prod_dist", nq),
                np.broadcast_to(Qi[:, None, :], (N, nc, nq)),
                fill="pd_q",
            )
        add_family(block_rows("prod_slide", 1), LTi, fill="ps_lt")
        add_family(block_rows("prod_slide", 1), G2, fill="ps_g")
        add_family(
            block_rows("prod_slide", nq),
            np.broadcast_to(QDi[:, None, :], (N, 2 * nc, nq)),
            fill="ps_qd",
        )
        add_family(
            block_rows("prod_slide", nq),
            np.broadcast_to(Qi[:, None, :], (N, 2 * nc, nq)),
            fill="ps_q",
        )
        if not self.soft_friction:
            pc_cols = np.stack(
                [
                    np.broadcast_to(Gi[:, :, None], (N, nc, self.K)),
                    np.broadcast_to(LNi[:, :, None], (N, nc, self.K)),
                    np.broadcast_to(LTe[:, :, None], (N, nc, self.K)),
                    np.broadcast_to(LTo[:, :, None], (N, nc, self.K)),
                ],
                axis=-1,
            )
            add_family(block_rows("prod_cone", 4), pc_cols, fill="pc")
            if self.worst_case:
                pc_rows = block_rows("prod_cone", 1)
                add_family(
                    pc_rows,
                    np.full(pc_rows.shape, L.eps_index),
                    const=np.ones(pc_rows.shape[0]),
                )

        self._J_rows = np.concatenate(self._fam_rows)
        self._J_cols = np.concatenate(self._fam_cols)

        # ---- constraint curvature pattern ----------------------------
        # The product rows are bilinear, so sum_i r_i hess(c_i) has a fixed
        # sparsity over (force variable, partner) pairs.  One orientation is
        # stored; evaluation symmetrizes.  Entries whose coefficient depends
        # on the point reuse the Jacobian caches by fill name.
        self._H_rows: list[np.ndarray] = []
        self._H_cols: list[np.ndarray] = []
        self._H_src: list[np.ndarray] = []
        self._H_const: list[Optional[np.ndarray]] = []
        self._H_fill: list[Optional[str]] = []

        def add_curvature(rows, cols, src, const=None, fill=None):
            rows = np.asarray(rows).ravel().astype(np.int64)
            cols = np.asarray(cols).ravel().astype(np.int64)
            src = np.asarray(src).ravel().astype(np.int64)
            if not (rows.shape == cols.shape == src.shape):
                raise AssertionError("curvature index mismatch")
            self._H_rows.append(rows)
            self._H_cols.append(cols)
            self._H_src.append(src)
            self._H_const.append(None if const is None else np.asarray(const, float).ravel())
            self._H_fill.append(fill)

        if "prod_dist" in self.row_slices:
            add_curvature(
                np.broadcast_to(LNi[:, :, None], (N, nc, nq)),
                np.broadcast_to(Qi[:, None, :], (N, nc, nq)),
                block_rows("prod_dist", nq),
                fill="hd_q",
            )
        add_curvature(LTi, G2, block_rows("prod_slide", 1), const=-np.ones(N * 2 * nc))
        add_curvature(
            np.broadcast_to(LTi[:, :, None], (N, 2 * nc, nq)),
            np.broadcast_to(QDi[:, None, :], (N, 2 * nc, nq)),
            block_rows("prod_slide", nq),
            fill="hs_qd",
        )
        add_curvature(
            np.broadcast_to(LTi[:, :, None], (N, 2 * nc, nq)),
            np.broadcast_to(Qi[:, None, :], (N, 2 * nc, nq)),
            block_rows("prod_slide", nq),
            fill="hs_q",
        )
        if "prod_cone" in self.row_slices:
            K = self.K
            pcr = block_rows("prod_cone", 1)
            add_curvature(
                np.broadcast_to(Gi[:, :, None], (N, nc, K)),
                np.broadcast_to(LNi[:, :, None], (N, nc, K)),
                pcr,
                const=np.broadcast_to(-self.mu_cone, (N, nc, K)),
            )
            add_curvature(
                np.broadcast_to(Gi[:, :, None], (N, nc, K)),
                np.broadcast_to(LTe[:, :, None], (N, nc, K)),
                pcr,
                const=np.ones(N * nc * K),
            )
            add_curvature(
                np.broadcast_to(Gi[:, :, None], (N, nc, K)),
                np.broadcast_to(LTo[:, :, None], (N, nc, K)),
                pcr,
                const=np.ones(N * nc * K),
            )
        self._H_rows_cat = np.concatenate(self._H_rows)
        self._H_cols_cat = np.concatenate(self._H_cols)

        # Row-contracted curvature beyond the bilinear families: the velocity
        # defects' configuration dependence (mass matrix, bias, contact force)
        # and the pure second order of the contact-point kinematics in the
        # distance and sliding rows.  These sum contributions across whole
        # row blocks, so their values are computed from dedicated model
        # routines instead of per-row coefficients; only the index pattern is
        # fixed here.  Symmetric blocks are stored at half weight so the
        # final symmetrization restores them exactly.
        ex_rows: list[np.ndarray] = []
        ex_cols: list[np.ndarray] = []

        def add_extra(rows, cols, shape):
            ex_rows.append(np.broadcast_to(rows, shape).ravel().astype(np.int64))
            ex_cols.append(np.broadcast_to(cols, shape).ravel().astype(np.int64))

        Q1, QD1, QD0 = Qi[1:], QDi[1:], QDi[:-1]
        sq = (N - 1, nq, nq)
        add_extra(Q1[:, :, None], Q1[:, None, :], sq)     # velocity: q-q
        add_extra(QD1[:, :, None], Q1[:, None, :], sq)    # velocity: v1-q
        add_extra(QD0[:, :, None], Q1[:, None, :], sq)    # velocity: v0-q
        add_extra(QD1[:, :, None], QD1[:, None, :], sq)   # velocity: v1-v1
        add_extra(LNi[1:, :, None], Q1[:, None, :], (N - 1, nc, nq))
        add_extra(LTi[1:, :, None], Q1[:, None, :], (N - 1, 2 * nc, nq))
        if "phi" in self.row_slices:
            add_extra(Qi[:, None, :], Qi[:, None, :], (N, nc, nq))
        s2 = (N, 2 * nc, nq)
        add_extra(Qi[:, None, :], Qi[:, None, :], s2)     # sliding rows: q-q
        add_extra(QDi[:, None, :], Qi[:, None, :], s2)    # sliding rows: qd-q
        self._H_all_rows = np.concatenate([self._H_rows_cat] + ex_rows)
        self._H_all_cols = np.concatenate([self._H_cols_cat] + ex_cols)

    # ------------------------------------------------------------------
    # Evaluation
    # ------------------------------------------------------------------
    def set_relaxation(self, s: float) -> None:
        if s < 0:
            raise ValueError("relaxation must be nonnegative")
        self.relaxation = float(s)

    def _cache(self, w: np.ndarray) -> dict:
        spec, model, L = self.spec, self.spec.model, self.variable_layout
        nq, nc, N = self.nq, self.nc, spec.N
        dt = spec.dt
        X = w[L.X]
        q, qd = X[:, :nq], X[:, nq:]
        u = w[L.U]
        lamN, lamT, gam = w[L.LN], w[L.LT], w[L.G]
        eps = float(w[L.eps_index]) if L.has_eps else 0.0

        JN, JT = model.contact_jacobian(q)
        phibar = model.normal_distance(q) - self.height_shift
        tvel = np.einsum("itj,ij->it", JT, qd)
        cvel_jac = model.contact_velocity_jac(q, qd)
        tj = np.einsum("d,icdj->icj", model.terrain.tangent, cvel_jac)
        svel_jac = np.empty((N, 2 * nc, nq))
        svel_jac[:, 0::2] = tj
        svel_jac[:, 1::2] = -tj
        sv = np.repeat(gam, 2, axis=1) + tvel
        cone = (
            self.mu_cone[None, None, :] * lamN[:, :, None]
            - (lamT[:, 0::2] + lamT[:, 1::2])[:, :, None]
        )

        # interval quantities, all evaluated at the interval's right knot
        q1, qd1 = q[1:], qd[1:]
        dvel = qd[1:] - qd[:-1]
        M1 = model.mass_matrix(q1)
        C1 = model.bias_forces(q1, qd1)
        Cq1, Cv1 = model.bias_jacobians(q1, qd1)
        fw = lamN[1:, :, None] * model.terrain.eta + (
            (lamT[1:, 0::2] - lamT[1:, 1::2])[:, :, None] * model.terrain.tangent
        )
        Fjac1 = model.contact_force_jac(q1, fw)
        Mdv_jac = model.mass_matrix_prod_jac(q1, dvel)
        vel_defect = (
            np.einsum("ikj,ij->ik", M1, dvel)
            + dt * C1
            - dt * (u[1:] @ model.B.T)
            - dt * np.einsum("icj,ic->ij", JN[1:], lamN[1:])
            - dt * np.einsum("itj,it->ij", JT[1:], lamT[1:])
        )
        return {
            "w": w, "X": X, "q": q, "qd": qd, "u": u,
            "lamN": lamN, "lamT": lamT, "gam": gam, "eps": eps,
            "JN": JN, "JT": JT, "phibar": phibar, "sv": sv, "svel_jac": svel_jac,
            "cone": cone, "M1": M1, "Cq1": Cq1, "Cv1": Cv1, "fw": fw, "dvel": dvel,
            "Fjac1": Fjac1, "Mdv_jac": Mdv_jac, "vel_defect": vel_defect,
        }

    def _cost_from_cache(self, cache: dict) -> tuple[float, np.ndarray]:
        spec, L = self.spec, self.variable_layout
        unc = spec.uncertainty
        dt = spec.dt
        g = np.zeros(self.n)
        dx = cache["X"] - self._xf_vec
        u = cache["u"]
        f = 0.5 * dt * float(np.sum(dx * dx * spec.Q) + np.sum(u * u * spec.R))
        g[L.X] += dt * spec.Q * dx
        g[L.U] += dt * spec.R * u
        if spec.terminal_weight is not None:
            W = spec.terminal_weight
            f += 0.5 * float(dx[-1] @ (W * dx[-1]))
            g[L.X[-1]] += W * dx[-1]
        if self.soft_distance:
            beta = unc.beta
            z, mean = cache["lamN"], cache["phibar"]
            f += beta * float(np.sum(erm_min_sq_raw(z, mean, unc.height.sigma)))
            dz, dm, _ = erm_min_sq_grad_raw(z, mean, unc.height.sigma)
            g[L.LN] += beta * dz
            g[L.X[:, : self.nq]] += beta * np.einsum("ic,icj->ij", dm, cache["JN"])
        if self.soft_friction:
            beta = unc.beta
            lamN, lamT = cache["lamN"], cache["lamT"]
            mu_bar, sig_mu = unc.friction.mean, unc.friction.sigma
            z = cache["gam"]
            mean = mu_bar * lamN - lamT[:, 0::2] - lamT[:, 1::2]
            sigma = sig_mu * lamN
            f += beta * float(np.sum(erm_min_sq_raw(z, mean, sigma)))
            dz, dm, ds = erm_min_sq_grad_raw(z, mean, sigma)
            g[L.G] += beta * dz
            g[L.LN] += beta * (dm * mu_bar + ds * sig_mu)
            g[L.LT[:, 0::2]] += -beta * dm
            g[L.LT[:, 1::2]] += -beta * dm
        if self.worst_case:
            f += cache["eps"]
            g[L.eps_index] += 1.0
        return f, g

    def cost_hess_diag(self, w: np.ndarray) -> np.ndarray:
        """Diagonal PSD approximation of the cost Hessian.

        Exact for the quadratic running and terminal terms; the ERM terms
        contribute their chain-ruled second derivatives clamped at zero so
        the result stays positive semidefinite.
        """
        spec, L = self.spec, self.variable_layout
        unc = spec.uncertainty
        d = np.zeros(self.n)
        d[L.X] += spec.dt * spec.Q
        d[L.U] += spec.dt * spec.R
        if spec.terminal_weight is not None:
            d[L.X[-1]] += spec.terminal_weight
        if self.soft_distance or self.soft_friction:
            cache = self._cache(np.asarray(w, float))
            beta = unc.beta
            if self.soft_distance:
                z, mean = cache["lamN"], cache["phibar"]
                dzz, dmm, _, _ = erm_min_sq_curv_raw(z, mean, unc.height.sigma)
                d[L.LN] += beta * np.maximum(dzz, 0.0)
                d[L.X[:, : self.nq]] += beta * np.einsum(
                    "ic,icj->ij", np.maximum(dmm, 0.0), cache["JN"] ** 2
                )
            if self.soft_friction:
                lamN, lamT = cache["lamN"], cache["lamT"]
                mu_bar, sig_mu = unc.friction.mean, unc.friction.sigma
                mean = mu_bar * lamN - lamT[:, 0::2] - lamT[:, 1::2]
                sigma = sig_mu * lamN
                dzz, dmm, dss, dms = erm_min_sq_curv_raw(cache["gam"], mean, sigma)
                d[L.G] += beta * np.maximum(dzz, 0.0)
                along = dmm * mu_bar**2 + 2.0 * dms * mu_bar * sig_mu + dss * sig_mu**2
                d[L.LN] += beta * np.maximum(along, 0.0)
                d[L.LT[:, 0::2]] += beta * np.maximum(dmm, 0.0)
                d[L.LT[:, 1::2]] += beta * np.maximum(dmm, 0.0)
        return d

    def _constraint_values(self, cache: dict) -> np.ndarray:
        spec = self.spec
        s = self.relaxation
        c = np.empty(self.num_rows)
        sl = self.row_slices
        q, qd = cache["q"], cache["qd"]
        c[sl["boundary0"]] = cache["X"][0] - self._x0_vec
        c[sl["boundaryf"]] = cache["X"][-1] - self._xf_vec
        c[sl["config"]] = (q[1:] - q[:-1] - spec.dt * qd[1:]).ravel()
        c[sl["velocity"]] = cache["vel_defect"].ravel()
        lamN, lamT, gam = cache["lamN"], cache["lamT"], cache["gam"]
        if "phi" in sl:
            c[sl["phi"]] = cache["phibar"].ravel()
        c[sl["svel"]] = cache["sv"].ravel()
        if "cone" in sl:
            c[sl["cone"]] = cache["cone"].ravel()
        if "prod_dist" in sl:
            c[sl["prod_dist"]] = (s - lamN * cache["phibar"]).ravel()
        c[sl["prod_slide"]] = (s - lamT * cache["sv"]).ravel()
        if "prod_cone" in sl:
            cap = cache["eps"] if self.worst_case else s
            c[sl["prod_cone"]] = (cap - gam[:, :, None] * cache["cone"]).ravel()
        return c

    def _fill_data(self, name: str, cache: dict) -> np.ndarray:
        spec = self.spec
        dt = spec.dt
        if name == "vel_q":
            return cache["Mdv_jac"] + dt * cache["Cq1"] - dt * cache["Fjac1"]
        if name == "vel_v":
            return cache["M1"] + dt * cache["Cv1"]
        if name == "vel_vp":
            return -cache["M1"]
        if name == "vel_lN":
            return -dt * np.swapaxes(cache["JN"][1:], -1, -2)
        if name == "vel_lT":
            return -dt * np.swapaxes(cache["JT"][1:], -1, -2)
        if name == "phi_q":
            return cache["JN"]
        if name == "sv_qd":
            return cache["JT"]
        if name == "sv_q":
            return cache["svel_jac"]
        if name == "pd_ln":
            return -cache["phibar"]
        if name == "pd_q":
            return -cache["lamN"][:, :, None] * cache["JN"]
        if name == "ps_lt":
            return -cache["sv"]
        if name == "ps_g":
            return -cache["lamT"]
        if name == "ps_qd":
            return -cache["lamT"][:, :, None] * cache["JT"]
        if name == "ps_q":
            return -cache["lamT"][:, :, None] * cache["svel_jac"]
        if name == "pc":
            gam, cone = cache["gam"], cache["cone"]
            N, nc, K = cone.shape
            d = np.empty((N, nc, K, 4))
            d[..., 0] = -cone
            d[..., 1] = -gam[:, :, None] * self.mu_cone
            d[..., 2] = gam[:, :, None]
            d[..., 3] = gam[:, :, None]
            return d
        raise KeyError(name)

    def _curv_coef(self, name: str, cache: dict) -> np.ndarray:
        if name == "hd_q":
            return -cache["JN"]
        if name == "hs_qd":
            return -cache["JT"]
        if name == "hs_q":
            return -cache["svel_jac"]
        raise KeyError(name)

    def _extra_curvature(self, cache: dict, r: np.ndarray) -> list[np.ndarray]:
        """Row-contracted curvature data, ordered to match the extra index
        pattern registered in the constructor."""
        spec, model = self.spec, self.spec.model
        dt = spec.dt
        N, nq, nc = spec.N, self.nq, self.nc
        sl = self.row_slices
        rv = r[sl["velocity"]].reshape(N - 1, nq)
        q1, qd = cache["q"][1:], cache["qd"]
        JN, JT = cache["JN"], cache["JT"]
        amask = np.zeros(nq)
        amask[model.angle_coords] = 1.0
        Hm = model.mass_matrix_prod_hess(q1, cache["dvel"], rv)
        Hcq, Hcv, Hcvv = model.bias_hess(q1, qd[1:], rv)
        D = model.point_hess_diag(cache["q"])
        A = Hm + dt * Hcq
        # contact-force term: the generalized force's angle components come
        # back negated after two angle derivatives, leaving a pure diagonal
        gen = np.einsum("icj,ic->ij", JN[1:], cache["lamN"][1:]) + np.einsum(
            "iej,ie->ij", JT[1:], cache["lamT"][1:]
        )
        A[:, np.arange(nq), np.arange(nq)] += dt * rv * gen * amask
        P = model.mass_matrix_prod_jac(q1, rv)
        etaD = np.einsum("icjd,d->icj", D, model.terrain.eta)
        tanD = np.einsum("icjd,d->icj", D, model.terrain.tangent)
        sde = np.empty((N, 2 * nc, nq))
        sde[:, 0::2] = tanD
        sde[:, 1::2] = -tanD
        parts = [
            0.5 * A,
            P + dt * Hcv,
            -P,
            0.5 * dt * Hcvv,
            -dt * etaD[1:] * rv[:, None, :],
            -dt * sde[1:] * rv[:, None, :],
        ]
        if "phi" in sl:
            wd = r[sl["phi"]].reshape(N, nc)
            wd = wd - r[sl["prod_dist"]].reshape(N, nc) * cache["lamN"]
            parts.append(0.5 * wd[:, :, None] * etaD)
        ws = r[sl["svel"]].reshape(N, 2 * nc)
        ws = ws - r[sl["prod_slide"]].reshape(N, 2 * nc) * cache["lamT"]
        # like the force term, the rows of J_T reappear negated, so the
        # sliding rows' q-q diagonal reuses the Jacobian rather than the
        # point curvature
        parts.append(-0.5 * ws[:, :, None] * (JT * amask) * qd[:, None, :])
        parts.append(ws[:, :, None] * sde)
        return parts

    def constraint_hess(self, w: np.ndarray, r: np.ndarray) -> sp.csr_matrix:
        """Weighted constraint curvature sum_i r_i hess(c_i).

        Exact: the bilinear complementarity products contribute through the
        per-row coefficient families, and the velocity defects' and contact
        rows' configuration curvature through dedicated model routines.
        """
        cache = self._cache(np.asarray(w, float))
        parts = []
        for const, fill, src in zip(self._H_const, self._H_fill, self._H_src):
            coef = const if const is not None else self._curv_coef(fill, cache).ravel()
            parts.append(coef * r[src])
        parts.extend(x.ravel() for x in self._extra_curvature(cache, r))
        data = np.concatenate(parts)
        Hc = sp.coo_matrix(
            (data, (self._H_all_rows, self._H_all_cols)), shape=(self.n, self.n)
        ).tocsr()
        return Hc + Hc.T

    def _jacobian(self, cache: dict) -> sp.csr_matrix:
        parts = []
        for const, fill in zip(self._fam_data, self._fam_fill):
            if const is not None:
                parts.append(const)
            else:
                parts.append(self._fill_data(fill, cache).ravel())
        data = np.concatenate(parts)
        J = sp.coo_matrix(
            (data, (self._J_rows, self._J_cols)), shape=(self.num_rows, self.n)
        )
        return J.tocsr()

    def evaluate(self, w: np.ndarray) -> tuple[float, np.ndarray, np.ndarray, sp.csr_matrix]:
        """Cost, cost gradient, constraint values, constraint Jacobian."""
        cache = self._cache(np.asarray(w, float))
        f, g = self._cost_from_cache(cache)
        return f, g, self._constraint_values(cache), self._jacobian(cache)

    def cost(self, w: np.ndarray) -> tuple[float, np.ndarray]:
        cache = self._cache(np.asarray(w, float))
        return self._cost_from_cache(cache)

    def equality_constraints(self, w: np.ndarray) -> tuple[np.ndarray, sp.csr_matrix]:
        cache = self._cache(np.asarray(w, float))
        c = self._constraint_values(cache)
        J = self._jacobian(cache)
        return c[: self.num_eq], J[: self.num_eq]

    def inequality_constraints(self, w: np.ndarray) -> tuple[np.ndarray, sp.csr_matrix]:
        cache = self._cache(np.asarray(w, float))
        c = self._constraint_values(cache)
        J = self._jacobian(cache)
        return c[self.num_eq :], J[self.num_eq :]

    # ------------------------------------------------------------------
    # Solver interface
    # ------------------------------------------------------------------
    def initial_guess(self) -> np.ndarray:
        """Deterministic dynamics-informed start.

        Positions follow a cubic Hermite blend between the boundary states,
        interior velocities are the backward differences of that blend so
        the integration rows start consistent, normal forces share the
        weight at touching knots, tangential forces sit at the kinetic cone
        edge opposing the interpolated slide, and controls come from a
        least-squares inverse dynamics fit.
        """
        spec, L = self.spec, self.variable_layout
        model = spec.model
        N, nc, nq = spec.N, self.nc, self.nq
        dt = spec.dt
        alpha = np.linspace(0.0, 1.0, N)[:, None]
        q0, qd0 = self._x0_vec[:nq], self._x0_vec[nq:]
        qf, qdf = self._xf_vec[:nq], self._xf_vec[nq:]
        h00 = 2 * alpha**3 - 3 * alpha**2 + 1
        h10 = alpha**3 - 2 * alpha**2 + alpha
        h01 = -2 * alpha**3 + 3 * alpha**2
        h11 = alpha**3 - alpha**2
        states = np.empty((N, 2 * nq))
        states[:, :nq] = h00 * q0 + h10 * spec.T * qd0 + h01 * qf + h11 * spec.T * qdf
        q = states[:, :nq]
        self._project_clear(q)
        states[1:, nq:] = (q[1:] - q[:-1]) / dt
        states[0], states[-1] = self._x0_vec, self._xf_vec
        qd = states[:, nq:]

        phibar = model.normal_distance(q) - self.height_shift
        lamN = np.where(phibar <= 0.0, model.total_mass * model.gravity / nc, 0.0)
        JN, JT = model.contact_jacobian(q)
        tv = np.einsum("itj,ij->it", JT, qd)[:, 0::2]   # +tangent rate per contact
        gam = np.abs(tv)
        mu0 = float(self.mu_cone.mean())
        lamT = np.zeros((N, 2 * nc))
        lamT[:, 1::2] = np.where(tv > 1e-9, mu0 * lamN, 0.0)
        lamT[:, 0::2] = np.where(tv < -1e-9, mu0 * lamN, 0.0)

        controls = np.zeros((N, model.nu))
        M1 = model.mass_matrix(q[1:])
        C1 = model.bias_forces(q[1:], qd[1:])
        contact_gen = np.einsum("icj,ic->ij", JN[1:], lamN[1:]) + np.einsum(
            "itj,it->ij", JT[1:], lamT[1:]
        )
        rhs = np.einsum("ikj,ij->ik", M1, qd[1:] - qd[:-1]) / dt + C1 - contact_gen
        controls[1:] = rhs @ np.linalg.pinv(model.B).T
        return L.pack(states, controls, lamN, lamT, gam)

    def _project_clear(self, q: np.ndarray) -> None:
        """Reroute interpolated configurations that penetrate the terrain.

        When the straight configuration-space interpolation dives through
        the ground (a pendulum swinging below its track, for instance, with
        no collision-free path in the symmetric subspace the interpolation
        explores), the contact points are steered instead: each one follows
        a lifted arc between its boundary locations and damped
        least-squares inverse kinematics recovers the configurations,
        chained knot to knot so the path stays continuous.  A light pull
        toward the original interpolation pins coordinates the contact
        positions leave free.  No-op for guesses that are already clear.
        """
        model = self.spec.model
        if np.all(model.normal_distance(q) >= self.height_shift - 1e-12):
            return
        N = q.shape[0]
        interp = q.copy()
        p_interp = model.end_effector_positions(interp)
        depth = float((self.height_shift - p_interp[..., 1]).max())
        lift = 0.5 * depth
        floor = self.height_shift + lift * np.sin(np.pi * np.linspace(0.0, 1.0, N))
        w_reg = 0.1
        for i in range(1, N - 1):
            target = p_interp[i].copy()
            target[:, 1] = np.maximum(target[:, 1], floor[i])
            qi = q[i - 1].copy()
            for _ in range(40):
                p = model.end_effector_positions(qi[None])[0]
                r = (target - p).ravel()
                JN, JT = model.contact_jacobian(qi[None])
                Jp = np.empty((2 * p.shape[0], qi.size))
                Jp[0::2] = JT[0][0::2]
                Jp[1::2] = JN[0]
                g = Jp.T @ r + w_reg**2 * (interp[i] - qi)
                Hk = Jp.T @ Jp + (w_reg**2 + 1e-8) * np.eye(qi.size)
                dq = np.linalg.solve(Hk, g)
                nrm = float(np.linalg.norm(dq))
                if nrm > 0.5:
                    dq *= 0.5 / nrm
                qi = qi + dq
                if nrm < 1e-10:
                    break
            q[i] = qi
        # smoothing passes keep the reroute differentiable: pull interior
        # knots toward their neighbor averages, then restore clearance
        for _ in range(5):
            q[1:-1] += 0.5 * (0.5 * (q[:-2] + q[2:]) - q[1:-1])
            bad = np.flatnonzero(
                (model.normal_distance(q) < self.height_shift - 1e-10).any(axis=1)
            )
            for i in bad:
                qi = q[i]
                for _ in range(10):
                    phib = model.normal_distance(qi[None])[0] - self.height_shift
                    viol = phib < -1e-10
                    if not viol.any():
                        break
                    JN, _ = model.contact_jacobian(qi[None])
                    A = JN[0][viol]
                    b = -phib[viol]
                    AAt = A @ A.T + 1e-8 * np.eye(A.shape[0])
                    qi = qi + A.T @ np.linalg.solve(AAt, b)
                q[i] = qi

    def to_nlp(self, w0: Optional[np.ndarray] = None) -> NlpProblem:
        if w0 is None:
            w0 = self.initial_guess()
        return NlpProblem(
            n=self.n,
            cost=self.cost,
            x0=np.asarray(w0, float),
            constraints=lambda w: (
                self._constraint_values(c := self._cache(w)),
                self._jacobian(c),
            ),
            eq_mask=self.eq_mask,
            lower=self.lower,
            upper=self.upper,
            combined=self.evaluate,
            cost_hess_diag=self.cost_hess_diag,
            cons_hess=self.constraint_hess,
        )

    def violation(self, w: np.ndarray, relaxation: Optional[float] = None) -> float:
        """Worst constraint violation of the full row system at ``w``.

        ``relaxation`` temporarily overrides the current setting, so the
        zero-relaxation system can be checked regardless of solver state.
        """
        saved = self.relaxation
        if relaxation is not None:
            self.set_relaxation(relaxation)
        try:
            c = self._constraint_values(self._cache(np.asarray(w, float)))
        finally:
            self.set_relaxation(saved)
        v = np.where(self.eq_mask, np.abs(c), np.maximum(0.0, -c))
        return float(v.max())

    def polish_nlp(self, w: np.ndarray) -> NlpProblem:
        """Zero-relaxation system restricted to the active branches at ``w``.

        At zero relaxation every complementarity product row forces one
        member of a force/gap pair to vanish, so the feasible set is a
        union of corners and penalty methods lose their multiplier
        estimates on it.  This builds a regular NLP on the corner the
        point ``w`` indicates: the smaller member of each pair is pinned
        (gap rows become equalities, force-like variables get a zero upper
        bound) and the product rows drop to trivial zeros.  Any point
        feasible for the restriction satisfies the full zero-relaxation
        system with products exactly zero, so results should still be
        judged with :meth:`violation`.
        """
        if self.worst_case:
            raise ValueError(
                "the worst-case variant caps products with its own slack; "
                "branch polishing does not apply"
            )
        w = np.asarray(w, float)
        L = self.variable_layout
        cache = self._cache(w)
        sl = self.row_slices
        eq_mask = self.eq_mask.copy()
        upper = self.upper.copy()
        keep = np.ones(self.num_rows)

        def pin(rows_name, gap, force_val, force_cols):
            rows = np.arange(sl[rows_name].start, sl[rows_name].stop).reshape(gap.shape)
            gap_side = gap <= force_val
            eq_mask[rows[gap_side]] = True
            upper[force_cols[~gap_side]] = 0.0

        if "prod_dist" in sl:
            keep[sl["prod_dist"]] = 0.0
            pin("phi", cache["phibar"], cache["lamN"], L.LN)
        keep[sl["prod_slide"]] = 0.0
        pin("svel", cache["sv"], cache["lamT"], L.LT)
        if "prod_cone" in sl:
            keep[sl["prod_cone"]] = 0.0
            pin("cone", cache["cone"][:, :, 0], cache["gam"], L.G)

        mask = sp.diags(keep)

        def combined(x):
            f, g, c, J = self.evaluate(x)
            return f, g, c * keep, mask @ J

        return NlpProblem(
            n=self.n,
            cost=self.cost,
            x0=w,
            constraints=lambda x: combined(x)[2:],
            eq_mask=eq_mask,
            lower=self.lower,
            upper=upper,
            combined=combined,
            cost_hess_diag=self.cost_hess_diag,
            cons_hess=lambda x, r: self.constraint_hess(x, r * keep),
        )

    def trajectory(self, w: np.ndarray, metadata: Optional[dict] = None) -> Trajectory:
        spec = self.spec
        arrays = self.variable_layout.unpack(w)
        meta = dict(metadata or {})
        if self.worst_case:
            meta.setdefault("eps", arrays.eps)
        return Trajectory(
            times=np.linspace(0.0, spec.T, spec.N),
            states=arrays.states,
            controls=arrays.controls,
            lam_N=arrays.lam_N,
            lam_T=arrays.lam_T,
            gamma=arrays.gamma,
            solve_metadata=meta,
        )

    def complementarity_violation(self, w: np.ndarray) -> float:
        """Worst violation of the deterministic complementarity system at the
        mode's nominal parameters (means for the uncertainty-aware modes)."""
        spec = self.spec
        arrays = self.variable_layout.unpack(w)
        mu = float(self.mu_cone[0]) if self.K == 1 else spec.uncertainty.friction.mean
        worst = 0.0
        for i in range(spec.N):
            nq = self.nq
            state = PlanarState(arrays.states[i, :nq], arrays.states[i, nq:])
            cvars = ContactVars(arrays.lam_N[i], arrays.lam_T[i], arrays.gamma[i])
            pairs = contact_pairs(
                spec.model, state, cvars, mu=mu, height_offset=self.height_shift
            )
            worst = max(worst, max_complementarity_violation(pairs))
        return worst


def transcribe(spec: ProblemSpec) -> TranscribedProblem:
    """Assemble the NLP for a problem specification."""
    return TranscribedProblem(spec)


def plan(
    spec: ProblemSpec,
    options: Optional[SolveOptions] = None,
    schedule: tuple = RELAXATION_SCHEDULE,
    final_feas_tol: float = FINAL_FEAS_TOL,
    warm_start: Optional[Trajectory] = None,
) -> Trajectory:
    """Solve one trajectory optimization problem.

    Runs the relaxation schedule, warm-starting each stage (variables and
    multipliers) from the previous one.  ``warm_start`` seeds the first
    stage from an existing trajectory instead of the built-in guess.
    """
    # The complementarity product rows couple forces and gaps bilinearly;
    # with a soft initial penalty the multiplier estimates crawl and the
    # outer loop can stall on an infeasible plateau, so default to a stiff
    # starting penalty for these problems.
    base = options or SolveOptions(penalty0=1e5)
    problem = transcribe(spec)
    if warm_start is None:
        w = problem.initial_guess()
    else:
        L = problem.variable_layout
        if warm_start.N != spec.N:
            raise ValueError("warm start has the wrong number of knots")
        w = L.pack(
            warm_start.states,
            warm_start.controls,
            warm_start.lam_N,
            warm_start.lam_T,
            warm_start.gamma,
            eps=warm_start.solve_metadata.get("eps", 0.0),
        )
    lam = base.lam0
    stages = []
    total_inner = 0
    report: Optional[SolveReport] = None
    feas_val = np.inf
    for s in schedule:
        problem.set_relaxation(s)
        feas = final_feas_tol if s == 0.0 else base.feas_tol
        opts = replace(base, feas_tol=feas, lam0=lam)
        polished = s == 0.0 and not problem.worst_case
        if polished:
            # At zero relaxation the product rows are degenerate; solve the
            # branch restriction instead and judge it on the full system,
            # falling back to the plain solve if the branch guess was off.
            report = solve(problem.polish_nlp(w), opts)
            feas_val = problem.violation(report.x)
            if feas_val > feas:
                alt = solve(problem.to_nlp(w), opts)
                alt_feas = problem.violation(alt.x)
                if alt_feas < feas_val:
                    report, feas_val = alt, alt_feas
        else:
            report = solve(problem.to_nlp(w), opts)
            feas_val = report.feasibility
        w, lam = report.x, report.multipliers
        total_inner += report.inner_iters
        stages.append(
            {
                "relaxation": s,
                "status": report.status,
                "feasibility": feas_val,
                "stationarity": report.stationarity,
                "inner_iters": report.inner_iters,
                "cost": report.f,
                "polished": polished,
            }
        )
    meta = {
        "iterations": total_inner,
        "final_cost": report.f,
        "max_complementarity_violation": problem.complementarity_violation(w),
        "status": report.status,
        "feasibility": feas_val,
        "stationarity": report.stationarity,
        "converged": bool(feas_val <= final_feas_tol),
        "mode": spec.mode.variant,
        "stages": stages,
    }
    return problem.trajectory(w, meta)
