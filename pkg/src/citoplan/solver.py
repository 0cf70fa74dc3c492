"""Bound-constrained augmented Lagrangian solver.

General nonlinear programs

    min f(x)   s.t.  c_eq(x) = 0,  c_ineq(x) >= 0,  lower <= x <= upper

are solved by an augmented Lagrangian outer loop around a projected
quasi-Newton inner minimizer (L-BFGS-B).  Inequalities are converted to
equalities with nonnegative slack variables appended transparently to the
variable layout, so the inner subproblem is always a bound-constrained
minimization of

    f(x) - lam^T ctil(x, t) + (rho / 2) ||ctil(x, t)||^2

with ``ctil`` the slacked residual.  Multipliers follow the standard
first-order update; the penalty grows tenfold whenever an outer iteration
fails to cut the constraint violation in half.  Termination is "optimal"
when both feasibility and stationarity tolerances hold, or "feasible" when
the iterate is feasible but stationarity has stopped improving (typical
for stiffly penalized complementarity systems, where the multiplier noise
floor scales with the penalty).

The solver is deterministic: identical problems, options, and starting
points produce identical iterate sequences.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.optimize
import scipy.sparse as sp
import scipy.sparse.linalg


@dataclass
class NlpProblem:
    """A smooth NLP with analytic derivatives.

    ``cost(x) -> (f, grad)``.  ``constraints(x) -> (c, jac)`` with ``jac``
    a scipy sparse matrix; rows flagged True in ``eq_mask`` are equalities,
    the rest are ``c >= 0`` inequalities.  ``combined``, when provided,
    evaluates cost and constraints in one pass so shared intermediates are
    not recomputed.
    """

    n: int
    cost: Callable[[np.ndarray], tuple[float, np.ndarray]]
    x0: np.ndarray
    constraints: Optional[Callable[[np.ndarray], tuple[np.ndarray, sp.spmatrix]]] = None
    eq_mask: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    combined: Optional[
        Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray, sp.spmatrix]]
    ] = None
    # optional diagonal of the cost Hessian (any PSD approximation); the
    # Newton inner solver adds it to the Gauss-Newton penalty curvature
    cost_hess_diag: Optional[Callable[[np.ndarray], np.ndarray]] = None
    # optional weighted constraint curvature: cons_hess(x, r) returns the
    # symmetric matrix sum_i r_i * hess(c_i) at x, completing the Newton
    # model where the Gauss-Newton term misses bilinear constraint terms
    cons_hess: Optional[Callable[[np.ndarray, np.ndarray], sp.spmatrix]] = None

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.shape != (self.n,):
            raise ValueError("x0 has the wrong length")
        self.lower = (
            np.full(self.n, -np.inf) if self.lower is None else np.asarray(self.lower, float)
        )
        self.upper = (
            np.full(self.n, np.inf) if self.upper is None else np.asarray(self.upper, float)
        )
        if self.constraints is not None and self.eq_mask is None:
            raise ValueError("constrained problems need eq_mask")
        if self.eq_mask is not None:
            self.eq_mask = np.asarray(self.eq_mask, dtype=bool)

    def evaluate(self, x):
        """(f, grad, c, jac) with c and jac empty for unconstrained problems."""
        if self.combined is not None:
            return self.combined(x)
        f, g = self.cost(x)
        if self.constraints is None:
            return f, g, np.zeros(0), sp.csr_matrix((0, self.n))
        c, J = self.constraints(x)
        return f, g, c, J


@dataclass
class SolveOptions:
    feas_tol: float = 1e-6
    opt_tol: float = 1e-6
    max_iter: int = 3000          # total inner iterations across outer loops
    penalty0: float = 10.0
    penalty_growth: float = 10.0
    required_drop: float = 0.5    # violation must shrink by this factor
    max_penalty: float = 1e10
    max_outer: int = 50
    inner: str = "newton"         # "newton" (sparse Gauss-Newton) or "lbfgs"
    inner_cap: int = 60           # newton iterations per outer loop
    lbfgs_memory: int = 30
    multiplier_bound: float = 1e8
    lam0: Optional[np.ndarray] = None
    log_stream: Optional[io.TextIOBase] = None


@dataclass
class SolveReport:
    x: np.ndarray
    f: float
    feasibility: float
    stationarity: float
    status: str
    outer_iters: int
    inner_iters: int
    multipliers: np.ndarray
    history: list = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status == "optimal"


def _violation(c, eq_mask):
    if c.size == 0:
        return 0.0
    v = np.where(eq_mask, np.abs(c), np.maximum(0.0, -c))
    return float(v.max())


def solve(problem: NlpProblem, opts: SolveOptions | None = None) -> SolveReport:
    """Minimize the problem with an augmented Lagrangian strategy."""
    opts = opts or SolveOptions()
    x = np.clip(problem.x0, problem.lower, problem.upper)
    n = problem.n

    # Probe once to size the constraint system.
    f0, g0, c0, J0 = problem.evaluate(x)
    m = c0.size
    if m == 0:
        return _solve_unconstrained(problem, x, opts)

    eq_mask = problem.eq_mask
    ineq_idx = np.flatnonzero(~eq_mask)
    n_slack = ineq_idx.size

    lam = np.zeros(m) if opts.lam0 is None else np.asarray(opts.lam0, float).copy()
    rho = opts.penalty0

    # Slacked variable vector: [x, t].  Slacks start at the clipped residual
    # so feasible inequality rows begin with zero slacked violation.
    t = np.maximum(c0[ineq_idx], 0.0)
    lower = np.concatenate([problem.lower, np.zeros(n_slack)])
    upper = np.concatenate([problem.upper, np.full(n_slack, np.inf)])

    state = {"c": c0, "J": J0, "f": f0, "g": g0}

    # Slack columns of the slacked constraint Jacobian (fixed pattern).
    slack_cols = sp.csr_matrix(
        (-np.ones(n_slack), (ineq_idx, np.arange(n_slack))), shape=(m, n_slack)
    )

    def slacked(c, t):
        ctil = c.copy()
        ctil[ineq_idx] -= t
        return ctil

    def aug_fun(zt):
        x_ = zt[:n]
        t_ = zt[n:]
        f, g, c, J = problem.evaluate(x_)
        state.update(c=c, J=J, f=f, g=g)
        ctil = slacked(c, t_)
        r = rho * ctil - lam
        phi = f - lam @ ctil + 0.5 * rho * (ctil @ ctil)
        grad_x = g + J.T @ r
        grad_t = -r[ineq_idx]
        return phi, np.concatenate([grad_x, grad_t])

    total_inner = 0
    prev_viol = np.inf
    status = "max_iter"
    history = []
    feas = _violation(c0, eq_mask)
    stat = np.inf
    best_stat = np.inf
    feas_stall = 0
    unsolved_streak = 0

    for outer in range(opts.max_outer):
        budget = opts.max_iter - total_inner
        if budget <= 0:
            break
        gtol = max(opts.opt_tol * 0.5, min(1e-3, 0.1 * max(feas, 1e-12)))
        if opts.inner == "lbfgs":
            inner_max = int(min(10 * opts.inner_cap, max(50, budget)))
            res = scipy.optimize.minimize(
                aug_fun,
                np.concatenate([x, t]),
                jac=True,
                method="L-BFGS-B",
                bounds=list(zip(lower, upper)),
                options=dict(
                    maxiter=inner_max,
                    maxcor=opts.lbfgs_memory,
                    ftol=1e-16,
                    gtol=gtol,
                ),
            )
            nit = res.nit
            z = res.x
        elif opts.inner == "newton":
            inner_max = int(min(opts.inner_cap, max(5, budget)))
            z, nit = _newton_inner(
                problem,
                np.concatenate([x, t]),
                lam,
                rho,
                ineq_idx,
                slack_cols,
                lower,
                upper,
                gtol,
                inner_max,
                state,
            )
        else:
            raise ValueError(f"unknown inner solver {opts.inner!r}")
        total_inner += nit
        x = z[:n]
        t = z[n:]
        c, J = state["c"], state["J"]
        f, g = state["f"], state["g"]
        ctil = slacked(c, t)
        feas = _violation(c, eq_mask)

        # First-order multiplier update on the slacked residual.
        lam_new = np.clip(
            lam - rho * ctil, -opts.multiplier_bound, opts.multiplier_bound
        )
        # Inequality multipliers stay nonnegative (lam is the multiplier of
        # c - t = 0 with t >= 0; KKT gives lam >= 0 on those rows).
        lam_new[ineq_idx] = np.maximum(lam_new[ineq_idx], 0.0)

        # Projected gradient of the (ordinary) Lagrangian at the new
        # multipliers measures stationarity.
        grad_L = g - J.T @ lam_new
        pg = x - np.clip(x - grad_L, problem.lower, problem.upper)
        stat = float(np.abs(pg).max()) if pg.size else 0.0

        if opts.log_stream is not None:
            opts.log_stream.write(
                f"{outer},{nit},{f:.17g},{feas:.6e},{stat:.6e},{rho:.3e}\n"
            )
        history.append((outer, nit, f, feas, stat, rho))

        if feas <= opts.feas_tol and stat <= opts.opt_tol:
            lam = lam_new
            status = "optimal"
            break

        # Once feasible, keep iterating only while stationarity improves.
        # Heavily penalized complementarity products leave a noise floor in
        # the multiplier estimates, so a feasible point whose stationarity
        # has plateaued is the practical endpoint of this method.
        if feas <= opts.feas_tol:
            if stat < 0.5 * best_stat:
                best_stat = stat
                feas_stall = 0
            else:
                feas_stall += 1
            if feas_stall >= 3:
                lam = lam_new
                status = "feasible"
                break

        # Judge progress only when the subproblem was solved to its tolerance
        # (or has had a fair share of budget): multiplier estimates taken from
        # an unconverged inner solve random-walk, and escalating the penalty
        # on top of that compounds the damage.
        slack_viol = float(np.abs(ctil).max()) if ctil.size else 0.0
        solved = nit < inner_max
        if solved or unsolved_streak >= 2:
            lam = lam_new
            if slack_viol > opts.required_drop * prev_viol:
                rho = min(rho * opts.penalty_growth, opts.max_penalty)
            prev_viol = max(slack_viol, 1e-16)
            unsolved_streak = 0
        else:
            unsolved_streak += 1

        if total_inner >= opts.max_iter:
            break

    return SolveReport(
        x=x,
        f=float(state["f"]),
        feasibility=feas,
        stationarity=stat,
        status=status,
        outer_iters=len(history),
        inner_iters=total_inner,
        multipliers=lam,
        history=history,
    )


def _newton_inner(
    problem, z0, lam, rho, ineq_idx, slack_cols, lower, upper, gtol, max_nit, state
):
    """Projected Newton minimization of the augmented Lagrangian subproblem.

    Variables are z = [x, slacks].  The Hessian is approximated by the
    cost-curvature diagonal plus the Gauss-Newton penalty term
    rho * Jtil^T Jtil, which is rank-deficient whenever the penalty rows
    leave free directions uncovered, so a Levenberg damping term is added
    and adapted on line-search feedback: rejected or heavily backtracked
    steps raise it, full steps shrink it.  Active-bound variables take
    scaled gradient steps inside the projected Armijo line search.  On
    return ``state`` holds the problem evaluation at the returned point.
    """
    n = problem.n
    z = z0.copy()
    f, g, c, J = problem.evaluate(z[:n])
    nit = 0
    lm = 1e-6  # relative Levenberg damping
    bb = 0.0  # secant estimate of cost curvature when no callback is given

    def assemble(f, g, c, t):
        ctil = slacked_residual(c, t, ineq_idx)
        r = rho * ctil - lam
        phi = f - lam @ ctil + 0.5 * rho * (ctil @ ctil)
        return phi, ctil, r

    while True:
        t = z[n:]
        phi, ctil, r = assemble(f, g, c, t)
        Jt = sp.hstack([J, slack_cols], format="csr")
        grad = np.empty(z.size)
        grad[:n] = g + J.T @ r
        grad[n:] = -r[ineq_idx]
        pg = z - np.clip(z - grad, lower, upper)
        if (np.abs(pg).max() if pg.size else 0.0) <= gtol or nit >= max_nit:
            break
        nit += 1

        diag = np.zeros(z.size)
        if problem.cost_hess_diag is not None:
            diag[:n] = np.maximum(problem.cost_hess_diag(z[:n]), 0.0)
        else:
            diag[:n] = bb
        H = (sp.diags(diag) + rho * (Jt.T @ Jt)).tocsr()
        if problem.cons_hess is not None:
            Hc = problem.cons_hess(z[:n], r)
            pad = sp.csr_matrix((z.size - n, z.size - n))
            H = (H + sp.block_diag((Hc, pad), format="csr")).tocsr()
        Hd = H.diagonal()
        scale = max(1.0, float(Hd.max())) if Hd.size else 1.0

        # Bertsekas-style working set: the bound band shrinks with the
        # projected gradient so the active set settles near a solution.
        band = min(1e-6, float(np.abs(pg).max())) if pg.size else 1e-6
        at_lower = (z <= lower + band) & (grad > 0)
        at_upper = (z >= upper - band) & (grad < 0)
        free = ~(at_lower | at_upper)
        fidx = np.flatnonzero(free)
        aidx = np.flatnonzero(~free)

        accepted = False
        alpha = 0.0
        for _ in range(12):
            damp = lm * scale
            p = np.zeros(z.size)
            if fidx.size:
                Hff = (H[fidx][:, fidx] + damp * sp.identity(fidx.size)).tocsc()
                step = None
                try:
                    cand = sp.linalg.splu(Hff).solve(-grad[fidx])
                    if np.all(np.isfinite(cand)) and cand @ grad[fidx] < 0.0:
                        step = cand
                except RuntimeError:
                    step = None
                if step is None:
                    # singular or indefinite at this damping: damp harder
                    lm = min(lm * 30.0, 1e10)
                    continue
                p[fidx] = step
            p[aidx] = -grad[aidx] / (np.maximum(Hd[aidx], 0.0) + damp)

            alpha = 1.0
            for _ in range(20):
                z_c = np.clip(z + alpha * p, lower, upper)
                dz = z_c - z
                direction = grad @ dz
                if direction < 0.0:
                    f_c, g_c, c_c, J_c = problem.evaluate(z_c[:n])
                    phi_c, _, _ = assemble(f_c, g_c, c_c, z_c[n:])
                    if phi_c <= phi + 1e-4 * direction:
                        dx = z_c[:n] - z[:n]
                        den = float(dx @ dx)
                        num = float((g_c - g) @ dx)
                        if den > 0.0 and num > 0.0:
                            bb = num / den
                        z, f, g, c, J = z_c, f_c, g_c, c_c, J_c
                        accepted = True
                        break
                alpha *= 0.5
            if accepted:
                break
            lm = min(lm * 30.0, 1e10)
        if not accepted:
            break  # numerically stationary: no descent even under heavy damping
        if alpha >= 1.0:
            lm = max(lm * 0.25, 1e-9)
        elif alpha < 0.25:
            lm = min(lm * 10.0, 1e10)

    state.update(f=f, g=g, c=c, J=J)
    return z, nit


def slacked_residual(c, t, ineq_idx):
    ctil = c.copy()
    ctil[ineq_idx] -= t
    return ctil


def _solve_unconstrained(problem, x, opts):
    res = scipy.optimize.minimize(
        problem.cost,
        x,
        jac=True,
        method="L-BFGS-B",
        bounds=list(zip(problem.lower, problem.upper)),
        options=dict(
            maxiter=opts.max_iter,
            maxcor=opts.lbfgs_memory,
            ftol=1e-16,
            gtol=opts.opt_tol * 0.1,
        ),
    )
    f, g = problem.cost(res.x)
    pg = res.x - np.clip(res.x - g, problem.lower, problem.upper)
    stat = float(np.abs(pg).max())
    return SolveReport(
        x=res.x,
        f=float(f),
        feasibility=0.0,
        stationarity=stat,
        status="optimal" if stat <= opts.opt_tol * 10 or res.success else "max_iter",
        outer_iters=1,
        inner_iters=res.nit,
        multipliers=np.zeros(0),
        history=[(0, res.nit, float(f), 0.0, stat, 0.0)],
    )


# ----------------------------------------------------------------------
# Derivative checking
# ----------------------------------------------------------------------
@dataclass
class DerivativeReport:
    max_gradient_error: float
    max_jacobian_error: float
    bad_gradient_entries: list
    bad_jacobian_entries: list
    threshold: float

    @property
    def ok(self) -> bool:
        return (
            self.max_gradient_error < self.threshold
            and self.max_jacobian_error < self.threshold
        )


def check_derivatives(
    problem: NlpProblem, x=None, step: float = 1e-6, threshold: float = 1e-4
) -> DerivativeReport:
    """Compare analytic gradient and Jacobian against central differences.

    Dense comparison, intended for desk-sized problems and spot checks of
    transcriptions at the initial guess.  Relative error uses a unit floor
    so entries near zero are compared absolutely.
    """
    x = problem.x0 if x is None else np.asarray(x, dtype=float)
    _, g, _, J = problem.evaluate(x)
    J = sp.csr_matrix(J).toarray() if J.shape[0] else np.zeros((0, problem.n))

    g_fd = np.zeros_like(g)
    J_fd = np.zeros_like(J)
    for i in range(problem.n):
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        fp, _, cp, _ = problem.evaluate(xp)
        fm, _, cm, _ = problem.evaluate(xm)
        g_fd[i] = (fp - fm) / (2 * step)
        if J.shape[0]:
            J_fd[:, i] = (cp - cm) / (2 * step)

    def rel(a, b):
        return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))

    g_err = rel(g, g_fd)
    bad_g = [(int(i), float(g_err[i])) for i in np.flatnonzero(g_err >= threshold)]
    if J.shape[0]:
        J_err = rel(J, J_fd)
        bad_J = [
            (int(r), int(c), float(J_err[r, c]))
            for r, c in zip(*np.nonzero(J_err >= threshold))
        ]
        max_J = float(J_err.max())
    else:
        bad_J = []
        max_J = 0.0
    return DerivativeReport(
        max_gradient_error=float(g_err.max()) if g_err.size else 0.0,
        max_jacobian_error=max_J,
        bad_gradient_entries=bad_g,
        bad_jacobian_entries=bad_J,
        threshold=threshold,
    )
