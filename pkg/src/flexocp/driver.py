"""Two-phase solve loop, refinement policy, and study sweeps.

Phase 1 repeatedly minimises the integrated dynamics residual, growing
the mesh (or, when the quadrature-error check fails, the quadrature
order) until the residual drops below the requested tolerance.  Phase 2
then minimises the actual cost subject to a residual budget at that
tolerance, warm-started from the feasible phase-1 point.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from . import ad, basis as _basis, mesh as _mesh, nlp as _nlp
from .mesh import DecisionVector, FlexMesh, Trajectory, uniform_mesh, warm_start_expand
from .ocp import OcpProblem
from .quadrature import QuadRule, gauss_legendre, quad_error_estimate
from .transcription import TranscribedNlp, build_cost_nlp, build_residual_nlp


@dataclass
class SolverConfig:
    """Knobs for the refinement loop and the NLP solves."""

    eps_tol: float = 1e-8
    eps_quad_tol: Optional[float] = None  # default: 1e-2 * eps_tol
    n_intervals: int = 5
    state_degree: int = 2
    input_degree: int = 1
    quad_order: int = 3
    flexibility: float = 0.5
    mesh_mode: str = "flexible"  # or "fixed"
    growth_n: int = 2
    growth_q: int = 2
    max_rounds: int = 8  # refinement rounds after the initial solve
    nlp_tol: float = 1e-10
    nlp_max_iter: int = 3000
    hessian_mode: str = "exact"
    residual_hessian: str = "gauss_newton"
    log_dir: Optional[str] = None

    def __post_init__(self):
        if self.eps_tol <= 0:
            raise ValueError("eps_tol must be positive")
        if self.eps_quad_tol is None:
            self.eps_quad_tol = 1e-2 * self.eps_tol
        if self.eps_quad_tol <= 0:
            raise ValueError("eps_quad_tol must be positive")
        if self.n_intervals < 1 or self.quad_order < 1:
            raise ValueError("need at least one interval and quadrature point")
        if self.mesh_mode not in ("flexible", "fixed"):
            raise ValueError("mesh_mode must be 'flexible' or 'fixed'")


@dataclass
class RoundRecord:
    n_intervals: int
    quad_order: int
    eps_r: float
    eps_q: float
    gate_passed: bool
    grew: Optional[str]  # "N", "Q" or None on the final round
    nlp_status: str
    nlp_iterations: int
    wall_time: float


@dataclass
class SolveReport:
    termination: str  # "success" | "tolerance_not_reached" | "nlp_failure"
    rounds: list
    phase1_residual: Optional[float]
    phase2_cost: Optional[float]
    phase2_status: Optional[str]
    final_residual: Optional[float]
    final_residual_check: Optional[float]  # recomputed at doubled order
    evaluated_cost: Optional[float]
    solution: Optional[dict]  # serialized mesh + decision vector
    wall_time: float

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rounds"] = [asdict(r) for r in self.rounds]
        return out


def _boundary_guess(problem: OcpProblem):
    """Endpoint states that approximately satisfy the boundary equalities.

    A few damped Gauss-Newton steps on |boundary_eq|^2 over (x0, xf);
    exact for affine boundary constraints, merely a reasonable seed
    otherwise.  Without equality constraints, returns zeros.
    """
    nx = problem.n_x
    if not problem.n_e:
        return np.zeros(nx), np.zeros(nx)

    def rows(v):
        x0 = [v[m] for m in range(nx)]
        xf = [v[nx + m] for m in range(nx)]
        return ad.concat(list(problem.boundary_eq(x0, xf, problem.t0, problem.tf)),
                         width=v.width if isinstance(v, ad.Dual) else None)

    v = np.zeros(2 * nx)
    for _ in range(50):
        r = np.atleast_1d(np.asarray(ad.value(rows(v)), dtype=float))
        if np.max(np.abs(r)) < 1e-12:
            break
        J = ad.jacobian(lambda vd: rows(vd), v)
        step = np.linalg.lstsq(J.T @ J + 1e-10 * np.eye(2 * nx), -(J.T @ r), rcond=None)[0]
        v = v + step
        if np.max(np.abs(step)) < 1e-14:
            break
    return v[:nx], v[nx:]


def initial_guess(problem: OcpProblem, mesh: FlexMesh) -> DecisionVector:
    """States interpolate the boundary guess linearly; inputs start at zero."""
    x0, xf = _boundary_guess(problem)
    n, a, b = mesh.n_intervals, mesh.state_degree, mesh.input_degree
    t_sup = _mesh.support_times(mesh.nodes[:-1], mesh.nodes[1:],
                                _basis.chebyshev2_nodes(a))
    frac = (t_sup - problem.t0) / (problem.tf - problem.t0)
    states = x0[None, None, :] + frac[:, :, None] * (xf - x0)[None, None, :]
    inputs = np.zeros((n, b + 1, problem.n_u)) if problem.n_u else None
    return _mesh.pack(mesh, states, inputs)


def _solve_transcribed(tr: TranscribedNlp, z0: np.ndarray, config: SolverConfig,
                       log_path=None, iterate_callback=None) -> _nlp.NlpResult:
    lb, ub = tr.var_bounds
    spec = _nlp.NlpSpec(
        n_vars=tr.n_vars, objective=tr.objective,
        eq=tr.eq_constraints if tr.n_eq else None,
        ineq=tr.ineq_constraints if tr.n_ineq else None,
        lb=lb, ub=ub, z0=z0,
        grad_objective=tr.grad_objective, jac_eq=tr.jac_eq, jac_ineq=tr.jac_ineq,
        lagrangian_hessian=tr.lagrangian_hessian, linear_ineq=tr.linear_ineq,
    )
    return _nlp.solve(spec, tol=config.nlp_tol, max_iter=config.nlp_max_iter,
                      hessian_mode=config.hessian_mode, log_path=log_path,
                      iterate_callback=iterate_callback)


def solve_ocp(problem: OcpProblem, config: SolverConfig,
              z0: DecisionVector | None = None) -> SolveReport:
    """Run the full feasibility-then-optimality pipeline."""
    t_start = time.perf_counter()
    fixed = config.mesh_mode == "fixed"
    n_cur = config.n_intervals
    q_cur = config.quad_order
    mesh = uniform_mesh(problem.t0, problem.tf, n_cur, config.state_degree,
                        config.input_degree, config.flexibility)
    dv = initial_guess(problem, mesh) if z0 is None else z0

    rounds: list[RoundRecord] = []
    best_eps = np.inf
    best_dv, best_mesh, best_rule = None, None, None
    termination = "tolerance_not_reached"

    for round_idx in range(config.max_rounds + 1):
        rule = gauss_legendre(q_cur)
        tr = build_residual_nlp(problem, mesh, rule, fixed_mesh=fixed,
                                residual_hessian=config.residual_hessian)
        t0 = time.perf_counter()
        res = _solve_transcribed(tr, dv.data, config)
        wall = time.perf_counter() - t0
        z_star = res.z
        eps_r = tr.residual_value(z_star)
        eps_q = quad_error_estimate(tr, z_star, gauss_legendre(config.growth_q * q_cur))
        gate = eps_q <= config.eps_quad_tol
        dv = DecisionVector(z_star, tr.layout)

        if gate and eps_r < best_eps:
            best_eps, best_dv, best_mesh, best_rule = eps_r, dv, mesh, rule

        done = gate and eps_r <= config.eps_tol
        out_of_budget = round_idx == config.max_rounds
        grew = None
        if not done and not out_of_budget:
            grew = "N" if gate else "Q"
        rounds.append(RoundRecord(n_cur, q_cur, eps_r, eps_q, gate, grew,
                                  res.status.value, res.iterations, wall))
        if done:
            termination = "success"
            break
        if out_of_budget:
            break
        if gate:
            n_new = config.growth_n * n_cur
            mesh_new = uniform_mesh(problem.t0, problem.tf, n_new, config.state_degree,
                                    config.input_degree, config.flexibility)
            dv = warm_start_expand(dv, mesh, mesh_new)
            mesh, n_cur = mesh_new, n_new
        else:
            q_cur = config.growth_q * q_cur
            # same mesh: previous solution warm-starts the higher-order solve

    if best_dv is None:
        # no round passed the quadrature gate; fall back to the last iterate
        best_dv, best_mesh, best_rule = dv, mesh, gauss_legendre(q_cur)
        best_eps = rounds[-1].eps_r if rounds else np.inf

    phase1_residual = best_eps if np.isfinite(best_eps) else None
    phase2_cost = None
    phase2_status = None
    final_dv = best_dv
    if termination == "success":
        tr_cost = build_cost_nlp(problem, best_mesh, best_rule, config.eps_tol,
                                 fixed_mesh=fixed,
                                 residual_hessian=config.residual_hessian)
        res2 = _solve_transcribed(tr_cost, best_dv.data, config)
        phase2_status = res2.status.value
        # a stalled phase-2 iterate is still usable when it is feasible; the
        # stall typically means the cost/budget scales hit the float floor
        feasible = max(res2.eq_violation, res2.ineq_violation) <= 1e2 * config.nlp_tol
        if res2.status in (_nlp.NlpStatus.CONVERGED, _nlp.NlpStatus.MAX_ITER) or feasible:
            phase2_cost = float(ad.value(tr_cost.objective(res2.z)))
            final_dv = DecisionVector(res2.z, tr_cost.layout)
        else:
            termination = "nlp_failure"

    tr_final = build_residual_nlp(problem, best_mesh, best_rule, fixed_mesh=fixed)
    final_residual = tr_final.residual_value(final_dv.data)
    final_check = tr_final.residual_value(final_dv.data,
                                          rule=gauss_legendre(config.growth_q * best_rule.order))
    cost_eval = build_cost_nlp(problem, best_mesh, best_rule, config.eps_tol,
                               fixed_mesh=fixed)
    evaluated_cost = float(ad.value(cost_eval.objective(final_dv.data)))

    return SolveReport(
        termination=termination,
        rounds=rounds,
        phase1_residual=phase1_residual,
        phase2_cost=phase2_cost,
        phase2_status=phase2_status,
        final_residual=float(final_residual),
        final_residual_check=float(final_check),
        evaluated_cost=evaluated_cost,
        solution=_mesh.decision_to_dict(final_dv),
        wall_time=time.perf_counter() - t_start,
    )


# ---------------------------------------------------------------------------
# studies


def convergence_study(problem: OcpProblem, config: SolverConfig, n_list) -> list[dict]:
    """Minimum residual against mesh size, for movable and fixed nodes.

    Each cell solves the residual problem once at the configured
    degrees/order; within a mode the previous solution warm-starts the
    next mesh.  NLP failures are recorded per cell and do not abort the
    sweep.
    """
    records = []
    for mode in ("flexible", "fixed"):
        fixed = mode == "fixed"
        dv_prev, mesh_prev = None, None
        for n in n_list:
            mesh = uniform_mesh(problem.t0, problem.tf, int(n), config.state_degree,
                                config.input_degree, config.flexibility)
            if dv_prev is None:
                dv = initial_guess(problem, mesh)
            else:
                dv = warm_start_expand(dv_prev, mesh_prev, mesh)
            rule = gauss_legendre(config.quad_order)
            tr = build_residual_nlp(problem, mesh, rule, fixed_mesh=fixed,
                                    residual_hessian=config.residual_hessian)
            t0 = time.perf_counter()
            try:
                res = _solve_transcribed(tr, dv.data, config)
                eps_r = tr.residual_value(res.z)
                status = res.status.value
                dv_prev = DecisionVector(res.z, tr.layout)
                mesh_prev = mesh
            except Exception as err:  # keep sweeping
                eps_r, status = np.nan, f"error: {err}"
            records.append({"mode": mode, "n_intervals": int(n), "eps_r": float(eps_r),
                            "status": status, "wall_time": time.perf_counter() - t0})
    return records


def fit_slope(n_values, eps_values, plateau_ratio: float = 0.9) -> float:
    """Least-squares slope of log(eps) vs log(1/N), excluding the plateau.

    Trailing points whose improvement over the previous point is less
    than 10% (ratio > plateau_ratio) are dropped before fitting.
    """
    n = np.asarray(n_values, dtype=float)
    e = np.asarray(eps_values, dtype=float)
    keep = len(e)
    while keep > 2 and e[keep - 1] > plateau_ratio * e[keep - 2]:
        keep -= 1
    x = np.log(1.0 / n[:keep])
    yv = np.log(e[:keep])
    A = np.vstack([x, np.ones_like(x)]).T
    slope, _ = np.linalg.lstsq(A, yv, rcond=None)[0]
    return float(slope)


def pareto_sweep(problem: OcpProblem, config: SolverConfig, eps_list) -> dict:
    """Cost against residual budget at fixed mesh parameters.

    Phase 1 runs once and must reach the tightest budget; each budget is
    then solved warm-started from its tighter neighbour (tight to
    loose), which makes the recorded costs structurally monotone.  The
    phase-1 point itself is recorded with its cost evaluated, not
    optimised.
    """
    eps_list = sorted(float(e) for e in eps_list)
    fixed = config.mesh_mode == "fixed"
    mesh = uniform_mesh(problem.t0, problem.tf, config.n_intervals, config.state_degree,
                        config.input_degree, config.flexibility)
    rule = gauss_legendre(config.quad_order)
    tr_res = build_residual_nlp(problem, mesh, rule, fixed_mesh=fixed,
                                residual_hessian=config.residual_hessian)
    dv = initial_guess(problem, mesh)
    res1 = _solve_transcribed(tr_res, dv.data, config)
    eps1 = tr_res.residual_value(res1.z)

    cost_eval = build_cost_nlp(problem, mesh, rule, 1.0, fixed_mesh=fixed)
    feas_point = {
        "eps_r": float(eps1),
        "cost": float(ad.value(cost_eval.objective(res1.z))),
        "status": res1.status.value,
    }

    points = []
    z_prev = res1.z
    for eps_tol in eps_list:
        if eps1 > eps_tol:
            points.append({"eps_tol": eps_tol, "eps_r": np.nan, "cost": np.nan,
                           "status": "budget_unreachable"})
            continue
        tr_cost = build_cost_nlp(problem, mesh, rule, eps_tol, fixed_mesh=fixed,
                                 residual_hessian=config.residual_hessian)
        try:
            res = _solve_transcribed(tr_cost, z_prev, config)
            cost = float(ad.value(tr_cost.objective(res.z)))
            points.append({"eps_tol": eps_tol, "eps_r": float(tr_res.residual_value(res.z)),
                           "cost": cost, "status": res.status.value})
            z_prev = res.z
        except Exception as err:
            points.append({"eps_tol": eps_tol, "eps_r": np.nan, "cost": np.nan,
                           "status": f"error: {err}"})
    return {"feasible_point": feas_point, "points": points}
