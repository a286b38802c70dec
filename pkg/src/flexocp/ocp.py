"""Continuous-time optimal control problems in Bolza form.

A problem couples dynamics equations F(xdot, x, u, t) = 0, path
inequalities G(xdot, x, u, t) <= 0, boundary constraints on the
endpoint states, and a cost made of a boundary (Mayer) term plus an
integral (Lagrange) term, all on a fixed horizon [t0, tf].

Evaluators receive their vector arguments as sequences of per-component
scalars and must be written with elementwise arithmetic only: they are
called with plain floats, numpy arrays (batched over many time points at
once) and dual numbers interchangeably, and must not branch on values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class OcpProblem:
    """Bolza-form optimal control problem on a fixed horizon."""

    n_x: int
    n_u: int
    n_f: int
    t0: float
    tf: float
    dynamics: Callable
    n_g: int = 0
    n_e: int = 0
    n_i: int = 0
    path_ineq: Optional[Callable] = None
    boundary_eq: Optional[Callable] = None
    boundary_ineq: Optional[Callable] = None
    mayer: Optional[Callable] = None
    lagrange: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        if self.n_x < 1 or self.n_f < 1:
            raise ValueError("need at least one state and one dynamics equation")
        if self.n_u < 0:
            raise ValueError("n_u must be non-negative")
        if not self.tf > self.t0:
            raise ValueError("tf must exceed t0")


def _probe_len(fn, args, expected, label, diagnostics):
    try:
        out = fn(*args)
    except Exception as err:  # evaluator itself is broken
        diagnostics.append(f"{label}: probe evaluation failed ({err})")
        return
    try:
        actual = len(out)
    except TypeError:
        actual = 1
    if actual != expected:
        diagnostics.append(f"{label}: expected {expected} outputs, got {actual}")


def validate(problem: OcpProblem) -> list[str]:
    """Probe every evaluator at zero states/inputs and t0.

    Returns a list of human-readable diagnostics, one per mismatch
    between a declared dimension and the evaluator's output length;
    empty when everything is consistent.
    """
    diags: list[str] = []
    zx = [0.0] * problem.n_x
    zu = [0.0] * problem.n_u
    t = problem.t0
    _probe_len(problem.dynamics, (zx, zx, zu, t), problem.n_f, "dynamics", diags)
    if problem.n_g or problem.path_ineq is not None:
        if problem.path_ineq is None:
            diags.append(f"path_ineq: declared n_g={problem.n_g} but evaluator missing")
        else:
            _probe_len(problem.path_ineq, (zx, zx, zu, t), problem.n_g, "path_ineq", diags)
    if problem.n_e or problem.boundary_eq is not None:
        if problem.boundary_eq is None:
            diags.append(f"boundary_eq: declared n_e={problem.n_e} but evaluator missing")
        else:
            _probe_len(problem.boundary_eq, (zx, zx, t, problem.tf), problem.n_e, "boundary_eq", diags)
    if problem.n_i or problem.boundary_ineq is not None:
        if problem.boundary_ineq is None:
            diags.append(f"boundary_ineq: declared n_i={problem.n_i} but evaluator missing")
        else:
            _probe_len(problem.boundary_ineq, (zx, zx, t, problem.tf), problem.n_i, "boundary_ineq", diags)
    for label, fn in (("mayer", problem.mayer), ("lagrange", problem.lagrange)):
        if fn is None:
            continue
        args = (zx, zx, t, problem.tf) if label == "mayer" else (zx, zu, t)
        try:
            out = fn(*args)
            np.asarray(out, dtype=float).reshape(())
        except Exception:
            diags.append(f"{label}: expected a scalar output")
    return diags


def fuller_problem() -> OcpProblem:
    """Double integrator with tiny input authority and quadratic path cost.

    min  integral of x1^2  over [0, 300]
    s.t. x1' = x2, x2' = u, |u| <= 0.01,
         x1(0) = 0, x2(0) = 1, x1(T) = 0, x2(T) = 0.

    The optimal input chatters between the bounds with switches that
    accumulate, which makes this a stress test for mesh placement.
    """

    def dynamics(xdot, x, u, t):
        return (xdot[0] - x[1], xdot[1] - u[0])

    def path_ineq(xdot, x, u, t):
        return (u[0] - 0.01, -u[0] - 0.01)

    def boundary_eq(x0, xf, t0, tf):
        return (x0[0], x0[1] - 1.0, xf[0], xf[1])

    def lagrange(x, u, t):
        return x[0] * x[0]

    return OcpProblem(
        n_x=2, n_u=1, n_f=2, n_g=2, n_e=4,
        t0=0.0, tf=300.0,
        dynamics=dynamics, path_ineq=path_ineq,
        boundary_eq=boundary_eq, lagrange=lagrange,
        name="fuller",
    )
