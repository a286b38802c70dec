"""Built-in benchmark problems with analytic oracles where available."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .ocp import OcpProblem, fuller_problem


@dataclass(frozen=True)
class BenchmarkEntry:
    """A named problem, optionally with a closed-form solution.

    ``oracle`` maps a time t to (x(t), u(t)); ``reference_cost`` carries
    a trusted objective value together with a note saying how it was
    produced.
    """

    name: str
    problem: OcpProblem
    oracle: Optional[Callable] = None
    reference_cost: Optional[float] = None
    reference_cost_provenance: str = ""


def _exp_growth() -> BenchmarkEntry:
    def dynamics(xdot, x, u, t):
        return (xdot[0] - x[0],)

    def boundary_eq(x0, xf, t0, tf):
        return (x0[0] - 1.0,)

    problem = OcpProblem(n_x=1, n_u=0, n_f=1, n_e=1, t0=0.0, tf=1.0,
                         dynamics=dynamics, boundary_eq=boundary_eq,
                         name="exp_growth")

    def oracle(t):
        return np.array([np.exp(t)]), np.zeros(0)

    return BenchmarkEntry("exp_growth", problem, oracle=oracle)


def _double_integrator_energy() -> BenchmarkEntry:
    # Fixed endpoints x(0)=(0,0), x(1)=(1,0); minimising the input energy
    # of a double integrator gives the cubic rest-to-rest transfer
    # x1 = 3 t^2 - 2 t^3 with u = 6 - 12 t and cost 12.
    def dynamics(xdot, x, u, t):
        return (xdot[0] - x[1], xdot[1] - u[0])

    def boundary_eq(x0, xf, t0, tf):
        return (x0[0], x0[1], xf[0] - 1.0, xf[1])

    def lagrange(x, u, t):
        return u[0] * u[0]

    problem = OcpProblem(n_x=2, n_u=1, n_f=2, n_e=4, t0=0.0, tf=1.0,
                         dynamics=dynamics, boundary_eq=boundary_eq,
                         lagrange=lagrange, name="double_integrator_energy")

    def oracle(t):
        x = np.array([3.0 * t**2 - 2.0 * t**3, 6.0 * t - 6.0 * t**2])
        u = np.array([6.0 - 12.0 * t])
        return x, u

    return BenchmarkEntry("double_integrator_energy", problem, oracle=oracle,
                          reference_cost=12.0,
                          reference_cost_provenance="analytic minimum-energy cost")


def _fuller() -> BenchmarkEntry:
    return BenchmarkEntry(
        "fuller", fuller_problem(),
        reference_cost=_FULLER_REFERENCE_COST,
        reference_cost_provenance=_FULLER_REFERENCE_NOTE,
    )


# Produced by this package itself: scripts/compute_fuller_reference.py runs
# the full two-phase solve at the settings below and prints the cost.
_FULLER_REFERENCE_COST: Optional[float] = None
_FULLER_REFERENCE_NOTE = (
    "self-solve, flexible mesh, N=120, a=2, b=1, phi_flex=0.5, "
    "eps_tol=1e-12, Q=3, nlp_tol=1e-10"
)


def registry() -> list[BenchmarkEntry]:
    """All built-in benchmark entries."""
    return [_fuller(), _exp_growth(), _double_integrator_energy()]


def get(name: str) -> BenchmarkEntry:
    """Look up a benchmark by name; raises for unknown names."""
    entries = {e.name: e for e in registry()}
    if name not in entries:
        known = ", ".join(sorted(entries))
        raise KeyError(f"unknown problem '{name}' (known: {known})")
    return entries[name]


def oracle_defect(entry: BenchmarkEntry, times) -> float:
    """Max dynamics defect of the oracle over the given times.

    The oracle's time derivative is obtained by complex-step
    differentiation, which is exact to machine precision for the
    holomorphic expressions used by the built-in oracles.
    """
    if entry.oracle is None:
        raise ValueError(f"benchmark '{entry.name}' has no oracle")
    p = entry.problem
    step = 1e-200
    worst = 0.0
    for t in np.atleast_1d(times):
        x, u = entry.oracle(float(t))
        xc, _ = entry.oracle(complex(t, step))
        xdot = np.imag(np.asarray(xc)) / step
        r = p.dynamics(list(xdot), list(x), list(u), float(t))
        worst = max(worst, float(np.max(np.abs(np.asarray(r, dtype=float)))))
    return worst
