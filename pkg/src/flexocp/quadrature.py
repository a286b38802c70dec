"""Gauss-Legendre quadrature and residual integration weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadRule:
    """Gauss-Legendre rule on [-1, 1]: ``order`` nodes and weights."""

    order: int
    ref_nodes: np.ndarray
    ref_weights: np.ndarray


def _legendre_and_deriv(n: int, x: np.ndarray):
    """Value and derivative of the degree-n Legendre polynomial at x."""
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(1, n):
        p, p_prev = ((2 * k + 1) * x * p - k * p_prev) / (k + 1), p
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_legendre(order: int) -> QuadRule:
    """Compute the order-Q Gauss-Legendre rule by Newton iteration.

    Nodes are the Legendre roots, converged to |P_Q| <= 1e-15 style
    accuracy; weights are 2 / ((1 - x^2) P_Q'(x)^2).  The node set is
    symmetrised so odd orders carry an exact 0.0 centre node.
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    if order == 1:
        return QuadRule(1, np.zeros(1), np.full(1, 2.0))
    i = np.arange(1, order + 1)
    x = np.cos(np.pi * (4 * i - 1) / (4 * order + 2))
    for _ in range(100):
        p, dp = _legendre_and_deriv(order, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    x = 0.5 * (x - x[::-1])  # enforce symmetry about 0
    _, dp = _legendre_and_deriv(order, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    w = 0.5 * (w + w[::-1])
    idx = np.argsort(x)
    return QuadRule(order, x[idx], w[idx])


def scaled_points(rule: QuadRule, t_lo: float, t_hi: float):
    """Map the rule onto [t_lo, t_hi]: affine nodes, weights times h/2."""
    h = t_hi - t_lo
    nodes = t_lo + 0.5 * (rule.ref_nodes + 1.0) * h
    return nodes, rule.ref_weights * (0.5 * h)


def residual_weights(rule: QuadRule, t_lo: float, t_hi: float, horizon: float, n_f: int) -> np.ndarray:
    """Interval quadrature weights carrying the residual normalisation.

    The integrated-residual metric averages over the horizon length and
    the number of dynamics equations, so the plain interval weights are
    divided by horizon * n_f.
    """
    _, w = scaled_points(rule, t_lo, t_hi)
    return w / (horizon * n_f)


def quad_error_estimate(transcription, z, rule_hi: QuadRule) -> float:
    """Estimate the quadrature error of the integrated residual at z.

    Recomputes the residual objective with the higher-order rule and
    returns the absolute difference from the working-rule value.
    """
    if rule_hi.order <= transcription.rule.order:
        raise ValueError("verification rule must have higher order than the working rule")
    lo = transcription.residual_value(z)
    hi = transcription.residual_value(z, rule=rule_hi)
    return abs(hi - lo)
