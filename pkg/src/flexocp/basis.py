"""Barycentric Lagrange interpolation on Chebyshev type-2 supports.

Each mesh interval carries a polynomial interpolant whose support nodes
are Chebyshev extrema mapped affinely onto the interval.  The endpoints
of the reference interval [-1, 1] are always support nodes (for degree
>= 1), which is what allows neighbouring intervals to share their
boundary value and keep the composite trajectory continuous by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SingularBasisError(ValueError):
    """Raised when interpolation nodes coincide."""


def chebyshev2_nodes(degree: int) -> np.ndarray:
    """Chebyshev type-2 (extrema) nodes on [-1, 1], ascending.

    Uses the sine form so the node set is exactly symmetric and the
    midpoint of an even-degree basis is exactly 0.0.  ``degree=0``
    returns the single node [0].
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if degree == 0:
        return np.zeros(1)
    k = np.arange(degree + 1)
    return np.sin(np.pi * (2.0 * k - degree) / (2.0 * degree))


def barycentric_weights(nodes) -> np.ndarray:
    """Barycentric weights w_j = 1 / prod_{k != j} (x_j - x_k).

    The returned weights are rescaled so max |w| = 1; any common factor
    cancels in the second barycentric form.
    """
    x = np.asarray(nodes, dtype=float)
    if x.size == 1:
        return np.ones(1)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    if np.any(diff == 0.0):
        raise SingularBasisError("duplicate interpolation nodes")
    w = 1.0 / np.prod(diff, axis=1)
    return w / np.max(np.abs(w))


@dataclass(frozen=True)
class IntervalBasis:
    """Polynomial basis for one interval: reference nodes and weights."""

    degree: int
    ref_nodes: np.ndarray
    bary_weights: np.ndarray

    @classmethod
    def chebyshev(cls, degree: int) -> "IntervalBasis":
        nodes = chebyshev2_nodes(degree)
        return cls(degree=degree, ref_nodes=nodes, bary_weights=barycentric_weights(nodes))


def _map_to_interval(ref_nodes, t_lo, t_hi):
    return t_lo + 0.5 * (ref_nodes + 1.0) * (t_hi - t_lo)


def eval_interp(basis: IntervalBasis, nodal_values, t_lo: float, t_hi: float, t: float) -> np.ndarray:
    """Evaluate the interpolant at time t in [t_lo, t_hi].

    ``nodal_values`` has shape (degree+1, m); returns shape (m,).  When t
    lands exactly on a mapped support node the stored nodal value is
    returned, so continuity constraints stay exactly representable.
    """
    vals = np.atleast_2d(np.asarray(nodal_values, dtype=float))
    nodes = _map_to_interval(basis.ref_nodes, t_lo, t_hi)
    hit = np.nonzero(t == nodes)[0]
    if hit.size:
        return vals[hit[0]].copy()
    q = basis.bary_weights / (t - nodes)
    return (q @ vals) / np.sum(q)


def eval_interp_deriv(basis: IntervalBasis, nodal_values, t_lo: float, t_hi: float, t: float) -> np.ndarray:
    """Time derivative of the interpolant at t.

    Differentiates the second barycentric form directly; when t hits a
    support node the corresponding differentiation-matrix row is used
    instead (the rational form is 0/0 there).
    """
    vals = np.atleast_2d(np.asarray(nodal_values, dtype=float))
    if basis.degree == 0:
        return np.zeros(vals.shape[1])
    nodes = _map_to_interval(basis.ref_nodes, t_lo, t_hi)
    hit = np.nonzero(t == nodes)[0]
    scale = 2.0 / (t_hi - t_lo)
    if hit.size:
        row = diff_matrix(basis)[hit[0]] * scale
        return row @ vals
    d = t - nodes
    q = basis.bary_weights / d
    dq = -q / d
    s0 = np.sum(q)
    s1 = q @ vals
    ds0 = np.sum(dq)
    ds1 = dq @ vals
    # d/dt on the physical interval; mapped-node spacing already carries
    # the interval length, so no extra chain-rule factor here.
    return (ds1 * s0 - s1 * ds0) / s0**2


def diff_matrix(basis: IntervalBasis) -> np.ndarray:
    """Differentiation matrix on the reference nodes.

    Row i gives d/dxi of the interpolant at ref node i as a linear
    combination of nodal values (reference coordinates; scale by
    2/(t_hi - t_lo) for a physical interval).
    """
    x, w = basis.ref_nodes, basis.bary_weights
    n = x.size
    if n == 1:
        return np.zeros((1, 1))
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -np.sum(D, axis=1))
    return D


def interp_matrix(basis: IntervalBasis, ref_points) -> np.ndarray:
    """Matrix M with M[p, j] = ell_j(ref_points[p]) on [-1, 1].

    Applying M to nodal values evaluates the interpolant at the given
    reference points.  Points that coincide with a support node get an
    exact unit row.
    """
    pts = np.asarray(ref_points, dtype=float)
    M = np.empty((pts.size, basis.degree + 1))
    for p, xi in enumerate(pts):
        hit = np.nonzero(xi == basis.ref_nodes)[0]
        if hit.size:
            row = np.zeros(basis.degree + 1)
            row[hit[0]] = 1.0
        else:
            q = basis.bary_weights / (xi - basis.ref_nodes)
            row = q / np.sum(q)
        M[p] = row
    return M


def deriv_matrix(basis: IntervalBasis, ref_points) -> np.ndarray:
    """Matrix with row p = d/dxi of the interpolant at ref_points[p].

    Reference-coordinate derivative; multiply by 2/(t_hi - t_lo) to get
    the physical time derivative.
    """
    pts = np.asarray(ref_points, dtype=float)
    n = basis.degree + 1
    M = np.zeros((pts.size, n))
    if basis.degree == 0:
        return M
    D = diff_matrix(basis)
    for p, xi in enumerate(pts):
        hit = np.nonzero(xi == basis.ref_nodes)[0]
        if hit.size:
            M[p] = D[hit[0]]
            continue
        d = xi - basis.ref_nodes
        q = basis.bary_weights / d
        dq = -q / d
        s0 = np.sum(q)
        ds0 = np.sum(dq)
        # derivative of (q_j / s0) wrt xi, assembled per column
        M[p] = (dq * s0 - q * ds0) / s0**2
    return M
