"""Flexible time mesh and the flat decision-vector layout.

The decision vector interleaves state nodal values, input nodal values
and mesh node times so that each interval occupies one contiguous
block::

    z = (s_0^0, t_0, s_0^1, ..., s_0^{a-1}, c_0^0, ..., c_0^b, s_0^a,
         t_1, s_1^1, ..., s_{N-1}^a, t_N)

The last state node of interval i and the first of interval i+1 resolve
to the same storage, which enforces state continuity structurally: no
continuity constraint rows are ever generated.  Inputs get their own
nodes per interval with no sharing, so input trajectories may jump at
mesh nodes -- that is what lets a coarse mesh park a node on a control
switch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import basis as _basis


@dataclass(frozen=True)
class FlexMesh:
    """Time mesh with per-interval polynomial degrees and length slack.

    ``flexibility`` in [0, 1) bounds how far each interval length may
    deviate from the uniform length (tf - t0)/N when node times are
    decision variables.
    """

    n_intervals: int
    nodes: np.ndarray
    state_degree: int
    input_degree: int
    flexibility: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if self.n_intervals < 1 or nodes.size != self.n_intervals + 1:
            raise ValueError("nodes must have n_intervals + 1 entries")
        if self.state_degree < 1 or self.input_degree < 0:
            raise ValueError("state degree must be >= 1, input degree >= 0")
        if not 0.0 <= self.flexibility < 1.0:
            raise ValueError("flexibility must lie in [0, 1)")
        h = np.diff(nodes)
        if not np.all(h > 0):
            raise ValueError("mesh nodes must be strictly increasing")
        href = (nodes[-1] - nodes[0]) / self.n_intervals
        lo = (1.0 - self.flexibility) * href
        hi = (1.0 + self.flexibility) * href
        tol = 1e-8 * href
        if np.any(h < lo - tol) or np.any(h > hi + tol):
            raise ValueError("interval lengths violate the flexibility bounds")

    @property
    def t0(self) -> float:
        return float(self.nodes[0])

    @property
    def tf(self) -> float:
        return float(self.nodes[-1])


def uniform_mesh(t0: float, tf: float, n_intervals: int,
                 state_degree: int = 2, input_degree: int = 1,
                 flexibility: float = 0.5) -> FlexMesh:
    """Equally spaced mesh over [t0, tf]."""
    if not tf > t0:
        raise ValueError("tf must exceed t0")
    nodes = np.linspace(t0, tf, n_intervals + 1)
    return FlexMesh(n_intervals, nodes, state_degree, input_degree, flexibility)


def vector_length(mesh: FlexMesh, n_x: int, n_u: int) -> int:
    """Flat decision-vector length for the interleaved layout."""
    a, b, n = mesh.state_degree, mesh.input_degree, mesh.n_intervals
    return n * (n_x * a + n_u * (b + 1) + 1) + n_x + 1


class DecisionLayout:
    """Index maps from (interval, node) coordinates into the flat vector."""

    def __init__(self, mesh: FlexMesh, n_x: int, n_u: int):
        self.mesh = mesh
        self.n_x = n_x
        self.n_u = n_u
        n, a, b = mesh.n_intervals, mesh.state_degree, mesh.input_degree
        self.n_intervals, self.state_degree, self.input_degree = n, a, b
        self.stride = a * n_x + (b + 1) * n_u + 1
        self.n_vars = n * self.stride + n_x + 1
        self.block_width = (a + 1) * n_x + (b + 1) * n_u + 2

        node_idx = np.empty(n + 1, dtype=np.intp)
        node_idx[0] = n_x
        state_idx = np.empty((n, a + 1, n_x), dtype=np.intp)
        input_idx = np.empty((n, b + 1, n_u), dtype=np.intp)
        state_idx[0, 0] = np.arange(n_x)
        for i in range(n):
            base = n_x + 1 + i * self.stride
            for j in range(1, a):
                state_idx[i, j] = base + (j - 1) * n_x + np.arange(n_x)
            for j in range(b + 1):
                input_idx[i, j] = base + (a - 1) * n_x + j * n_u + np.arange(n_u)
            state_idx[i, a] = base + (a - 1) * n_x + (b + 1) * n_u + np.arange(n_x)
            node_idx[i + 1] = base + self.stride - 1
            if i + 1 < n:
                state_idx[i + 1, 0] = state_idx[i, a]
        self.node_idx = node_idx
        self.state_idx = state_idx
        self.input_idx = input_idx
        # contiguous per-interval blocks: z[block_starts[i] : block_starts[i] + block_width]
        starts = np.array([state_idx[i, 0, 0] if n_x else node_idx[i] for i in range(n)],
                          dtype=np.intp)
        self.block_starts = starts
        self.block_idx = starts[:, None] + np.arange(self.block_width)[None, :]
        # in-block positions shared by every interval
        self.pos_state = state_idx - starts[:, None, None]
        self.pos_input = input_idx - starts[:, None, None] if n_u else input_idx
        self.pos_t_lo = int(node_idx[0] - starts[0]) if n else 0
        self.pos_t_hi = self.block_width - 1
        self.boundary_idx = np.concatenate([
            state_idx[0, 0], state_idx[-1, a],
            [node_idx[0], node_idx[-1]],
        ]).astype(np.intp)

    def node_offset(self, i: int) -> int:
        return int(self.node_idx[i])

    def state_offsets(self, i: int, j: int) -> np.ndarray:
        return self.state_idx[i, j]

    def input_offsets(self, i: int, j: int) -> np.ndarray:
        return self.input_idx[i, j]


@dataclass
class DecisionVector:
    """Flat variable vector plus the layout that interprets it."""

    data: np.ndarray
    layout: DecisionLayout

    def copy(self) -> "DecisionVector":
        return DecisionVector(self.data.copy(), self.layout)


def pack(mesh: FlexMesh, states, inputs=None, n_x=None, n_u=None) -> DecisionVector:
    """Assemble a decision vector from per-interval nodal arrays.

    ``states`` has shape (N, a+1, n_x); ``inputs`` (N, b+1, n_u) or None
    when the problem has no inputs.  Interval boundary states must agree
    exactly, since they share storage.
    """
    states = np.asarray(states, dtype=float)
    n, a1, nx = states.shape
    if n != mesh.n_intervals or a1 != mesh.state_degree + 1:
        raise ValueError("states shape does not match the mesh")
    if inputs is None:
        inputs = np.zeros((n, mesh.input_degree + 1, 0))
    inputs = np.asarray(inputs, dtype=float)
    nu = inputs.shape[2]
    for i in range(n - 1):
        if not np.array_equal(states[i, -1], states[i + 1, 0]):
            raise ValueError(f"shared boundary state mismatch at interval {i}")
    layout = DecisionLayout(mesh, nx, nu)
    z = np.empty(layout.n_vars)
    z[layout.node_idx] = mesh.nodes
    for j in range(mesh.state_degree + 1):
        z[layout.state_idx[:, j, :]] = states[:, j, :]
    if nu:
        for j in range(mesh.input_degree + 1):
            z[layout.input_idx[:, j, :]] = inputs[:, j, :]
    return DecisionVector(z, layout)


def unpack(dv: DecisionVector):
    """Split a decision vector into (nodes, states, inputs).

    The shared boundary states are materialised into both neighbouring
    intervals.  Rejects vectors whose node times are not increasing.
    """
    lay = dv.layout
    z = np.asarray(dv.data, dtype=float)
    nodes = z[lay.node_idx]
    if not np.all(np.diff(nodes) > 0):
        raise ValueError("decision vector has non-increasing mesh nodes")
    states = z[lay.state_idx]
    inputs = z[lay.input_idx] if lay.n_u else np.zeros((lay.n_intervals, lay.input_degree + 1, 0))
    return nodes, states, inputs


def interval_bound_constraints(mesh: FlexMesh):
    """Two-sided linear bounds on consecutive node differences.

    Returns a list of (coefficients over t_0..t_N, lower, upper), one
    per interval, bounding each length within (1 -/+ flexibility) times
    the uniform length.  Applies to every interval, including the first.
    """
    n = mesh.n_intervals
    href = (mesh.tf - mesh.t0) / n
    lo = (1.0 - mesh.flexibility) * href
    hi = (1.0 + mesh.flexibility) * href
    rows = []
    for i in range(n):
        c = np.zeros(n + 1)
        c[i], c[i + 1] = -1.0, 1.0
        rows.append((c, lo, hi))
    return rows


def support_times(nodes_lo, nodes_hi, ref_nodes):
    """Map reference supports into [lo, hi] with exact endpoint times."""
    ref = np.asarray(ref_nodes)
    t = nodes_lo[:, None] + 0.5 * (ref[None, :] + 1.0) * (nodes_hi - nodes_lo)[:, None]
    if ref.size and ref[0] == -1.0:
        t[:, 0] = nodes_lo
    if ref.size and ref[-1] == 1.0:
        t[:, -1] = nodes_hi
    return t


class Trajectory:
    """Piecewise-polynomial state/input trajectories read from a solution."""

    def __init__(self, nodes, states, inputs, state_degree, input_degree):
        self.nodes = np.asarray(nodes, dtype=float)
        self.states = np.asarray(states, dtype=float)
        self.inputs = np.asarray(inputs, dtype=float)
        self.state_basis = _basis.IntervalBasis.chebyshev(state_degree)
        self.input_basis = _basis.IntervalBasis.chebyshev(input_degree)

    @classmethod
    def from_decision(cls, dv: DecisionVector) -> "Trajectory":
        nodes, states, inputs = unpack(dv)
        return cls(nodes, states, inputs, dv.layout.state_degree, dv.layout.input_degree)

    @property
    def n_x(self):
        return self.states.shape[2]

    @property
    def n_u(self):
        return self.inputs.shape[2]

    def interval_of(self, t: float) -> int:
        i = int(np.searchsorted(self.nodes, t, side="right") - 1)
        return min(max(i, 0), len(self.nodes) - 2)

    def state(self, t: float) -> np.ndarray:
        i = self.interval_of(t)
        return _basis.eval_interp(self.state_basis, self.states[i],
                                  self.nodes[i], self.nodes[i + 1], t)

    def state_deriv(self, t: float) -> np.ndarray:
        i = self.interval_of(t)
        return _basis.eval_interp_deriv(self.state_basis, self.states[i],
                                        self.nodes[i], self.nodes[i + 1], t)

    def input(self, t: float) -> np.ndarray:
        if not self.n_u:
            return np.zeros(0)
        i = self.interval_of(t)
        return _basis.eval_interp(self.input_basis, self.inputs[i],
                                  self.nodes[i], self.nodes[i + 1], t)


def warm_start_expand(z_old: DecisionVector, mesh_old: FlexMesh,
                      mesh_new: FlexMesh) -> DecisionVector:
    """Initial point for a refined mesh from a coarser solution.

    States and inputs of the new vector are the old piecewise
    interpolants sampled at the new support times; the new node times
    are taken from ``mesh_new`` (uniform by convention, since the
    length bounds are defined relative to uniform spacing and the next
    solve relocates them anyway).
    """
    traj = Trajectory.from_decision(z_old)
    n, a, b = mesh_new.n_intervals, mesh_new.state_degree, mesh_new.input_degree
    nx, nu = traj.n_x, traj.n_u
    t_state = support_times(mesh_new.nodes[:-1], mesh_new.nodes[1:],
                            _basis.chebyshev2_nodes(a))
    t_input = support_times(mesh_new.nodes[:-1], mesh_new.nodes[1:],
                            _basis.chebyshev2_nodes(b))
    states = np.empty((n, a + 1, nx))
    inputs = np.empty((n, b + 1, nu))
    for i in range(n):
        for j in range(a + 1):
            states[i, j] = traj.state(t_state[i, j])
        for j in range(b + 1):
            inputs[i, j] = traj.input(t_input[i, j])
    return pack(mesh_new, states, inputs if nu else None)


def decision_to_dict(dv: DecisionVector, flexibility: float | None = None) -> dict:
    """JSON-friendly representation of a mesh plus decision vector."""
    nodes, states, inputs = unpack(dv)
    lay = dv.layout
    return {
        "n_intervals": lay.n_intervals,
        "state_degree": lay.state_degree,
        "input_degree": lay.input_degree,
        "flexibility": lay.mesh.flexibility if flexibility is None else flexibility,
        "nodes": nodes.tolist(),
        "states": states.tolist(),
        "inputs": inputs.tolist(),
    }


def decision_from_dict(doc: dict) -> DecisionVector:
    """Rebuild a decision vector from its JSON representation."""
    nodes = np.asarray(doc["nodes"], dtype=float)
    mesh = FlexMesh(doc["n_intervals"], nodes, doc["state_degree"],
                    doc["input_degree"], doc["flexibility"])
    states = np.asarray(doc["states"], dtype=float)
    inputs = np.asarray(doc["inputs"], dtype=float)
    return pack(mesh, states, inputs if inputs.size else None)
