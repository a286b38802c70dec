"""Finite-dimensional transcriptions of the control problem.

Two problems share one machinery:

* the residual-minimisation problem, whose objective is the quadrature
  approximation of the horizon- and equation-averaged integral of the
  squared dynamics defect, and
* the cost-minimisation problem, whose objective is the Mayer term plus
  the quadrature of the Lagrange term, with the residual demoted to a
  single budget inequality.

Because quadrature points and support nodes move with the same affine
map of each interval, interpolation reduces to constant matrices in
reference coordinates: interval lengths enter only through the
derivative chain factor 2/h, the quadrature weights, and the explicit
time argument of the problem functions.  All intervals are evaluated in
one batched sweep, so each problem function is called once per
evaluation regardless of mesh size.
"""

from __future__ import annotations

import numpy as np

from . import ad
from . import basis as _basis
from .mesh import DecisionLayout, DecisionVector, FlexMesh
from .ocp import OcpProblem
from .quadrature import QuadRule, gauss_legendre


def _union_supports(state_nodes, input_nodes, n_u):
    pts = state_nodes if not n_u else np.concatenate([state_nodes, input_nodes])
    pts = np.unique(pts)
    keep = [pts[0]]
    for p in pts[1:]:
        if p - keep[-1] > 1e-12:
            keep.append(p)
    return np.asarray(keep)


class _RuleMats:
    """Interpolation/derivative matrices evaluated at one rule's nodes."""

    def __init__(self, rule, state_basis, input_basis, n_u):
        self.rule = rule
        self.gamma = rule.ref_nodes
        self.omega = rule.ref_weights
        self.A_x = _basis.interp_matrix(state_basis, rule.ref_nodes)
        self.D_x = _basis.deriv_matrix(state_basis, rule.ref_nodes)
        self.A_u = _basis.interp_matrix(input_basis, rule.ref_nodes) if n_u else None


class TranscribedNlp:
    """Objective/constraint evaluators for one phase on one mesh.

    Convention: equality rows h(z) = 0, inequality rows g(z) <= 0.
    State continuity never appears as a row; neighbouring intervals read
    the same storage.  Evaluators accept plain arrays or dual numbers;
    the ``grad_*``/``jac_*``/``lagrangian_hessian`` methods exploit the
    per-interval block structure and are much cheaper than seeding the
    full vector.
    """

    def __init__(self, problem: OcpProblem, mesh: FlexMesh, rule: QuadRule,
                 phase: str, eps_tol: float | None = None, fixed_mesh: bool = False,
                 residual_hessian: str = "gauss_newton"):
        if phase not in ("residual", "cost"):
            raise ValueError("phase must be 'residual' or 'cost'")
        if phase == "cost" and (eps_tol is None or eps_tol <= 0):
            raise ValueError("cost phase needs a positive residual budget")
        if residual_hessian not in ("exact", "gauss_newton"):
            raise ValueError("residual_hessian must be 'exact' or 'gauss_newton'")
        self.problem = problem
        self.mesh = mesh
        self.rule = rule
        self.phase = phase
        self.eps_tol = eps_tol
        self.fixed_mesh = fixed_mesh
        self.residual_hessian = residual_hessian

        self.layout = DecisionLayout(mesh, problem.n_x, problem.n_u)
        self.n_vars = self.layout.n_vars
        self.horizon = problem.tf - problem.t0

        a, b = mesh.state_degree, mesh.input_degree
        self.state_basis = _basis.IntervalBasis.chebyshev(a)
        self.input_basis = _basis.IntervalBasis.chebyshev(b)
        self._mats_cache: dict[int, _RuleMats] = {}
        self._mats(rule)

        # path constraints are enforced at the union of state and input
        # support points of each interval
        self.sup_ref = _union_supports(self.state_basis.ref_nodes,
                                       self.input_basis.ref_nodes, problem.n_u)
        if problem.n_g:
            self.P_x = _basis.interp_matrix(self.state_basis, self.sup_ref)
            self.PD_x = _basis.deriv_matrix(self.state_basis, self.sup_ref)
            self.P_u = _basis.interp_matrix(self.input_basis, self.sup_ref) if problem.n_u else None

        n = mesh.n_intervals
        href = self.horizon / n
        self.len_lo = (1.0 - mesh.flexibility) * href
        self.len_hi = (1.0 + mesh.flexibility) * href

        self.n_sup = self.sup_ref.size
        self.n_path = n * self.n_sup * problem.n_g
        self.n_eq = problem.n_e
        self.row_path = 0
        self.row_psi_i = self.n_path
        self.row_len_lo = self.row_psi_i + problem.n_i
        self.row_len_hi = self.row_len_lo + n
        self.row_budget = self.row_len_hi + n if phase == "cost" else None
        self.n_ineq = self.row_len_hi + n + (1 if phase == "cost" else 0)

        lb = np.full(self.n_vars, -np.inf)
        ub = np.full(self.n_vars, np.inf)
        node_idx = self.layout.node_idx
        if fixed_mesh:
            lb[node_idx] = ub[node_idx] = mesh.nodes
        else:
            lb[node_idx[0]] = ub[node_idx[0]] = problem.t0
            lb[node_idx[-1]] = ub[node_idx[-1]] = problem.tf
        self.var_bounds = (lb, ub)

        # interval-length rows are linear; expose them so the solver can
        # keep every iterate inside the length bounds (h > 0 throughout)
        A = np.zeros((2 * n, self.n_vars))
        bvec = np.empty(2 * n)
        for i in range(n):
            A[i, node_idx[i]], A[i, node_idx[i + 1]] = 1.0, -1.0
            bvec[i] = -self.len_lo
            A[n + i, node_idx[i]], A[n + i, node_idx[i + 1]] = -1.0, 1.0
            bvec[n + i] = self.len_hi
        self.linear_ineq = (A, bvec)

    # -- shared evaluation machinery -----------------------------------

    def _mats(self, rule: QuadRule) -> _RuleMats:
        m = self._mats_cache.get(rule.order)
        if m is None or m.rule is not rule:
            m = _RuleMats(rule, self.state_basis, self.input_basis, self.problem.n_u)
            self._mats_cache[rule.order] = m
        return m

    def _gather(self, z):
        lay = self.layout
        t = z[lay.node_idx]
        S = z[lay.state_idx]
        C = z[lay.input_idx] if self.problem.n_u else None
        return t, S, C

    def _interp_at(self, S, C, t_lo, t_hi, interp_x, deriv_x, interp_u, ref_pts):
        """Trajectories, derivatives and times at mapped reference points."""
        n = self.layout.n_intervals
        h = t_hi - t_lo
        hr = h.reshape((n, 1, 1))
        X = ad.apply_matrix(interp_x, S)
        Xd = ad.apply_matrix(deriv_x, S) * (2.0 / hr)
        x = [ad.comp(X, m) for m in range(self.problem.n_x)]
        xd = [ad.comp(Xd, m) for m in range(self.problem.n_x)]
        u = []
        if self.problem.n_u:
            U = ad.apply_matrix(interp_u, C)
            u = [ad.comp(U, m) for m in range(self.problem.n_u)]
        h1 = h.reshape((n, 1))
        t = t_lo.reshape((n, 1)) + (0.5 * (ref_pts + 1.0)) * h1
        return x, xd, u, t, h1

    def _dynamics_terms(self, S, C, t_lo, t_hi, mats):
        """Per-interval quadrature of the squared dynamics defect, scaled."""
        x, xd, u, rho, h1 = self._interp_at(S, C, t_lo, t_hi,
                                            mats.A_x, mats.D_x, mats.A_u, mats.gamma)
        F = self.problem.dynamics(xd, x, u, rho)
        sq = None
        for r in F:
            sq = r * r if sq is None else sq + r * r
        sigma = mats.omega * h1 * (0.5 / (self.horizon * self.problem.n_f))
        return ad.sum_axis(sigma * sq, 1), (x, u, rho, h1)

    def _residual_gauss_newton_blocks(self, z):
        """Per-interval PSD curvature blocks of the residual objective.

        The objective is the plain sum of squares of w = sqrt(sigma) * F,
        so 2 Jw^T Jw is the Gauss-Newton Hessian: positive semidefinite
        and exact in the limit of a vanishing residual.  Needs only
        first-order dual sweeps.
        """
        mats = self._mats(self.rule)
        S, C, t_lo, t_hi = self._seeded_blocks(z)
        x, xd, u, rho, h1 = self._interp_at(S, C, t_lo, t_hi,
                                            mats.A_x, mats.D_x, mats.A_u, mats.gamma)
        F = self.problem.dynamics(xd, x, u, rho)
        sigma = mats.omega * h1 * (0.5 / (self.horizon * self.problem.n_f))
        root = ad.sqrt(sigma)
        w = ad.stack_last([root * r for r in F], like=root)
        return 2.0 * np.einsum("nqfk,nqfl->nkl", w.par, w.par)

    def _lagrange_terms(self, S, C, t_lo, t_hi, mats):
        x, _, u, rho, h1 = self._interp_at(S, C, t_lo, t_hi,
                                           mats.A_x, mats.D_x, mats.A_u, mats.gamma)
        L = self.problem.lagrange(x, u, rho)
        sigma_hat = mats.omega * h1 * 0.5
        return ad.sum_axis(sigma_hat * L, 1)

    def _path_rows(self, S, C, t_lo, t_hi):
        """(N, n_sup * n_g) path-inequality values, interval-major."""
        n = self.layout.n_intervals
        x, xd, u, tsup, _ = self._interp_at(S, C, t_lo, t_hi,
                                            self.P_x, self.PD_x, self.P_u, self.sup_ref)
        G = self.problem.path_ineq(xd, x, u, tsup)
        like = next((g for g in G if isinstance(g, (ad.Dual, ad.Dual2))), None)
        if like is None and isinstance(tsup, (ad.Dual, ad.Dual2)):
            like = tsup * 0.0
        rows = ad.stack_last(list(G), like=like)
        return rows.reshape((n, self.n_sup * self.problem.n_g))

    def _boundary_parts(self, z):
        lay = self.layout
        x0 = [z[lay.state_idx[0, 0, m]] for m in range(self.problem.n_x)]
        xf = [z[lay.state_idx[-1, -1, m]] for m in range(self.problem.n_x)]
        return x0, xf, z[lay.node_idx[0]], z[lay.node_idx[-1]]

    # -- public evaluators ---------------------------------------------

    def residual_value(self, z, rule: QuadRule | None = None) -> float:
        """Integrated-residual objective at z under the given rule."""
        z = _as_array(z)
        mats = self._mats(rule) if rule is not None else self._mats(self.rule)
        t, S, C = self._gather(z)
        terms, _ = self._dynamics_terms(S, C, t[:-1], t[1:], mats)
        return float(ad.value(ad.total(terms)))

    def objective(self, z):
        z = _as_array(z)
        t, S, C = self._gather(z)
        if self.phase == "residual":
            terms, _ = self._dynamics_terms(S, C, t[:-1], t[1:], self._mats(self.rule))
            return ad.total(terms)
        out = 0.0
        if self.problem.lagrange is not None:
            out = out + ad.total(self._lagrange_terms(S, C, t[:-1], t[1:], self._mats(self.rule)))
        if self.problem.mayer is not None:
            x0, xf, t0, tf = self._boundary_parts(z)
            out = out + self.problem.mayer(x0, xf, t0, tf)
        return out

    def eq_constraints(self, z):
        z = _as_array(z)
        if not self.problem.n_e:
            return np.zeros(0)
        x0, xf, t0, tf = self._boundary_parts(z)
        return ad.concat(list(self.problem.boundary_eq(x0, xf, t0, tf)))

    def ineq_constraints(self, z):
        z = _as_array(z)
        t, S, C = self._gather(z)
        h = t[1:] - t[:-1]
        parts = []
        if self.n_path:
            rows = self._path_rows(S, C, t[:-1], t[1:])
            parts.append(rows.reshape((self.n_path,)) if hasattr(rows, "reshape")
                         else np.reshape(rows, (self.n_path,)))
        if self.problem.n_i:
            x0, xf, t0, tf = self._boundary_parts(z)
            parts.append(ad.concat(list(self.problem.boundary_ineq(x0, xf, t0, tf))))
        parts.append(self.len_lo - h)
        parts.append(h - self.len_hi)
        if self.phase == "cost":
            terms, _ = self._dynamics_terms(S, C, t[:-1], t[1:], self._mats(self.rule))
            # budget row normalised by the tolerance so it is O(1); the
            # feasible set (residual <= eps_tol) is unchanged but the row
            # no longer sits many orders below the cost scale
            parts.append(ad.total(terms) * (1.0 / self.eps_tol) - 1.0)
        return ad.concat(parts)

    # -- structured derivatives ----------------------------------------

    def _seeded_blocks(self, z, order=1):
        """Interval data as duals seeded on the local block variables."""
        lay = self.layout
        n, k = lay.n_intervals, lay.block_width
        cls = ad.Dual if order == 1 else ad.Dual2

        def onehot(pos):
            e = np.zeros(pos.shape + (k,))
            np.put_along_axis(e, pos[..., None], 1.0, axis=-1)
            return np.broadcast_to(e, (n,) + e.shape)

        pos_state = lay.pos_state[0]
        S_par = onehot(pos_state)
        t_lo_par = np.broadcast_to(np.eye(k)[lay.pos_t_lo], (n, k))
        t_hi_par = np.broadcast_to(np.eye(k)[lay.pos_t_hi], (n, k))
        Sv = z[lay.state_idx]
        tv = z[lay.node_idx]
        if order == 1:
            S = cls(Sv, S_par)
            t_lo = cls(tv[:-1], t_lo_par)
            t_hi = cls(tv[1:], t_hi_par)
        else:
            S = cls(Sv, S_par, np.zeros(Sv.shape + (k, k)))
            t_lo = cls(tv[:-1], t_lo_par, np.zeros((n, k, k)))
            t_hi = cls(tv[1:], t_hi_par, np.zeros((n, k, k)))
        C = None
        if self.problem.n_u:
            C_par = onehot(lay.pos_input[0])
            Cv = z[lay.input_idx]
            C = cls(Cv, C_par) if order == 1 else cls(Cv, C_par, np.zeros(Cv.shape + (k, k)))
        return S, C, t_lo, t_hi

    def _seeded_boundary(self, z, order=1):
        idx = self.layout.boundary_idx
        zb = z[idx]
        seed = ad.Dual.seed(zb) if order == 1 else ad.Dual2.seed(zb)
        nx = self.problem.n_x
        x0 = [seed[m] for m in range(nx)]
        xf = [seed[nx + m] for m in range(nx)]
        return x0, xf, seed[2 * nx], seed[2 * nx + 1], idx

    def residual_gradient(self, z):
        z = _as_array(z)
        S, C, t_lo, t_hi = self._seeded_blocks(z)
        terms, _ = self._dynamics_terms(S, C, t_lo, t_hi, self._mats(self.rule))
        grad = np.zeros(self.n_vars)
        np.add.at(grad, self.layout.block_idx, terms.par)
        return grad

    def grad_objective(self, z):
        z = _as_array(z)
        if self.phase == "residual":
            return self.residual_gradient(z)
        grad = np.zeros(self.n_vars)
        if self.problem.lagrange is not None:
            S, C, t_lo, t_hi = self._seeded_blocks(z)
            terms = self._lagrange_terms(S, C, t_lo, t_hi, self._mats(self.rule))
            np.add.at(grad, self.layout.block_idx, terms.par)
        if self.problem.mayer is not None:
            x0, xf, t0, tf, idx = self._seeded_boundary(z)
            out = self.problem.mayer(x0, xf, t0, tf)
            if isinstance(out, ad.Dual):
                np.add.at(grad, idx, out.par)
        return grad

    def jac_eq(self, z):
        z = _as_array(z)
        J = np.zeros((self.n_eq, self.n_vars))
        if self.n_eq:
            x0, xf, t0, tf, idx = self._seeded_boundary(z)
            rows = ad.concat(list(self.problem.boundary_eq(x0, xf, t0, tf)))
            if isinstance(rows, ad.Dual):
                J[:, idx] = rows.par
        return J

    def jac_ineq(self, z):
        z = _as_array(z)
        lay = self.layout
        n = lay.n_intervals
        J = np.zeros((self.n_ineq, self.n_vars))
        if self.n_path:
            S, C, t_lo, t_hi = self._seeded_blocks(z)
            rows = self._path_rows(S, C, t_lo, t_hi)
            R = self.n_sup * self.problem.n_g
            for i in range(n):
                sl = slice(lay.block_starts[i], lay.block_starts[i] + lay.block_width)
                J[self.row_path + i * R: self.row_path + (i + 1) * R, sl] = rows.par[i]
        if self.problem.n_i:
            x0, xf, t0, tf, idx = self._seeded_boundary(z)
            rows = ad.concat(list(self.problem.boundary_ineq(x0, xf, t0, tf)))
            if isinstance(rows, ad.Dual):
                J[self.row_psi_i: self.row_psi_i + self.problem.n_i, idx] = rows.par
        for i in range(n):
            J[self.row_len_lo + i, lay.node_idx[i]] = 1.0
            J[self.row_len_lo + i, lay.node_idx[i + 1]] = -1.0
            J[self.row_len_hi + i, lay.node_idx[i]] = -1.0
            J[self.row_len_hi + i, lay.node_idx[i + 1]] = 1.0
        if self.row_budget is not None:
            J[self.row_budget] = self.residual_gradient(z) / self.eps_tol
        return J

    def lagrangian_hessian(self, z, sigma_f: float, y_eq, lam_ineq):
        """Exact Hessian of sigma_f * objective + y.h(z) + lam.g(z)."""
        z = _as_array(z)
        lay = self.layout
        n = lay.n_intervals
        H = np.zeros((self.n_vars, self.n_vars))
        lam_ineq = np.asarray(lam_ineq, dtype=float) if self.n_ineq else np.zeros(0)
        y_eq = np.asarray(y_eq, dtype=float) if self.n_eq else np.zeros(0)
        bix = (lay.block_idx[:, :, None], lay.block_idx[:, None, :])

        w_res = sigma_f if self.phase == "residual" else 0.0
        if self.row_budget is not None and lam_ineq.size:
            w_res += lam_ineq[self.row_budget] / self.eps_tol
        need_lagrange = (self.phase == "cost" and sigma_f != 0.0
                         and self.problem.lagrange is not None)
        if w_res != 0.0 and self.residual_hessian == "gauss_newton":
            np.add.at(H, bix, w_res * self._residual_gauss_newton_blocks(z))
        if (w_res != 0.0 and self.residual_hessian == "exact") or need_lagrange:
            S, C, t_lo, t_hi = self._seeded_blocks(z, order=2)
            if w_res != 0.0 and self.residual_hessian == "exact":
                terms, _ = self._dynamics_terms(S, C, t_lo, t_hi, self._mats(self.rule))
                np.add.at(H, bix, w_res * terms.d2)
            if need_lagrange:
                lterms = self._lagrange_terms(S, C, t_lo, t_hi, self._mats(self.rule))
                np.add.at(H, bix, sigma_f * lterms.d2)
        if self.n_path and lam_ineq.size:
            lam_path = lam_ineq[self.row_path: self.row_path + self.n_path]
            if np.any(lam_path):
                S, C, t_lo, t_hi = self._seeded_blocks(z, order=2)
                rows = self._path_rows(S, C, t_lo, t_hi)
                w = lam_path.reshape(n, -1)
                np.add.at(H, bix, np.einsum("nr,nrkl->nkl", w, rows.d2))
        bx0 = sigma_f if (self.phase == "cost" and self.problem.mayer is not None) else 0.0
        if bx0 != 0.0 or self.n_eq or self.problem.n_i:
            x0, xf, t0, tf, idx = self._seeded_boundary(z, order=2)
            acc = None

            def add(term, weight):
                nonlocal acc
                if isinstance(term, ad.Dual2) and weight != 0.0:
                    acc = weight * term.d2 if acc is None else acc + weight * term.d2

            if bx0 != 0.0:
                add(self.problem.mayer(x0, xf, t0, tf), bx0)
            if self.n_eq:
                for r, row in enumerate(self.problem.boundary_eq(x0, xf, t0, tf)):
                    add(row, y_eq[r])
            if self.problem.n_i:
                for r, row in enumerate(self.problem.boundary_ineq(x0, xf, t0, tf)):
                    add(row, lam_ineq[self.row_psi_i + r])
            if acc is not None:
                H[np.ix_(idx, idx)] += acc
        return 0.5 * (H + H.T)

    # -- convenience -----------------------------------------------------

    def row_counts(self) -> dict:
        return {
            "path": self.n_path,
            "boundary_ineq": self.problem.n_i,
            "interval_two_sided": self.layout.n_intervals,
            "budget": 1 if self.row_budget is not None else 0,
            "eq": self.n_eq,
        }


def _as_array(z):
    if isinstance(z, DecisionVector):
        return np.asarray(z.data, dtype=float)
    if isinstance(z, (ad.Dual, ad.Dual2)):
        return z
    return np.asarray(z, dtype=float)


def integrated_residual(problem: OcpProblem, mesh: FlexMesh, rule: QuadRule, z) -> float:
    """Quadrature value of the averaged squared dynamics defect at z."""
    tr = TranscribedNlp(problem, mesh, rule, phase="residual")
    return tr.residual_value(z)


def build_residual_nlp(problem: OcpProblem, mesh: FlexMesh, rule: QuadRule,
                       eps_tol: float | None = None, fixed_mesh: bool = False,
                       residual_hessian: str = "gauss_newton") -> TranscribedNlp:
    """Phase-1 problem: minimise the integrated residual.

    ``eps_tol`` is accepted for signature symmetry with the cost phase
    but plays no role here.
    """
    return TranscribedNlp(problem, mesh, rule, phase="residual", fixed_mesh=fixed_mesh,
                          residual_hessian=residual_hessian)


def build_cost_nlp(problem: OcpProblem, mesh: FlexMesh, rule: QuadRule,
                   eps_tol: float, fixed_mesh: bool = False,
                   residual_hessian: str = "gauss_newton") -> TranscribedNlp:
    """Phase-2 problem: minimise the cost under a residual budget."""
    return TranscribedNlp(problem, mesh, rule, phase="cost", eps_tol=eps_tol,
                          fixed_mesh=fixed_mesh, residual_hessian=residual_hessian)
