"""Dense interior-point solver for smooth constrained minimisation.

Handles problems of the form

    min f(z)  s.t.  h(z) = 0,  g(z) <= 0,  lb <= z <= ub

with a primal-dual log-barrier method: inequality slacks get a barrier
term, equalities enter a Newton KKT system, and the barrier parameter is
driven towards zero once each barrier subproblem is solved to
proportional accuracy.  Derivatives come from forward-mode dual numbers
(see :mod:`flexocp.ad`); callers may supply structured derivative
callbacks, otherwise the solver seeds the raw evaluators in chunks.

Variables with lb == ub are eliminated before solving.  Affine
inequality rows may be declared via ``linear_ineq``; accepted iterates
then never violate them (the step length is clipped), which the
transcription uses to keep every interval length positive and within
its bounds throughout the solve.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
from threadpoolctl import threadpool_limits

from . import ad
from .ad import NonFiniteDerivativeError, gradient, hessian, jacobian  # noqa: F401


class NlpStatus(Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class NlpSpec:
    """Problem data plus optional structured derivative callbacks."""

    n_vars: int
    objective: Callable
    eq: Optional[Callable] = None
    ineq: Optional[Callable] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None
    z0: Optional[np.ndarray] = None
    grad_objective: Optional[Callable] = None
    jac_eq: Optional[Callable] = None
    jac_ineq: Optional[Callable] = None
    lagrangian_hessian: Optional[Callable] = None
    linear_ineq: Optional[tuple] = None  # (A, b) with rows A z <= b, duplicated in ineq


@dataclass
class NlpResult:
    z: np.ndarray
    objective: float
    eq_violation: float
    ineq_violation: float
    iterations: int
    status: NlpStatus
    kkt_stationarity: float = np.inf
    kkt_complementarity: float = np.inf
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lam: np.ndarray = field(default_factory=lambda: np.zeros(0))
    merit_steps: list = field(default_factory=list)
    message: str = ""


def lagrangian_hessian(spec: NlpSpec, z, y=None, lam=None) -> np.ndarray:
    """Dense Hessian of f + y.h + lam.g at z via second-order duals."""
    z = np.asarray(z, dtype=float)
    if spec.lagrangian_hessian is not None:
        return spec.lagrangian_hessian(z, 1.0, y, lam)

    def L(zd):
        out = spec.objective(zd)
        if spec.eq is not None and y is not None and np.asarray(y).size:
            out = out + ad.total(spec.eq(zd) * np.asarray(y, dtype=float))
        if spec.ineq is not None and lam is not None and np.asarray(lam).size:
            out = out + ad.total(spec.ineq(zd) * np.asarray(lam, dtype=float))
        return out

    return hessian(L, z)


def bfgs_update(B: np.ndarray, s: np.ndarray, y: np.ndarray):
    """Damped BFGS update; returns (B_new, y_used).

    Powell damping replaces y when curvature is too weak so B stays
    positive definite; the secant condition B_new s = y_used holds
    exactly either way.
    """
    Bs = B @ s
    sBs = float(s @ Bs)
    sy = float(s @ y)
    if sBs <= 0:
        return B, y
    if sy < 0.2 * sBs:
        theta = 0.8 * sBs / (sBs - sy)
        y = theta * y + (1.0 - theta) * Bs
        sy = float(s @ y)
    if sy <= 1e-16 * sBs:
        return B, y
    B_new = B - np.outer(Bs, Bs) / sBs + np.outer(y, y) / sy
    return B_new, y


class _Workspace:
    """Free-variable reduction and derivative plumbing for one solve."""

    def __init__(self, spec: NlpSpec):
        n = spec.n_vars
        lb = np.full(n, -np.inf) if spec.lb is None else np.asarray(spec.lb, dtype=float)
        ub = np.full(n, np.inf) if spec.ub is None else np.asarray(spec.ub, dtype=float)
        if np.any(lb > ub):
            raise ValueError("lower bound exceeds upper bound")
        self.spec = spec
        self.fixed = lb == ub
        self.free = ~self.fixed
        self.free_idx = np.flatnonzero(self.free)
        self.n_free = self.free_idx.size
        self.template = np.zeros(n)
        self.template[self.fixed] = lb[self.fixed]
        z0 = np.zeros(n) if spec.z0 is None else np.asarray(spec.z0, dtype=float)
        self.x0 = np.clip(z0, lb, ub)[self.free_idx]
        # remaining finite bounds become inequality rows in free space
        flb = lb[self.free_idx]
        fub = ub[self.free_idx]
        self.lb_rows = np.flatnonzero(np.isfinite(flb))
        self.ub_rows = np.flatnonzero(np.isfinite(fub))
        self.lb_vals = flb[self.lb_rows]
        self.ub_vals = fub[self.ub_rows]

        probe = self.embed(self.x0)
        self.m_eq = np.asarray(spec.eq(probe)).size if spec.eq is not None else 0
        self.m_base = np.asarray(spec.ineq(probe)).size if spec.ineq is not None else 0
        self.m_in = self.m_base + self.lb_rows.size + self.ub_rows.size

        # affine rows used to clip the primal step (raw feasibility)
        caps = []
        if spec.linear_ineq is not None:
            A, b = spec.linear_ineq
            A = np.asarray(A, dtype=float)
            b = np.asarray(b, dtype=float)
            b_adj = b - A[:, self.fixed] @ self.template[self.fixed]
            caps.append((A[:, self.free_idx], b_adj))
        if self.lb_rows.size:
            A = np.zeros((self.lb_rows.size, self.n_free))
            A[np.arange(self.lb_rows.size), self.lb_rows] = -1.0
            caps.append((A, -self.lb_vals))
        if self.ub_rows.size:
            A = np.zeros((self.ub_rows.size, self.n_free))
            A[np.arange(self.ub_rows.size), self.ub_rows] = 1.0
            caps.append((A, self.ub_vals))
        if caps:
            self.cap_A = np.vstack([c[0] for c in caps])
            self.cap_b = np.concatenate([c[1] for c in caps])
        else:
            self.cap_A = np.zeros((0, self.n_free))
            self.cap_b = np.zeros(0)

    def embed(self, x):
        z = self.template.copy()
        z[self.free_idx] = x
        return z

    def embed_dual(self, xd: ad.Dual) -> ad.Dual:
        val = self.embed(xd.val)
        par = np.zeros((val.size, xd.width))
        par[self.free_idx] = xd.par
        return ad.Dual(val, par)

    # -- values ---------------------------------------------------------
    def f(self, x):
        return float(ad.value(self.spec.objective(self.embed(x))))

    def h(self, x):
        if not self.m_eq:
            return np.zeros(0)
        return np.asarray(ad.value(self.spec.eq(self.embed(x))), dtype=float)

    def g(self, x):
        parts = []
        if self.m_base:
            parts.append(np.asarray(ad.value(self.spec.ineq(self.embed(x))), dtype=float))
        if self.lb_rows.size:
            parts.append(self.lb_vals - x[self.lb_rows])
        if self.ub_rows.size:
            parts.append(x[self.ub_rows] - self.ub_vals)
        return np.concatenate(parts) if parts else np.zeros(0)

    # -- first derivatives ------------------------------------------------
    def grad_f(self, x):
        if self.spec.grad_objective is not None:
            return np.asarray(self.spec.grad_objective(self.embed(x)))[self.free_idx]
        return gradient(lambda xd: self.spec.objective(self.embed_dual(xd)), x)

    def jac_h(self, x):
        if not self.m_eq:
            return np.zeros((0, self.n_free))
        if self.spec.jac_eq is not None:
            return np.asarray(self.spec.jac_eq(self.embed(x)))[:, self.free_idx]
        return jacobian(lambda xd: self.spec.eq(self.embed_dual(xd)), x)

    def jac_g(self, x):
        blocks = []
        if self.m_base:
            if self.spec.jac_ineq is not None:
                blocks.append(np.asarray(self.spec.jac_ineq(self.embed(x)))[:, self.free_idx])
            else:
                blocks.append(jacobian(lambda xd: self.spec.ineq(self.embed_dual(xd)), x))
        if self.lb_rows.size:
            A = np.zeros((self.lb_rows.size, self.n_free))
            A[np.arange(self.lb_rows.size), self.lb_rows] = -1.0
            blocks.append(A)
        if self.ub_rows.size:
            A = np.zeros((self.ub_rows.size, self.n_free))
            A[np.arange(self.ub_rows.size), self.ub_rows] = 1.0
            blocks.append(A)
        return np.vstack(blocks) if blocks else np.zeros((0, self.n_free))

    # -- second derivatives ----------------------------------------------
    def hess_lagrangian(self, x, y, lam):
        lam_base = lam[: self.m_base] if self.m_base else np.zeros(0)
        if self.spec.lagrangian_hessian is not None:
            H = self.spec.lagrangian_hessian(self.embed(x), 1.0, y, lam_base)
            return np.asarray(H)[np.ix_(self.free_idx, self.free_idx)]

        def L(xd):
            zd = self.embed_dual2(xd)
            out = self.spec.objective(zd)
            if self.m_eq and y.size:
                out = out + ad.total(self.spec.eq(zd) * y)
            if self.m_base and lam_base.size:
                out = out + ad.total(self.spec.ineq(zd) * lam_base)
            return out

        seed = ad.Dual2.seed(x)
        out = L(seed)
        if isinstance(out, ad.Dual2):
            H = out.d2
        else:
            H = np.zeros((self.n_free, self.n_free))
        return 0.5 * (H + H.T)

    def embed_dual2(self, xd: ad.Dual2) -> ad.Dual2:
        val = self.embed(xd.val)
        k = xd.width
        d1 = np.zeros((val.size, k))
        d1[self.free_idx] = xd.d1
        d2 = np.zeros((val.size, k, k))
        d2[self.free_idx] = xd.d2
        return ad.Dual2(val, d1, d2)


def _ldl_factor(K):
    """Symmetric-indefinite factorisation with inertia.

    Returns (solve, (n_pos, n_neg, n_zero)).  Zero classification is
    relative to the largest pivot block, which is what the inertia
    correction needs to detect rank deficiency.
    """
    lu, d, perm = sla.ldl(K, lower=True, check_finite=False)
    nK = K.shape[0]
    L = lu[perm]
    blocks = []
    i = 0
    while i < nK:
        if i + 1 < nK and d[i + 1, i] != 0.0:
            blocks.append((i, 2))
            i += 2
        else:
            blocks.append((i, 1))
            i += 1
    pos = neg = zero = 0
    scale = max(np.max(np.abs(d)), 1e-300)
    tol0 = 1e-14 * scale
    for start, size in blocks:
        if size == 1:
            v = d[start, start]
            if abs(v) <= tol0:
                zero += 1
            elif v > 0:
                pos += 1
            else:
                neg += 1
        else:
            for v in np.linalg.eigvalsh(d[start:start + 2, start:start + 2]):
                if abs(v) <= tol0:
                    zero += 1
                elif v > 0:
                    pos += 1
                else:
                    neg += 1
    if zero:
        def solve(b):
            raise np.linalg.LinAlgError("singular KKT matrix")
        return solve, (pos, neg, zero)

    inv_perm = np.empty(nK, dtype=np.intp)
    inv_perm[perm] = np.arange(nK)

    def solve(b):
        w = sla.solve_triangular(L, b[perm], lower=True, unit_diagonal=True,
                                 check_finite=False)
        v = np.empty_like(w)
        for start, size in blocks:
            if size == 1:
                v[start] = w[start] / d[start, start]
            else:
                v[start:start + 2] = np.linalg.solve(d[start:start + 2, start:start + 2],
                                                     w[start:start + 2])
        u = sla.solve_triangular(L.T, v, lower=False, unit_diagonal=True,
                                 check_finite=False)
        return u[inv_perm]

    return solve, (pos, neg, zero)


def _cap_alpha(ws: _Workspace, x, dx, tau=0.99):
    """Largest step fraction keeping affine cap rows strictly satisfied.

    Uses the same fraction-to-boundary rule as the barrier slacks so the
    cap and the slack dynamics stay consistent for affine rows.
    """
    if not ws.cap_b.size:
        return 1.0
    slack = ws.cap_b - ws.cap_A @ x
    rate = ws.cap_A @ dx
    alpha = 1.0
    for r in range(slack.size):
        if rate[r] > 1e-14 and slack[r] > 0:
            alpha = min(alpha, tau * slack[r] / rate[r])
        elif rate[r] > 1e-14 and slack[r] <= 0:
            alpha = 0.0
    return alpha


def solve(spec: NlpSpec, tol: float = 1e-10, max_iter: int = 3000,
          hessian_mode: str = "exact", mu0: float = 1e-2,
          log_path: str | None = None, iterate_callback=None) -> NlpResult:
    """Minimise the problem in ``spec`` to a KKT point.

    On CONVERGED the returned point satisfies: Lagrangian stationarity
    within tol*(1+|f|), constraint violation within tol, and
    complementarity within tol*(1+|f|), up to a floating-point floor
    tied to the gradient magnitude.
    """
    # the dense factorisations here are small; BLAS thread fan-out costs
    # far more than it saves
    with threadpool_limits(limits=1):
        return _solve_impl(spec, tol, max_iter, hessian_mode, mu0,
                           log_path, iterate_callback)


def _solve_impl(spec: NlpSpec, tol: float, max_iter: int, hessian_mode: str,
                mu0: float, log_path, iterate_callback) -> NlpResult:
    ws = _Workspace(spec)
    n = ws.n_free
    x = ws.x0.copy()
    m_e, m_i = ws.m_eq, ws.m_in

    fval = ws.f(x)
    gf = ws.grad_f(x)
    hvec = ws.h(x)
    gvec = ws.g(x)
    Jh = ws.jac_h(x)
    Jg = ws.jac_g(x)

    # exact slacks where possible: affine rows then keep g + s = 0
    # identically, so the boundary fraction rule sees the true slack
    s = np.maximum(-gvec, 1e-8) if m_i else np.zeros(0)
    mu = mu0 if m_i else 0.0
    lam = np.clip(mu / s, 1e-8, 1e6) if m_i else np.zeros(0)
    if m_e:
        rhs = -(Jh @ (gf + (Jg.T @ lam if m_i else 0.0)))
        JJt = Jh @ Jh.T + 1e-12 * np.eye(m_e)
        try:
            y = np.linalg.solve(JJt, rhs)
        except np.linalg.LinAlgError:
            y = np.zeros(m_e)
    else:
        y = np.zeros(0)

    if hessian_mode == "bfgs":
        B = np.eye(n) * max(1.0, np.linalg.norm(gf, np.inf))
    elif hessian_mode != "exact":
        raise ValueError("hessian_mode must be 'exact' or 'bfgs'")

    nu = 1.0
    delta_last = 0.0
    merit_steps = []
    ls_failures = 0
    log_f = open(log_path, "w") if log_path else None
    status = NlpStatus.MAX_ITER
    message = ""
    it = 0
    eps = np.finfo(float).eps

    def kkt_errors(mu_val):
        r_d = gf + (Jh.T @ y if m_e else 0.0) + (Jg.T @ lam if m_i else 0.0)
        s_d = max(100.0, (np.sum(np.abs(lam)) + np.sum(np.abs(y))) / max(1, m_e + m_i)) / 100.0
        e_d = np.linalg.norm(r_d, np.inf) / s_d if n else 0.0
        e_h = np.linalg.norm(hvec, np.inf) if m_e else 0.0
        e_g = np.linalg.norm(gvec + s, np.inf) if m_i else 0.0
        e_c = np.linalg.norm(s * lam - mu_val, np.inf) / s_d if m_i else 0.0
        return r_d, e_d, max(e_h, e_g), e_c

    try:
        for it in range(1, max_iter + 1):
            r_d, e_d, e_p, e_c0 = kkt_errors(0.0)
            scale = 1.0 + abs(fval)
            stat_floor = 1e3 * eps * (1.0 + np.linalg.norm(gf, np.inf))
            if (e_d <= max(tol * scale, stat_floor) and e_p <= tol
                    and e_c0 <= max(tol * scale, stat_floor)):
                status = NlpStatus.CONVERGED
                break

            if m_i:
                _, b_d, b_p, b_c = kkt_errors(mu)
                if max(b_d, b_p, b_c) <= 10.0 * mu and mu > tol / 10.0:
                    mu = max(tol / 10.0, min(0.2 * mu, mu ** 1.5))

            H = ws.hess_lagrangian(x, y, lam) if hessian_mode == "exact" else B

            # full augmented KKT system; condensing the inequality block
            # would square the conditioning of nearly-active rows
            nK = n + m_e + m_i
            K = np.zeros((nK, nK))
            K[:n, :n] = H
            if m_e:
                K[:n, n:n + m_e] = Jh.T
                K[n:n + m_e, :n] = Jh
            if m_i:
                K[:n, n + m_e:] = Jg.T
                K[n + m_e:, :n] = Jg
                K[(np.arange(m_i) + n + m_e,) * 2] = -s / lam
            r_c = s * lam - mu if m_i else np.zeros(0)
            rhs = np.concatenate([
                -r_d,
                -hvec,
                -(gvec + s) + r_c / lam if m_i else np.zeros(0),
            ])

            # inertia target (n, m_e + m_i, 0); escalate the Hessian shift
            # starting near the last successful value, and shift the
            # equality block only if zero pivots persist
            deltas = [0.0]
            d_try = 1e-8 if delta_last == 0.0 else max(1e-8, delta_last / 10.0)
            while d_try <= 1e12:
                deltas.append(d_try)
                d_try *= 10.0
            solve_kkt = None
            diag_idx = (np.arange(n),) * 2
            eq_idx = (np.arange(m_e) + n,) * 2
            delta_c = 0.0
            for delta in deltas:
                K[diag_idx] = np.diagonal(H) + delta
                if m_e:
                    K[eq_idx] = -delta_c
                try:
                    fac, inertia = _ldl_factor(K)
                except np.linalg.LinAlgError:
                    continue
                if inertia[2] > 0 and m_e and delta_c == 0.0:
                    delta_c = 1e-10
                    K[eq_idx] = -delta_c
                    try:
                        fac, inertia = _ldl_factor(K)
                    except np.linalg.LinAlgError:
                        continue
                if inertia[0] == n and inertia[2] == 0:
                    solve_kkt = fac
                    break
            if solve_kkt is None:
                status = NlpStatus.NUMERICAL_FAILURE
                message = "KKT factorisation failed despite regularisation"
                break
            delta_last = delta if delta > 0.0 else 0.0

            sol = solve_kkt(rhs)
            for _ in range(2):  # iterative refinement
                resid = rhs - K @ sol
                if np.linalg.norm(resid, np.inf) <= 1e-14 * max(1.0, np.linalg.norm(rhs, np.inf)):
                    break
                sol = sol + solve_kkt(resid)
            if not np.all(np.isfinite(sol)):
                status = NlpStatus.NUMERICAL_FAILURE
                message = "non-finite KKT solution"
                break
            dx = sol[:n]
            dy = sol[n:n + m_e]
            dlam = sol[n + m_e:]
            ds = -(r_c + s * dlam) / lam if m_i else np.zeros(0)

            tau = max(0.99, 1.0 - mu) if m_i else 1.0
            alpha_max = _cap_alpha(ws, x, dx, tau)
            if m_i:
                neg = ds < 0
                if np.any(neg):
                    alpha_max = min(alpha_max, np.min(-tau * s[neg] / ds[neg]))
                negl = dlam < 0
                alpha_dual = 1.0
                if np.any(negl):
                    alpha_dual = min(1.0, np.min(-tau * lam[negl] / dlam[negl]))
            else:
                alpha_dual = 1.0
            alpha_max = min(alpha_max, 1.0)
            if alpha_max < 1e-12:
                # the direction is blocked at a boundary; count it as a line
                # search failure so the next system is regularised away from
                # the wall instead of freezing on microscopic steps
                ls_failures += 1
                delta_last = max(delta_last * 10.0, 1e-8)
                if ls_failures >= 8:
                    status = NlpStatus.NUMERICAL_FAILURE
                    message = "search direction blocked at constraint boundary"
                    break
                continue

            c1norm = (np.sum(np.abs(hvec)) if m_e else 0.0) + \
                     (np.sum(np.abs(gvec + s)) if m_i else 0.0)
            d_f = float(gf @ dx)
            d_bar = float(-mu * np.sum(ds / s)) if m_i else 0.0
            curv = float(dx @ (H @ dx)) + delta_last * float(dx @ dx)
            if m_i:
                curv += float(np.sum(lam / s * (Jg @ dx) ** 2))
            if c1norm > 1e-14:
                nu_req = (d_f + d_bar + 0.5 * max(0.0, curv)) / (0.5 * c1norm)
                nu = max(nu, 1.1 * nu_req + 1e-4)
            D = d_f + d_bar - nu * c1norm

            def merit(xt, st):
                ft = ws.f(xt)
                if not np.isfinite(ft):
                    return np.inf, ft, None, None
                ht = ws.h(xt)
                gt = ws.g(xt)
                val = ft + nu * (np.sum(np.abs(ht)) + np.sum(np.abs(gt + st)))
                if m_i:
                    if np.any(st <= 0):
                        return np.inf, ft, ht, gt
                    val -= mu * np.sum(np.log(st))
                return val, ft, ht, gt

            phi0 = fval + nu * c1norm - (mu * np.sum(np.log(s)) if m_i else 0.0)
            alpha = alpha_max
            accepted = False
            soc_tried = False
            for _ in range(60):
                if alpha < 1e-16:
                    break
                xt = x + alpha * dx
                st = s + alpha * ds if m_i else s
                phit, ft, ht, gt = merit(xt, st)
                if phit <= phi0 + 1e-4 * alpha * D + 10 * eps * (1 + abs(phi0)):
                    accepted = True
                    break
                if not soc_tried and alpha == alpha_max and np.isfinite(phit):
                    # second-order correction: cancel the constraint curvature
                    # picked up over the trial step, so good steps near curved
                    # active constraints are not rejected
                    soc_tried = True
                    rg_t = (gt + st) if m_i else np.zeros(0)
                    b1 = -(Jg.T @ (lam * rg_t / s)) if m_i else np.zeros(n)
                    dx_soc = kkt_resolve(b1, -ht if m_e else np.zeros(0))
                    ds_soc = (-rg_t - Jg @ dx_soc) if m_i else ds
                    x_c = xt + dx_soc
                    s_c = st + ds_soc if m_i else st
                    ok = _cap_alpha(ws, xt, dx_soc) >= 1.0 and \
                        (not m_i or np.all(s_c >= (1 - tau) * s))
                    if ok:
                        phic, fc, hc, gc = merit(x_c, s_c)
                        if phic <= phi0 + 1e-4 * alpha * D + 10 * eps * (1 + abs(phi0)):
                            xt, st = x_c, s_c
                            phit, ft, ht, gt = phic, fc, hc, gc
                            accepted = True
                            break
                alpha *= 0.5

            if not accepted:
                ls_failures += 1
                delta_last = max(delta_last * 10.0, 1e-8)
                if ls_failures >= 8:
                    status = NlpStatus.NUMERICAL_FAILURE
                    message = "line search failed repeatedly"
                    break
                continue
            ls_failures = 0
            merit_steps.append((phi0, phit))

            x = xt
            if m_i:
                s = st
                lam = lam + min(alpha, alpha_dual) * dlam
                # keep multipliers within a large factor of mu/s (primal-dual safeguard)
                s_safe = np.maximum(s, 1e-300)
                lam = np.clip(lam, mu / (1e10 * s_safe), 1e10 * mu / s_safe)
            if m_e:
                y = y + min(alpha, alpha_dual) * dy

            gf_new = ws.grad_f(x)
            if hessian_mode == "bfgs":
                sk = alpha * dx
                yk = (gf_new + (ws.jac_h(x).T @ y if m_e else 0.0)
                      + (ws.jac_g(x).T @ lam if m_i else 0.0)) - \
                     (gf + (Jh.T @ y if m_e else 0.0) + (Jg.T @ lam if m_i else 0.0))
                if np.linalg.norm(sk) > 0:
                    B, _ = bfgs_update(B, sk, yk)
            fval, hvec, gvec = ft, ht, gt
            gf = gf_new
            Jh = ws.jac_h(x)
            Jg = ws.jac_g(x)

            if log_f is not None:
                log_f.write(json.dumps({
                    "iter": it, "objective": fval,
                    "violation": float(max(np.max(np.abs(hvec)) if m_e else 0.0,
                                           np.max(gvec) if m_i else 0.0, 0.0)),
                    "mu": mu, "alpha": alpha,
                    "z_norm": float(np.linalg.norm(x, np.inf)),
                }) + "\n")
            if iterate_callback is not None:
                iterate_callback(it, ws.embed(x), {"objective": fval, "mu": mu,
                                                   "alpha": alpha})
    except NonFiniteDerivativeError as err:
        status = NlpStatus.NUMERICAL_FAILURE
        message = str(err)
    finally:
        if log_f is not None:
            log_f.close()

    r_d, e_d, e_p, e_c = kkt_errors(0.0)
    eq_viol = float(np.max(np.abs(hvec))) if m_e else 0.0
    in_viol = float(max(np.max(gvec), 0.0)) if m_i else 0.0
    return NlpResult(
        z=ws.embed(x), objective=fval,
        eq_violation=eq_viol, ineq_violation=in_viol,
        iterations=it, status=status,
        kkt_stationarity=float(e_d), kkt_complementarity=float(e_c),
        y=y.copy(), lam=lam.copy(), merit_steps=merit_steps, message=message,
    )
