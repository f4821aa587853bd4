"""Bounded-variable revised primal simplex.

Two phases over the slack-augmented system ``A x + s = b``.  Rows that the
all-at-lower-bound start leaves infeasible receive an artificial column;
phase one minimises the artificial sum and, when it stays positive, its
final row prices form a Farkas certificate.  The basis inverse is kept as a
sparse LU factor plus a product-form eta file that is rebuilt every
``refactor_every`` pivots.

Pricing is Dantzig's rule scaled by static column norms.  After
``stall_limit`` consecutive degenerate pivots the solver switches to
Bland's smallest-index rule until it makes progress again, which rules out
cycling.  Ties are always broken by index so runs are reproducible.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .model import EQ, GE, Status, Tolerances


class SingularBasisError(RuntimeError):
    pass


class _Factor:
    def __init__(self, M: sp.csc_matrix, basis: np.ndarray):
        B = M[:, basis].tocsc()
        try:
            self.lu = splu(B, permc_spec="COLAMD", options={"SymmetricMode": False})
        except RuntimeError as exc:
            raise SingularBasisError(str(exc)) from exc
        self.etas: list[tuple[int, np.ndarray, np.ndarray, float]] = []

    def ftran(self, v: np.ndarray) -> np.ndarray:
        x = self.lu.solve(v)
        for r, idx, vals, piv in self.etas:
            xr = x[r] / piv
            if xr != 0.0:
                x[idx] -= vals * xr
            x[r] = xr
        return x

    def btran(self, v: np.ndarray) -> np.ndarray:
        v = np.array(v, dtype=float)
        for r, idx, vals, piv in reversed(self.etas):
            v[r] = (v[r] - vals @ v[idx]) / piv
        return self.lu.solve(v, trans="T")

    def update(self, r: int, alpha: np.ndarray) -> None:
        idx = np.flatnonzero(alpha)
        idx = idx[idx != r]
        self.etas.append((r, idx, alpha[idx].copy(), float(alpha[r])))


class _Simplex:
    def __init__(self, A, senses, rhs, lb, ub, c, tol: Tolerances,
                 max_iter: int, refactor_every: int = 60, stall_limit: int = 50):
        self.tol = tol
        self.max_iter = max_iter
        self.refactor_every = refactor_every
        self.stall_limit = stall_limit
        m, n = A.shape
        self.m, self.n = m, n
        self.sigma = np.where(senses == GE, -1.0, 1.0)
        Ahat = sp.diags(self.sigma) @ sp.csr_matrix(A)
        self.b = self.sigma * rhs

        slack_ub = np.where(senses == EQ, 0.0, np.inf)
        x0 = lb.copy()
        resid = self.b - Ahat @ x0
        need_art = np.where(senses == EQ, np.abs(resid) > tol.feas, resid < -tol.feas)
        art_rows = np.flatnonzero(need_art)
        art_sign = np.sign(resid[art_rows])
        self.n_art = len(art_rows)

        art = sp.csc_matrix((art_sign, (art_rows, np.arange(self.n_art))),
                            shape=(m, self.n_art))
        self.M = sp.hstack([Ahat.tocsc(), sp.identity(m, format="csc"), art], format="csc")
        self.MT = self.M.T.tocsr()
        ntot = n + m + self.n_art
        self.ntot = ntot
        self.lb = np.concatenate([lb, np.zeros(m), np.zeros(self.n_art)])
        self.ub = np.concatenate([ub, slack_ub, np.full(self.n_art, np.inf)])
        self.cost2 = np.concatenate([c, np.zeros(m + self.n_art)])
        self.cost1 = np.concatenate([np.zeros(n + m), np.ones(self.n_art)])
        col_sq = np.asarray(self.M.multiply(self.M).sum(axis=0)).ravel()
        self.weight = 1.0 + col_sq

        basis = np.arange(n, n + m)
        basis[art_rows] = n + m + np.arange(self.n_art)
        self.basis = basis
        self.is_basic = np.zeros(ntot, dtype=bool)
        self.is_basic[basis] = True
        self.at_upper = np.zeros(ntot, dtype=bool)
        self.x = np.concatenate([x0, np.zeros(m), np.zeros(self.n_art)])
        self.iterations = 0
        self.pivots_since_factor = 0
        self.factor = None

    def _column(self, j: int) -> np.ndarray:
        v = np.zeros(self.m)
        lo, hi = self.M.indptr[j], self.M.indptr[j + 1]
        v[self.M.indices[lo:hi]] = self.M.data[lo:hi]
        return v

    def _refactor(self) -> None:
        self.factor = _Factor(self.M, self.basis)
        self.pivots_since_factor = 0
        xn = np.where(self.is_basic, 0.0, self.x)
        xb = self.factor.ftran(self.b - self.M @ xn)
        self.x[self.basis] = xb

    def run(self, phase: int) -> Status:
        cost = self.cost1 if phase == 1 else self.cost2
        tol = self.tol
        fixed = self.ub - self.lb <= 0.0
        degenerate_run = 0
        bland = False
        if self.factor is None:
            self._refactor()
        while True:
            if phase == 1 and self.x[self.n + self.m:].sum() <= tol.feas:
                return Status.OPTIMAL
            if self.iterations >= self.max_iter:
                return Status.ITERATION_LIMIT
            if self.pivots_since_factor >= self.refactor_every:
                self._refactor()
            pi = self.factor.btran(cost[self.basis])
            d = cost - self.MT @ pi
            elig = ~self.is_basic & ~fixed & np.where(
                self.at_upper, d > tol.opt, d < -tol.opt)
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                self.pi, self.d = pi, d
                return Status.OPTIMAL
            if bland:
                q = int(cand[0])
            else:
                score = d[cand] ** 2 / self.weight[cand]
                q = int(cand[np.argmax(score)])
            direction = -1.0 if self.at_upper[q] else 1.0
            alpha = self.factor.ftran(self._column(q))
            delta = direction * alpha
            xb = self.x[self.basis]
            lbb = self.lb[self.basis]
            ubb = self.ub[self.basis]

            dec = delta > tol.pivot
            inc = (delta < -tol.pivot) & np.isfinite(ubb)
            theta_exact = np.full(self.m, np.inf)
            theta_relax = np.full(self.m, np.inf)
            theta_exact[dec] = (xb[dec] - lbb[dec]) / delta[dec]
            theta_relax[dec] = (xb[dec] - lbb[dec] + tol.feas) / delta[dec]
            theta_exact[inc] = (ubb[inc] - xb[inc]) / -delta[inc]
            theta_relax[inc] = (ubb[inc] - xb[inc] + tol.feas) / -delta[inc]
            np.maximum(theta_exact, 0.0, out=theta_exact)
            theta_flip = self.ub[q] - self.lb[q]

            rows = np.flatnonzero(dec | inc)
            r = -1
            theta = np.inf
            if rows.size:
                if bland:
                    tmin = theta_exact[rows].min()
                    ties = rows[theta_exact[rows] <= tmin + 1e-12]
                    r = int(ties[np.argmin(self.basis[ties])])
                else:
                    tmax = theta_relax[rows].min()
                    ties = rows[theta_exact[rows] <= tmax]
                    r = int(ties[np.argmax(np.abs(delta[ties]))])
                theta = theta_exact[r]

            if theta_flip <= theta:
                if not np.isfinite(theta_flip):
                    self.unbounded_col = q
                    return Status.UNBOUNDED
                self.x[self.basis] = xb - delta * theta_flip
                self.x[q] = self.ub[q] if direction > 0 else self.lb[q]
                self.at_upper[q] = direction > 0
                step = theta_flip
            else:
                leave = int(self.basis[r])
                self.x[self.basis] = xb - delta * theta
                self.x[q] = self.x[q] + direction * theta
                if delta[r] > 0:
                    self.x[leave] = self.lb[leave]
                    self.at_upper[leave] = False
                else:
                    self.x[leave] = self.ub[leave]
                    self.at_upper[leave] = True
                if fixed[leave]:
                    self.at_upper[leave] = False
                self.is_basic[leave] = False
                self.is_basic[q] = True
                self.at_upper[q] = False
                self.basis[r] = q
                self.factor.update(r, alpha)
                self.pivots_since_factor += 1
                step = theta
            self.iterations += 1
            if step <= 1e-12:
                degenerate_run += 1
                if degenerate_run >= self.stall_limit:
                    bland = True
            else:
                degenerate_run = 0
                bland = False


def simplex(A, senses, rhs, lb, ub, c, tol: Tolerances | None = None,
            iteration_limit: int | None = None):
    """Solve ``min c x`` over rows and bounds without presolve.

    Returns ``(status, x, y, d, ray, iterations)`` in the caller's row and
    column space.  ``y``/``d`` are set when optimal, ``ray`` when infeasible.
    """
    tol = tol or Tolerances()
    m, n = A.shape
    if iteration_limit is None:
        iteration_limit = max(20000, 60 * (m + n))
    S = _Simplex(A, senses, rhs, lb, ub, c, tol, iteration_limit)
    if S.n_art:
        st = S.run(phase=1)
        if st is Status.ITERATION_LIMIT:
            return st, None, None, None, None, S.iterations
        S._refactor()
        infeas = S.x[n + m:].sum()
        if infeas > max(tol.feas, 1e-9 * (1.0 + np.abs(S.b).max(initial=0.0))):
            pi = S.factor.btran(S.cost1[S.basis])
            ray = S.sigma * pi
            return Status.INFEASIBLE, None, None, None, ray, S.iterations
        S.ub[n + m:] = 0.0
        S.x[n + m:] = np.where(S.is_basic[n + m:], S.x[n + m:], 0.0)
    st = S.run(phase=2)
    if st is not Status.OPTIMAL:
        return st, None, None, None, None, S.iterations
    S._refactor()
    pi = S.factor.btran(S.cost2[S.basis])
    y = S.sigma * pi
    x = S.x[:n].copy()
    d = c - sp.csr_matrix(A).T @ y
    return Status.OPTIMAL, x, y, d, None, S.iterations
