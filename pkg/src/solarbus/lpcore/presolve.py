"""Light presolve: fixed columns, empty rows/columns, singleton rows.

Singleton rows become bounds on their column.  The row that produced each
tightened bound is remembered so that row duals (and Farkas rays) can be
recovered in the original row space afterwards.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import EQ, GE, LE, LpStandardForm


@dataclass
class Presolved:
    lp: LpStandardForm
    row_map: np.ndarray
    col_map: np.ndarray
    x_removed: dict[int, float]
    removed_order: list[int]
    lb_src: np.ndarray
    ub_src: np.ndarray
    unbounded: bool = False
    stats: dict = field(default_factory=dict)


def presolve(lp: LpStandardForm, feas_tol: float = 1e-9) -> Presolved | None:
    """Reduce ``lp``; returns ``None`` when presolve itself proves infeasibility
    (the caller then solves the original problem to obtain a certificate)."""
    m, n = lp.A.shape
    A_csr = lp.A.tocsr()
    A_csc = lp.A.tocsc()
    lb, ub = lp.lb.copy(), lp.ub.copy()
    rhs = lp.rhs.copy()
    row_alive = np.ones(m, dtype=bool)
    col_alive = np.ones(n, dtype=bool)
    lb_src = np.full(n, -1)
    ub_src = np.full(n, -1)
    x_removed: dict[int, float] = {}
    removed_order: list[int] = []
    unbounded = False
    n_singleton = 0

    def remove_col(j: int, value: float) -> None:
        col_alive[j] = False
        x_removed[j] = value
        removed_order.append(j)
        lo, hi = A_csc.indptr[j], A_csc.indptr[j + 1]
        rhs[A_csc.indices[lo:hi]] -= A_csc.data[lo:hi] * value

    changed = True
    while changed:
        changed = False
        for j in np.flatnonzero(col_alive & (ub - lb <= 0.0)):
            remove_col(int(j), float(lb[j]))
            changed = True

        alive_f = col_alive.astype(float)
        nz = A_csr.copy()
        nz.data = (nz.data != 0).astype(float)
        counts = nz @ alive_f
        for i in np.flatnonzero(row_alive & (counts == 0)):
            r, s = rhs[i], lp.senses[i]
            if (s == LE and r < -feas_tol) or (s == GE and r > feas_tol) or (
                    s == EQ and abs(r) > feas_tol):
                return None
            row_alive[i] = False
            changed = True
        for i in np.flatnonzero(row_alive & (counts == 1)):
            lo, hi = A_csr.indptr[i], A_csr.indptr[i + 1]
            cols = A_csr.indices[lo:hi]
            vals = A_csr.data[lo:hi]
            keep = col_alive[cols] & (vals != 0)
            if keep.sum() != 1:
                continue
            j = int(cols[keep][0])
            a = float(vals[keep][0])
            bnd = rhs[i] / a
            s = lp.senses[i]
            gives_ub = s == EQ or (s == LE) == (a > 0)
            gives_lb = s == EQ or (s == GE) == (a > 0)
            if gives_ub and bnd < ub[j]:
                ub[j] = bnd
                ub_src[j] = i
            if gives_lb and bnd > lb[j]:
                lb[j] = bnd
                lb_src[j] = i
            if lb[j] > ub[j] + feas_tol * (1.0 + abs(lb[j])):
                return None
            if lb[j] > ub[j]:
                ub[j] = lb[j]
            row_alive[i] = False
            n_singleton += 1
            changed = True

        col_counts = (nz[row_alive] if row_alive.any() else nz[:0]).sum(axis=0)
        col_counts = np.asarray(col_counts).ravel()
        for j in np.flatnonzero(col_alive & (col_counts == 0)):
            cj = lp.c[j]
            if cj < 0:
                if np.isinf(ub[j]):
                    unbounded = True
                    value = lb[j]
                else:
                    value = ub[j]
            else:
                value = lb[j]
            remove_col(int(j), float(value))
            changed = True

    row_map = np.flatnonzero(row_alive)
    col_map = np.flatnonzero(col_alive)
    red = LpStandardForm(
        A_csr[row_map][:, col_map], lp.senses[row_map], rhs[row_map],
        lb[col_map], ub[col_map], lp.c[col_map], name=lp.name,
    )
    return Presolved(red, row_map, col_map, x_removed, removed_order, lb_src, ub_src,
                     unbounded, {"singleton_rows": n_singleton,
                                 "removed_rows": m - len(row_map),
                                 "removed_cols": n - len(col_map)})


def push_to_source_rows(lp: LpStandardForm, P: Presolved, y: np.ndarray,
                        cost: np.ndarray) -> np.ndarray:
    """Move multiplier mass from presolve-tightened bounds onto the rows
    that produced them.

    ``cost`` is the objective for dual recovery, or zeros for a Farkas ray.
    For each column whose tightened bound is the one its reduced value
    ``g = cost_j - (y @ A)_j`` leans on, the source row gets ``g / a_rj`` so
    the column's ``g`` becomes zero.  Columns are visited so that rows
    removed later are settled before the columns they touch.
    """
    y = y.copy()
    A_csc = lp.A.tocsc()
    order = list(P.col_map) + list(reversed(P.removed_order))
    for j in order:
        if P.lb_src[j] < 0 and P.ub_src[j] < 0:
            continue
        lo, hi = A_csc.indptr[j], A_csc.indptr[j + 1]
        rows, vals = A_csc.indices[lo:hi], A_csc.data[lo:hi]
        g = cost[j] - vals @ y[rows]
        src = P.lb_src[j] if g > 0 else P.ub_src[j] if g < 0 else -1
        if src < 0:
            continue
        a = vals[rows == src][0]
        y[src] += g / a
    return y
