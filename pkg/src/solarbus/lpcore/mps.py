"""Fixed-column MPS export/import for cross-checking with external solvers.

Only what :class:`LpStandardForm` can express is supported: one ``N`` row,
``L``/``G``/``E`` rows, and ``LO``/``UP``/``FX``/``PL`` bounds.  Names longer
than eight characters (or containing blanks) are replaced by generated
``R0000001``/``C0000001`` names.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .model import LpStandardForm


def _num(v: float) -> str:
    s = repr(float(v))
    if s.endswith(".0"):
        s = s[:-2]
    if len(s) <= 12:
        return s
    for p in range(12, 0, -1):
        s = f"{v:.{p}g}"
        if len(s) <= 12:
            return s
    raise ValueError(f"cannot fit {v!r} into a 12-character MPS field")


def _names(given, prefix: str, count: int) -> list[str]:
    if given is not None and len(given) == count and all(
            0 < len(nm) <= 8 and " " not in nm for nm in given) and len(set(given)) == count:
        return list(given)
    return [f"{prefix}{i:07d}" for i in range(count)]


def write_mps(lp: LpStandardForm, path) -> Path:
    path = Path(path)
    rows = _names(lp.row_names, "R", lp.n_rows)
    cols = _names(lp.col_names, "C", lp.n_cols)
    name = (lp.name or "LP").replace(" ", "_")[:8]
    A = lp.A.tocsc()
    out = [f"NAME          {name}", "ROWS", " N  OBJ"]
    out += [f" {s}  {r}" for s, r in zip(lp.senses, rows)]
    out.append("COLUMNS")
    for j, cname in enumerate(cols):
        lo, hi = A.indptr[j], A.indptr[j + 1]
        entries = []
        if lp.c[j] != 0:
            entries.append(("OBJ", lp.c[j]))
        entries += [(rows[i], v) for i, v in zip(A.indices[lo:hi], A.data[lo:hi]) if v != 0]
        if not entries:
            entries = [("OBJ", 0.0)]
        for k in range(0, len(entries), 2):
            pair = entries[k:k + 2]
            line = f"    {cname:<8}  {pair[0][0]:<8}  {_num(pair[0][1]):>12}"
            if len(pair) == 2:
                line += f"   {pair[1][0]:<8}  {_num(pair[1][1]):>12}"
            out.append(line)
    out.append("RHS")
    nzr = [(rows[i], v) for i, v in enumerate(lp.rhs) if v != 0]
    for k in range(0, len(nzr), 2):
        pair = nzr[k:k + 2]
        line = f"    {'RHS':<8}  {pair[0][0]:<8}  {_num(pair[0][1]):>12}"
        if len(pair) == 2:
            line += f"   {pair[1][0]:<8}  {_num(pair[1][1]):>12}"
        out.append(line)
    out.append("BOUNDS")
    for j, cname in enumerate(cols):
        lo, hi = lp.lb[j], lp.ub[j]
        if lo == hi:
            out.append(f" FX {'BND':<8}  {cname:<8}  {_num(lo):>12}")
            continue
        if lo != 0 or (np.isfinite(hi) and hi < 0):
            out.append(f" LO {'BND':<8}  {cname:<8}  {_num(lo):>12}")
        if np.isfinite(hi):
            out.append(f" UP {'BND':<8}  {cname:<8}  {_num(hi):>12}")
    out.append("ENDATA")
    path.write_text("\n".join(out) + "\n")
    return path


def read_mps(path) -> LpStandardForm:
    section = None
    obj_row = None
    row_index: dict[str, int] = {}
    senses: list[str] = []
    row_names: list[str] = []
    col_index: dict[str, int] = {}
    col_names: list[str] = []
    entries: list[tuple[int, int, float]] = []
    cost: dict[int, float] = {}
    rhs: dict[int, float] = {}
    bounds: list[tuple[str, str, float]] = []
    name = "LP"
    for raw in Path(path).read_text().splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()
            section = head[0].upper()
            if section == "NAME" and len(head) > 1:
                name = head[1]
            if section == "RANGES":
                raise ValueError("RANGES section is not supported")
            if section == "ENDATA":
                break
            continue
        tok = raw.split()
        if section == "ROWS":
            kind, rname = tok[0].upper(), tok[1]
            if kind == "N":
                if obj_row is None:
                    obj_row = rname
                continue
            row_index[rname] = len(senses)
            senses.append(kind)
            row_names.append(rname)
        elif section == "COLUMNS":
            if "'MARKER'" in tok:
                raise ValueError("integer markers are not supported")
            cname = tok[0]
            if cname not in col_index:
                col_index[cname] = len(col_names)
                col_names.append(cname)
            j = col_index[cname]
            for rname, val in zip(tok[1::2], tok[2::2]):
                if rname == obj_row:
                    cost[j] = float(val)
                elif rname in row_index:
                    entries.append((row_index[rname], j, float(val)))
                else:
                    raise ValueError(f"unknown row {rname!r} in COLUMNS")
        elif section == "RHS":
            pairs = tok[1:] if len(tok) % 2 == 1 else tok
            for rname, val in zip(pairs[0::2], pairs[1::2]):
                if rname in row_index:
                    rhs[row_index[rname]] = float(val)
        elif section == "BOUNDS":
            kind = tok[0].upper()
            if kind in ("MI", "FR", "BV", "LI", "UI", "SC"):
                raise ValueError(f"bound type {kind} is not supported")
            cname = tok[2] if len(tok) >= 3 and kind != "PL" else tok[-1]
            val = float(tok[3]) if len(tok) >= 4 else 0.0
            bounds.append((kind, cname, val))
    m, n = len(senses), len(col_names)
    r, c, v = zip(*entries) if entries else ((), (), ())
    A = sp.csr_matrix((v, (r, c)), shape=(m, n))
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for kind, cname, val in bounds:
        j = col_index[cname]
        if kind == "UP":
            ub[j] = val
        elif kind == "LO":
            lb[j] = val
        elif kind == "FX":
            lb[j] = ub[j] = val
        elif kind == "PL":
            ub[j] = np.inf
    return LpStandardForm(
        A, np.array(senses), np.array([rhs.get(i, 0.0) for i in range(m)]), lb, ub,
        np.array([cost.get(j, 0.0) for j in range(n)]), row_names, col_names, name,
    )
