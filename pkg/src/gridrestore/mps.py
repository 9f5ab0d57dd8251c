"""Fixed-format MPS export/import and the plain-text solution format.

Row and column names longer than the 8-character MPS field are replaced
by deterministic code names; the original labels are emitted in comment
lines ("* NAME <code> <label>") so files stay self-describing.
"""

from __future__ import annotations

import logging
import re

import numpy as np

from .bnb import MilpSolution, SolveStats
from .model import LinearConstraint, MilpModel, VariableHandle

logger = logging.getLogger(__name__)

__all__ = ["export_mps", "read_mps", "import_solution", "write_solution", "MpsError"]

_SENSE_TO_ROW = {"<=": "L", ">=": "G", "=": "E"}
_ROW_TO_SENSE = {"L": "<=", "G": ">=", "E": "="}
_NAME_RE = re.compile(r"^[A-Za-z0-9_]{1,8}$")


class MpsError(ValueError):
    pass


def _short_names(labels: list[str], prefix: str) -> tuple[list[str], list[str]]:
    used: set[str] = set()
    out: list[str] = []
    comments: list[str] = []
    for i, label in enumerate(labels):
        cand = re.sub(r"[^A-Za-z0-9_]", "_", label)
        if not _NAME_RE.match(cand) or cand in used:
            cand = f"{prefix}{i + 1:05d}"
            comments.append(f"* NAME {cand} {label}")
        used.add(cand)
        out.append(cand)
    return out, comments


def _fmt(value: float) -> str:
    return f"{value:.12G}"


def _field_line(f1: str, f2: str, f3: str = "", f4: str = "", f5: str = "", f6: str = "") -> str:
    line = f" {f1:<2} {f2:<9} {f3:<9} {f4:<14}"
    if f5:
        line += f" {f5:<9} {f6:<14}"
    return line.rstrip()


def export_mps(model: MilpModel, name: str = "RESTORE") -> str:
    col_names, col_comments = _short_names([v.name for v in model.variables], "C")
    row_names, row_comments = _short_names([c.label for c in model.constraints], "R")

    lines = [f"* minimization problem, {model.n_variables} columns, {len(model.constraints)} rows"]
    lines.extend(col_comments)
    lines.extend(row_comments)
    lines.append(f"NAME          {name}")
    lines.append("ROWS")
    lines.append(" N  OBJ")
    for con, rname in zip(model.constraints, row_names):
        lines.append(f" {_SENSE_TO_ROW[con.sense]}  {rname}")

    entries: dict[int, list[tuple[str, float]]] = {i: [] for i in range(model.n_variables)}
    for idx, coef in enumerate(model.objective):
        if coef != 0.0:
            entries[idx].append(("OBJ", float(coef)))
    for con, rname in zip(model.constraints, row_names):
        for idx, coef in con.terms:
            entries[idx].append((rname, float(coef)))

    lines.append("COLUMNS")
    in_integer = False
    marker = 0
    for var, cname in zip(model.variables, col_names):
        if var.is_binary and not in_integer:
            marker += 1
            lines.append(_field_line("", f"M{marker:<7}", "'MARKER'", "", "'INTORG'", " "))
            in_integer = True
        if not var.is_binary and in_integer:
            marker += 1
            lines.append(_field_line("", f"M{marker:<7}", "'MARKER'", "", "'INTEND'", " "))
            in_integer = False
        cells = entries[var.index]
        if not cells:
            cells = [("OBJ", 0.0)]  # keep empty columns declared
        for rname, coef in cells:
            lines.append(_field_line("", cname, rname, _fmt(coef)))
    if in_integer:
        marker += 1
        lines.append(_field_line("", f"M{marker:<7}", "'MARKER'", "", "'INTEND'", " "))

    lines.append("RHS")
    for con, rname in zip(model.constraints, row_names):
        if con.rhs != 0.0:
            lines.append(_field_line("", "RHS", rname, _fmt(con.rhs)))

    lines.append("BOUNDS")
    for var, cname in zip(model.variables, col_names):
        lb, ub = var.lb, var.ub
        if var.is_binary:
            lines.append(_field_line("UP", "BND", cname, _fmt(ub)))
            if lb != 0.0:
                lines.append(_field_line("LO", "BND", cname, _fmt(lb)))
            continue
        if lb == ub:
            lines.append(_field_line("FX", "BND", cname, _fmt(lb)))
            continue
        if np.isneginf(lb) and np.isposinf(ub):
            lines.append(_field_line("FR", "BND", cname))
            continue
        if np.isneginf(lb):
            lines.append(_field_line("MI", "BND", cname))
        elif lb != 0.0:
            lines.append(_field_line("LO", "BND", cname, _fmt(lb)))
        if not np.isposinf(ub):
            lines.append(_field_line("UP", "BND", cname, _fmt(ub)))
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def read_mps(text: str) -> MilpModel:
    """Rebuild a model from fixed-format MPS (as written by export_mps)."""
    section = None
    obj_row = None
    row_order: list[str] = []
    row_sense: dict[str, str] = {}
    col_order: list[str] = []
    col_entries: dict[str, list[tuple[str, float]]] = {}
    col_integer: dict[str, bool] = {}
    rhs: dict[str, float] = {}
    bounds: dict[str, list[float]] = {}
    in_integer = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("*"):
            continue
        head = raw[:1].strip()
        tokens = raw.split()
        if head:  # section headers start in column 1
            word = tokens[0].upper()
            if word in ("NAME",):
                section = None
                continue
            if word in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS"):
                section = word
                continue
            if word == "ENDATA":
                break
            raise MpsError(f"line {lineno}: unknown section {tokens[0]!r}")

        if section == "ROWS":
            sense, rname = tokens[0].upper(), tokens[1]
            if sense == "N":
                if obj_row is None:
                    obj_row = rname
                continue
            if sense not in _ROW_TO_SENSE:
                raise MpsError(f"line {lineno}: unknown row sense {sense!r}")
            row_order.append(rname)
            row_sense[rname] = _ROW_TO_SENSE[sense]
        elif section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1] == "'MARKER'":
                in_integer = tokens[2] == "'INTORG'"
                continue
            cname = tokens[0]
            if cname not in col_entries:
                col_entries[cname] = []
                col_order.append(cname)
                col_integer[cname] = in_integer
            pairs = tokens[1:]
            if len(pairs) % 2:
                raise MpsError(f"line {lineno}: dangling column entry")
            for rname, val in zip(pairs[::2], pairs[1::2]):
                col_entries[cname].append((rname, float(val)))
        elif section == "RHS":
            pairs = tokens[1:]
            for rname, val in zip(pairs[::2], pairs[1::2]):
                rhs[rname] = float(val)
        elif section == "BOUNDS":
            btype = tokens[0].upper()
            cname = tokens[2]
            if cname not in bounds:
                default_ub = 1.0 if col_integer.get(cname) else np.inf
                bounds[cname] = [0.0, default_ub]
            if btype == "UP":
                bounds[cname][1] = float(tokens[3])
            elif btype == "LO":
                bounds[cname][0] = float(tokens[3])
            elif btype == "FX":
                bounds[cname] = [float(tokens[3])] * 2
            elif btype == "FR":
                bounds[cname] = [-np.inf, np.inf]
            elif btype == "MI":
                bounds[cname][0] = -np.inf
            elif btype == "BV":
                bounds[cname] = [0.0, 1.0]
            else:
                raise MpsError(f"line {lineno}: unsupported bound type {btype!r}")
        elif section == "RANGES":
            raise MpsError("RANGES section not supported")
        elif section is None:
            continue

    variables = []
    objective = np.zeros(len(col_order))
    name_to_idx = {}
    for i, cname in enumerate(col_order):
        lb, ub = bounds.get(cname, [0.0, 1.0 if col_integer[cname] else np.inf])
        variables.append(
            VariableHandle(
                index=i,
                name=cname,
                kind=cname.split("_", 1)[0],
                node=None,
                der=None,
                alpha=None,
                lb=lb,
                ub=ub,
                is_binary=col_integer[cname] and lb >= 0.0 and ub <= 1.0,
            )
        )
        name_to_idx[cname] = i

    per_row: dict[str, list[tuple[int, float]]] = {r: [] for r in row_order}
    for cname, cells in col_entries.items():
        for rname, val in cells:
            if rname == obj_row:
                objective[name_to_idx[cname]] += val
            elif rname in per_row:
                per_row[rname].append((name_to_idx[cname], val))
            else:
                raise MpsError(f"column {cname} references unknown row {rname}")

    constraints = [
        LinearConstraint(
            terms=tuple(sorted(per_row[r])),
            sense=row_sense[r],
            rhs=rhs.get(r, 0.0),
            label=r,
        )
        for r in row_order
    ]
    return MilpModel(
        variables=variables,
        constraints=constraints,
        objective=objective,
        t_net=float("inf"),
        metadata={"families": {}, "kinds": {}, "binaries": sum(col_integer.values()),
                  "rows": len(constraints)},
        context=None,
    )


# ---------------------------------------------------------------------------
# solution files
# ---------------------------------------------------------------------------


def write_solution(model: MilpModel, values: np.ndarray, header: str = "") -> str:
    lines = []
    if header:
        lines.append(f"# {header}")
    for var in model.variables:
        lines.append(f"{var.name} {values[var.index]:.17G}")
    return "\n".join(lines) + "\n"


def import_solution(model: MilpModel, text: str) -> MilpSolution:
    """Read a 'name value' solution file against the model's variables.

    Unknown names are rejected; variables absent from the file default
    to zero with a warning.
    """
    values = np.zeros(model.n_variables)
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise MpsError(f"solution line {lineno}: expected 'name value', got {raw!r}")
        name, sval = parts
        if name not in model.name_to_index:
            raise MpsError(f"solution line {lineno}: unknown variable {name!r}")
        try:
            val = float(sval)
        except ValueError as exc:
            raise MpsError(f"solution line {lineno}: bad number {sval!r}") from exc
        values[model.name_to_index[name]] = val
        seen.add(name)
    missing = [v.name for v in model.variables if v.name not in seen]
    if missing:
        logger.warning(
            "solution file misses %d variable(s) (defaulted to 0), first: %s",
            len(missing), missing[0],
        )
    objective = float(model.objective @ values)
    return MilpSolution(
        status="feasible",
        objective=objective,
        values=values,
        gap=0.0,
        stats=SolveStats(),
    )
