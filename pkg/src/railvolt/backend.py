"""Thin abstraction over the LP/MILP engine.

This is the only module that talks to a third-party solver. Models are
described engine-neutrally (columns, rows, senses), solved through an
adapter, and can be dumped to / read from the textual LP interchange format
for debugging. The adapter is chosen via the ``RAILVOLT_SOLVER`` environment
variable (default: ``scipy``, which drives HiGHS through
``scipy.optimize.linprog`` / ``milp``).

Dual-value convention: the dual of a row is d(objective)/d(rhs) in the row's
*stated* sense. For a minimization problem that makes duals of ``>=`` rows
nonnegative and duals of ``<=`` rows nonpositive.
"""

from __future__ import annotations

import os
import re
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog, milp, LinearConstraint, Bounds

from .domain import RailvoltError

CONTINUOUS = "continuous"
BINARY = "binary"
GE, LE, EQ = ">=", "<=", "="
_SENSES = (GE, LE, EQ)


class BackendError(RailvoltError):
    """The engine failed or returned something unusable."""


class CapabilityError(BackendError):
    """The request is outside what the adapter supports (e.g. duals on MILPs)."""


# ---------------------------------------------------------------------------
# Model description
# ---------------------------------------------------------------------------

@dataclass
class Column:
    id: str
    kind: str
    lower: float
    upper: float
    objective: float


@dataclass
class Row:
    id: str
    indices: List[int]
    values: List[float]
    sense: str
    rhs: float


class AbstractModel:
    """A minimize-sense linear model with continuous and binary columns."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.columns: List[Column] = []
        self.rows: List[Row] = []
        self.objective_offset: float = 0.0
        self._col_ids: Dict[str, int] = {}
        self._row_ids: Dict[str, int] = {}

    # -- construction -------------------------------------------------------

    def add_column(self, cid: str, kind: str = CONTINUOUS, lower: float = 0.0,
                   upper: float = np.inf, objective: float = 0.0) -> int:
        if cid in self._col_ids:
            raise BackendError(f"duplicate column id {cid!r}")
        if kind == BINARY:
            lower, upper = 0.0, 1.0
        elif kind != CONTINUOUS:
            raise BackendError(f"unknown column kind {kind!r}")
        if not (lower <= upper):
            raise BackendError(f"column {cid!r}: lower {lower} > upper {upper}")
        if not np.isfinite(objective):
            raise BackendError(f"column {cid!r}: non-finite objective")
        idx = len(self.columns)
        self.columns.append(Column(cid, kind, float(lower), float(upper),
                                   float(objective)))
        self._col_ids[cid] = idx
        return idx

    def add_row(self, rid: str, entries: Sequence[Tuple[int, float]],
                sense: str, rhs: float) -> int:
        if rid in self._row_ids:
            raise BackendError(f"duplicate row id {rid!r}")
        if sense not in _SENSES:
            raise BackendError(f"unknown row sense {sense!r}")
        if not np.isfinite(rhs):
            raise BackendError(f"row {rid!r}: non-finite rhs")
        indices, values = [], []
        for ci, val in entries:
            if val == 0.0:
                continue
            if not (0 <= ci < len(self.columns)):
                raise BackendError(f"row {rid!r}: unknown column index {ci}")
            if not np.isfinite(val):
                raise BackendError(f"row {rid!r}: non-finite coefficient")
            indices.append(int(ci))
            values.append(float(val))
        idx = len(self.rows)
        self.rows.append(Row(rid, indices, values, sense, float(rhs)))
        self._row_ids[rid] = idx
        return idx

    def fix_column(self, idx: int, value: float) -> None:
        """Pin a column to a value (must lie within its declared bounds)."""
        col = self.columns[idx]
        if not (col.lower - 1e-12 <= value <= col.upper + 1e-12):
            raise BackendError(
                f"cannot fix {col.id!r} to {value} outside "
                f"[{col.lower}, {col.upper}]")
        col.lower = col.upper = float(value)

    # -- introspection ------------------------------------------------------

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column_index(self, cid: str) -> int:
        return self._col_ids[cid]

    @property
    def has_integers(self) -> bool:
        return any(c.kind == BINARY for c in self.columns)

    def constraint_matrix(self) -> sp.csr_matrix:
        data, ri, ci = [], [], []
        for r, row in enumerate(self.rows):
            ri.extend([r] * len(row.indices))
            ci.extend(row.indices)
            data.extend(row.values)
        return sp.csr_matrix((data, (ri, ci)),
                             shape=(self.n_rows, self.n_cols))

    def arrays(self):
        """(c, lb, ub, integrality, A, senses, rhs) as numpy/scipy objects."""
        c = np.array([col.objective for col in self.columns])
        lb = np.array([col.lower for col in self.columns])
        ub = np.array([col.upper for col in self.columns])
        integrality = np.array(
            [1 if col.kind == BINARY else 0 for col in self.columns])
        senses = np.array([row.sense for row in self.rows])
        rhs = np.array([row.rhs for row in self.rows])
        return c, lb, ub, integrality, self.constraint_matrix(), senses, rhs


# ---------------------------------------------------------------------------
# Outcomes
# ---------------------------------------------------------------------------

@dataclass
class FarkasCertificate:
    """Multipliers proving an LP infeasible.

    The system is normalized to ``G x >= h`` (rows in stated order — an
    equality contributes its ``>=`` then its ``<=`` orientation — followed by
    finite lower-bound rows then finite upper-bound rows). ``multipliers``
    are >= 0 with ``G^T rho = 0`` and ``h^T rho = violation > 0``.
    """
    multipliers: np.ndarray
    terms: List[tuple]  # ("row", row_index, orientation) | ("lb"|"ub", col)
    violation: float


@dataclass
class SolveOutcome:
    status: str  # optimal | feasible-limit | limit-no-incumbent |
    #              infeasible | unbounded | error
    primal: Optional[np.ndarray] = None
    objective: Optional[float] = None
    best_bound: Optional[float] = None
    duals: Optional[np.ndarray] = None
    ray: Optional[FarkasCertificate] = None
    gap: Optional[float] = None
    wall_seconds: float = 0.0
    message: str = ""
    has_integers: bool = False

    def value(self, index: int) -> float:
        if self.primal is None:
            raise BackendError(f"no primal point (status {self.status})")
        return float(self.primal[index])


def get_duals(outcome: SolveOutcome) -> np.ndarray:
    """Row duals of a solved continuous model (d objective / d rhs)."""
    if outcome.has_integers:
        raise CapabilityError("duals are undefined for models with binaries")
    if outcome.duals is None:
        raise BackendError(f"no duals available (status {outcome.status})")
    return outcome.duals


# ---------------------------------------------------------------------------
# The scipy/HiGHS adapter
# ---------------------------------------------------------------------------

class ScipyBackend:
    """Drives HiGHS through scipy.optimize (linprog for LPs, milp for MILPs).

    LPs always come back with duals; infeasible LPs come back with a Farkas
    certificate computed from an auxiliary ray LP (the HiGHS wrapper exposes
    no certificate of its own). One solve = one engine session; HiGHS may
    multithread internally.
    """

    name = "scipy"

    def solve(self, model: AbstractModel, gap: Optional[float] = None,
              seconds: Optional[float] = None) -> SolveOutcome:
        t0 = time.perf_counter()
        try:
            if model.has_integers:
                out = self._solve_milp(model, gap, seconds)
            else:
                out = self._solve_lp(model, seconds)
        except (ValueError, MemoryError) as exc:
            out = SolveOutcome(status="error", message=str(exc),
                               has_integers=model.has_integers)
        out.wall_seconds = time.perf_counter() - t0
        return out

    # -- MILP ---------------------------------------------------------------

    def _solve_milp(self, model, gap, seconds):
        c, lb, ub, integrality, A, senses, rhs = model.arrays()
        row_lb = np.where(senses == LE, -np.inf, rhs)
        row_ub = np.where(senses == GE, np.inf, rhs)
        options = {}
        if gap is not None:
            options["mip_rel_gap"] = gap
        if seconds is not None:
            options["time_limit"] = seconds
        res = milp(c, constraints=LinearConstraint(A, row_lb, row_ub),
                   integrality=integrality, bounds=Bounds(lb, ub),
                   options=options)
        off = model.objective_offset
        if res.status == 0:
            return SolveOutcome(
                status="optimal", primal=np.asarray(res.x),
                objective=float(res.fun) + off,
                best_bound=_maybe(res, "mip_dual_bound", off),
                gap=getattr(res, "mip_gap", None),
                message=res.message, has_integers=True)
        if res.status == 1:
            if res.x is not None:
                return SolveOutcome(
                    status="feasible-limit", primal=np.asarray(res.x),
                    objective=float(res.fun) + off,
                    best_bound=_maybe(res, "mip_dual_bound", off),
                    gap=getattr(res, "mip_gap", None),
                    message=res.message, has_integers=True)
            return SolveOutcome(status="limit-no-incumbent",
                                best_bound=_maybe(res, "mip_dual_bound", off),
                                message=res.message, has_integers=True)
        if res.status == 2:
            return SolveOutcome(status="infeasible", message=res.message,
                                has_integers=True)
        if res.status == 3:
            return SolveOutcome(status="unbounded", message=res.message,
                                has_integers=True)
        return SolveOutcome(status="error", message=res.message,
                            has_integers=True)

    # -- LP -----------------------------------------------------------------

    def _solve_lp(self, model, seconds):
        c, lb, ub, _, A, senses, rhs = model.arrays()
        ge = senses == GE
        le = senses == LE
        eq = senses == EQ
        blocks, b_ub = [], []
        if le.any():
            blocks.append(A[le])
            b_ub.append(rhs[le])
        if ge.any():
            blocks.append(-A[ge])
            b_ub.append(-rhs[ge])
        A_ub = sp.vstack(blocks, format="csr") if blocks else None
        b_ub = np.concatenate(b_ub) if b_ub else None
        A_eq = A[eq] if eq.any() else None
        b_eq = rhs[eq] if eq.any() else None
        options = {} if seconds is None else {"time_limit": seconds}
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=np.column_stack([lb, ub]), method="highs",
                      options=options)
        off = model.objective_offset
        if res.status == 0:
            duals = np.zeros(model.n_rows)
            if A_ub is not None:
                m = np.asarray(res.ineqlin.marginals)
                n_le = int(le.sum())
                duals[le] = m[:n_le]
                duals[ge] = -m[n_le:]  # rows were negated into <= form
            if A_eq is not None:
                duals[eq] = np.asarray(res.eqlin.marginals)
            return SolveOutcome(
                status="optimal", primal=np.asarray(res.x),
                objective=float(res.fun) + off, best_bound=float(res.fun) + off,
                duals=duals, message=res.message)
        if res.status == 2:
            ray = farkas_certificate(model)
            return SolveOutcome(status="infeasible", ray=ray,
                                message=res.message)
        if res.status == 3:
            return SolveOutcome(status="unbounded", message=res.message)
        if res.status == 1 and res.x is not None:
            return SolveOutcome(status="feasible-limit",
                                primal=np.asarray(res.x),
                                objective=float(res.fun) + off,
                                message=res.message)
        return SolveOutcome(status="error", message=res.message)


def _maybe(res, attr, offset):
    val = getattr(res, attr, None)
    return None if val is None else float(val) + offset


def _normalized_ge_system(model: AbstractModel):
    """Rows + finite bounds as one ``G x >= h`` system, with provenance."""
    cols = model.n_cols
    G_rows, h, terms = [], [], []
    for r, row in enumerate(model.rows):
        vec = sp.csr_matrix((row.values, ([0] * len(row.indices), row.indices)),
                            shape=(1, cols))
        if row.sense in (GE, EQ):
            G_rows.append(vec)
            h.append(row.rhs)
            terms.append(("row", r, +1))
        if row.sense in (LE, EQ):
            G_rows.append(-vec)
            h.append(-row.rhs)
            terms.append(("row", r, -1))
    for ci, col in enumerate(model.columns):
        if np.isfinite(col.lower):
            G_rows.append(sp.csr_matrix(([1.0], ([0], [ci])), shape=(1, cols)))
            h.append(col.lower)
            terms.append(("lb", ci))
        if np.isfinite(col.upper):
            G_rows.append(sp.csr_matrix(([-1.0], ([0], [ci])), shape=(1, cols)))
            h.append(-col.upper)
            terms.append(("ub", ci))
    G = sp.vstack(G_rows, format="csr") if G_rows else sp.csr_matrix((0, cols))
    return G, np.array(h), terms


def farkas_certificate(model: AbstractModel,
                       tol: float = 1e-9) -> Optional[FarkasCertificate]:
    """Find multipliers proving ``model``'s constraints infeasible.

    Solves max h^T rho s.t. G^T rho = 0, sum rho <= 1, rho >= 0 over the
    normalized >= system; a positive optimum is a certificate (Farkas'
    lemma). Returns None when no certificate is found.
    """
    if model.has_integers:
        raise CapabilityError("certificates are only defined for LPs")
    G, h, terms = _normalized_ge_system(model)
    n = G.shape[0]
    if n == 0:
        return None
    res = linprog(-h, A_eq=G.T.tocsr(), b_eq=np.zeros(model.n_cols),
                  A_ub=np.ones((1, n)), b_ub=[1.0],
                  bounds=(0, None), method="highs")
    if res.status != 0 or -res.fun <= tol:
        return None
    return FarkasCertificate(multipliers=np.asarray(res.x), terms=terms,
                             violation=float(-res.fun))


# ---------------------------------------------------------------------------
# LP interchange format
# ---------------------------------------------------------------------------

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


def _fmt(x: float) -> str:
    # Positional notation only: exponent forms ("1e-06") would confuse the
    # sign-splitting parser on re-import.
    return np.format_float_positional(float(x), unique=True)


def to_lp_string(model: AbstractModel) -> str:
    """Serialize to the textual LP format (canonical spacing, full precision)."""
    for col in model.columns:
        if not _NAME_RE.match(col.id):
            raise CapabilityError(f"column id {col.id!r} is not LP-safe")
        if not np.isfinite(col.lower):
            raise CapabilityError("LP export requires finite lower bounds")
    out = [f"\\ {model.name}", "Minimize"]
    terms = [(col.id, col.objective) for col in model.columns
             if col.objective != 0.0]
    out.append(" obj: " + _expr(terms, model.objective_offset))
    out.append("Subject To")
    for row in model.rows:
        expr = _expr([(model.columns[ci].id, v)
                      for ci, v in zip(row.indices, row.values)], 0.0)
        out.append(f" {row.id}: {expr} {row.sense} {_fmt(row.rhs)}")
    out.append("Bounds")
    for col in model.columns:
        if col.kind == BINARY:
            continue
        if np.isinf(col.upper):
            if col.lower != 0.0:
                out.append(f" {col.id} >= {_fmt(col.lower)}")
        else:
            out.append(f" {_fmt(col.lower)} <= {col.id} <= {_fmt(col.upper)}")
    binaries = [col.id for col in model.columns if col.kind == BINARY]
    if binaries:
        out.append("Binary")
        for cid in binaries:
            out.append(f" {cid}")
    out.append("End")
    return "\n".join(out) + "\n"


def _expr(terms: Sequence[Tuple[str, float]], constant: float) -> str:
    if not terms and constant == 0.0:
        return "0"
    parts = []
    for name, coef in terms:
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(coef))} {name}")
    if constant != 0.0:
        sign = "-" if constant < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(constant))}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def write_lp(model: AbstractModel, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(to_lp_string(model))


def read_lp(text: str) -> AbstractModel:
    """Parse the LP subset emitted by :func:`to_lp_string`."""
    model = AbstractModel(name="imported")
    # First pass: collect variable names so indices exist before rows.
    lines = [ln for ln in (raw.split("\\")[0].strip()
                           for raw in text.splitlines()) if ln]
    section = None
    sections: Dict[str, List[str]] = {"objective": [], "rows": [],
                                      "bounds": [], "binary": []}
    for ln in lines:
        low = ln.lower()
        if low in ("minimize", "min"):
            section = "objective"
            continue
        if low in ("subject to", "s.t.", "st"):
            section = "rows"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low == "binary":
            section = "binary"
            continue
        if low == "end":
            section = None
            continue
        if low in ("maximize", "max", "general"):
            raise CapabilityError(f"unsupported LP section {ln!r}")
        if section is None:
            raise BackendError(f"unexpected LP line {ln!r}")
        sections[section].append(ln)

    def strip_label(line):
        if ":" in line:
            return line.split(":", 1)[1].strip(), line.split(":", 1)[0].strip()
        return line, None

    # Discover names in deterministic order: objective, rows, bounds, binary.
    names: List[str] = []
    seen = set()

    def note(name):
        if name not in seen:
            seen.add(name)
            names.append(name)

    def scan(expr):
        for tok in expr.replace("+", " ").replace("-", " ").split():
            if _NAME_RE.match(tok):
                note(tok)

    obj_expr, _ = strip_label(" ".join(sections["objective"]))
    scan(obj_expr)
    row_specs = []
    for ln in sections["rows"]:
        body, label = strip_label(ln)
        m = re.search(r"(<=|>=|=)", body)
        if not m:
            raise BackendError(f"row without sense: {ln!r}")
        sense = m.group(1)
        lhs, rhs = body[:m.start()].strip(), body[m.end():].strip()
        scan(lhs)
        row_specs.append((label, lhs, sense, float(rhs)))
    for ln in sections["bounds"]:
        scan(ln.replace("<=", " ").replace(">=", " ").replace("free", " "))
    for ln in sections["binary"]:
        note(ln.strip())

    obj_terms, obj_const = _parse_expr(obj_expr)
    lowers = {n: 0.0 for n in names}
    uppers = {n: np.inf for n in names}
    kinds = {n: CONTINUOUS for n in names}
    for ln in sections["binary"]:
        kinds[ln.strip()] = BINARY
    for ln in sections["bounds"]:
        parts = ln.split()
        if len(parts) == 5 and parts[1] == "<=" and parts[3] == "<=":
            lowers[parts[2]] = float(parts[0])
            uppers[parts[2]] = float(parts[4])
        elif len(parts) == 3 and parts[1] == ">=":
            lowers[parts[0]] = float(parts[2])
        elif len(parts) == 2 and parts[1] == "free":
            raise CapabilityError("free variables are not supported")
        else:
            raise BackendError(f"bad bounds line {ln!r}")
    for n in names:
        model.add_column(n, kinds[n], lowers[n], uppers[n],
                         obj_terms.get(n, 0.0))
    model.objective_offset = obj_const
    for idx, (label, lhs, sense, rhs) in enumerate(row_specs):
        terms, const = _parse_expr(lhs)
        model.add_row(label or f"r{idx}",
                      [(model.column_index(n), v) for n, v in terms.items()],
                      sense, rhs - const)
    return model


def _parse_expr(expr: str):
    """'2.0 x - 3 y + 1.5' -> ({x: 2.0, y: -3.0}, 1.5)."""
    tokens = expr.replace("+", " + ").replace("-", " - ").split()
    terms: Dict[str, float] = {}
    const = 0.0
    sign, coef = 1.0, None
    for tok in tokens:
        if tok == "+" or tok == "-":
            if coef is not None:  # dangling number was a constant
                const += sign * coef
            sign, coef = (1.0 if tok == "+" else -1.0), None
        elif _NAME_RE.match(tok):
            val = sign * (1.0 if coef is None else coef)
            terms[tok] = terms.get(tok, 0.0) + val
            sign, coef = 1.0, None
        elif tok == "0" and coef is None and not terms and const == 0.0:
            coef = 0.0
        else:
            coef = float(tok)
    if coef is not None:
        const += sign * coef
    return terms, const


def read_lp_file(path: str) -> AbstractModel:
    with open(path) as fh:
        return read_lp(fh.read())


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

_BACKENDS = {"scipy": ScipyBackend, "scipy-highs": ScipyBackend}


def get_backend(name: Optional[str] = None) -> ScipyBackend:
    """Adapter lookup: explicit name, else $RAILVOLT_SOLVER, else scipy."""
    name = name or os.environ.get("RAILVOLT_SOLVER", "scipy")
    try:
        return _BACKENDS[name]()
    except KeyError:
        raise BackendError(
            f"unknown solver adapter {name!r}; known: {sorted(_BACKENDS)}"
        ) from None
