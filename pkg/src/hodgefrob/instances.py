"""JSON instance files with exact scalars.

Every number is a string ("p/q" or "p/q+r/s*i").  A series is a map from an
exponent string "e1,...,er" (or "e1,...,er|l1,...,lr" when log symbols occur)
to a coefficient.  A coefficient is a scalar string, an object
{"coeff": ..., "tau_power": t}, or a list of such objects when several powers
of tau share the same exponents.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

from .degeneration import VHSGerm
from .frobmod import FrobeniusModule, Potential
from .hodge import MHS, Bigrading
from .linfilt import DecFiltration, IncFiltration, Subspace, _Filtration
from .qseries import MatSeries, Series, default_order
from .report import CheckError
from .scalars import fmt, parse as parse_scalar

KINDS = ("module", "potential", "mhs", "nilpotent", "germ")


class InputError(ValueError):
    """Malformed instance file; carries a JSON path and, when known, a line and column."""

    def __init__(self, message: str, path: str = "", line: int | None = None, col: int | None = None):
        self.message = message
        self.path = path
        self.line = line
        self.col = col
        loc = []
        if line is not None:
            loc.append(f"line {line}, column {col}")
        if path:
            loc.append(f"at {path}")
        super().__init__(message + (f" ({'; '.join(loc)})" if loc else ""))


@dataclass
class Instance:
    kind: str
    data: dict
    module: FrobeniusModule | None = None
    potential: Potential | None = None
    mhs: MHS | None = None
    nilpotents: list | None = None
    filtrations: dict | None = None
    germ: VHSGerm | None = None
    order: int = 6
    center: int = 0


# ----------------------------------------------------------------------
# reading
# ----------------------------------------------------------------------

def _locate(text: str, needle: Any) -> tuple[int | None, int | None]:
    """Best-effort line/column of the first literal occurrence of a value."""
    if text is None:
        return None, None
    pos = text.find(json.dumps(needle))
    if pos < 0:
        return None, None
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


class _Reader:
    def __init__(self, text: str | None):
        self.text = text

    def fail(self, message: str, path: str, value: Any = None):
        line, col = _locate(self.text, value) if value is not None else (None, None)
        raise InputError(message, path, line, col)

    def scalar(self, v, path: str):
        if isinstance(v, float):
            self.fail("floats are not allowed; use an exact string", path, v)
        try:
            return parse_scalar(v)
        except (ValueError, TypeError, ZeroDivisionError):
            self.fail(f"not an exact scalar: {v!r}", path, v)

    def integer(self, v, path: str) -> int:
        if isinstance(v, bool) or not isinstance(v, int):
            if isinstance(v, str) and v.lstrip("-").isdigit():
                return int(v)
            self.fail(f"expected an integer, got {v!r}", path, v)
        return v

    def matrix(self, v, path: str, n: int | None = None) -> list:
        if not isinstance(v, list) or any(not isinstance(row, list) for row in v):
            self.fail("expected a matrix (list of rows)", path)
        M = [[self.scalar(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)] for i, row in enumerate(v)]
        if n is not None and (len(M) != n or any(len(row) != n for row in M)):
            self.fail(f"expected a {n}x{n} matrix", path)
        return M

    def vectors(self, v, path: str, n: int) -> list:
        if not isinstance(v, list):
            self.fail("expected a list of vectors", path)
        out = []
        for i, vec in enumerate(v):
            if not isinstance(vec, list) or len(vec) != n:
                self.fail(f"expected a vector of length {n}", f"{path}[{i}]")
            out.append([self.scalar(x, f"{path}[{i}][{j}]") for j, x in enumerate(vec)])
        return out

    def filtration(self, v, path: str, n: int, decreasing: bool) -> _Filtration:
        if not isinstance(v, dict) or not v:
            self.fail("expected a map from index to basis vectors", path)
        given = {}
        for key, vecs in v.items():
            idx = self.integer(key, f"{path}.{key}")
            given[idx] = Subspace.span(n, self.vectors(vecs, f"{path}.{key}", n))
        lo, hi = min(given), max(given)
        pieces = {}
        for p in range(lo, hi + 1):
            if decreasing:
                pieces[p] = given[min(i for i in given if i >= p)]
            else:
                pieces[p] = given[max(i for i in given if i <= p)]
        cls = DecFiltration if decreasing else IncFiltration
        try:
            return cls.from_map(n, pieces)
        except ValueError as exc:
            self.fail(str(exc), path)

    def series(self, v, path: str, r: int, order: int) -> Series:
        if not isinstance(v, dict):
            self.fail("expected a series map", path)
        terms: dict = {}
        for key, val in v.items():
            qpart, _, lpart = key.partition("|")
            try:
                qs = [int(x) for x in qpart.split(",")] if qpart.strip() else []
                ls = [int(x) for x in lpart.split(",")] if lpart.strip() else [0] * r
            except ValueError:
                self.fail(f"bad exponent key {key!r}", path, key)
            if len(qs) != r or len(ls) != r or any(x < 0 for x in qs + ls):
                self.fail(f"exponent key {key!r} needs {r} non-negative entries", path, key)
            items = val if isinstance(val, list) else [val]
            for it in items:
                if isinstance(it, dict):
                    if "coeff" not in it:
                        self.fail("coefficient object needs 'coeff'", f"{path}.{key}")
                    c = self.scalar(it["coeff"], f"{path}.{key}.coeff")
                    t = self.integer(it.get("tau_power", 0), f"{path}.{key}.tau_power")
                else:
                    c = self.scalar(it, f"{path}.{key}")
                    t = 0
                k = (t, *qs, *ls)
                terms[k] = terms.get(k, 0) + c
        return Series(r, order, terms)


def read_text(text: str, order: int | None = None) -> Instance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(exc.msg, "", exc.lineno, exc.colno) from None
    return from_dict(data, order, text)


def read_file(path: str, order: int | None = None) -> Instance:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read file: {exc.strerror}", path) from None
    return read_text(text, order)


def from_dict(data: Any, order: int | None = None, text: str | None = None) -> Instance:
    rd = _Reader(text)
    if not isinstance(data, dict):
        rd.fail("top level must be an object", "$")
    kind = data.get("kind")
    if kind not in KINDS:
        rd.fail(f"'kind' must be one of {', '.join(KINDS)}", "$.kind", kind)
    if order is None:
        order = rd.integer(data["truncation_order"], "$.truncation_order") if "truncation_order" in data \
            else default_order()
    inst = Instance(kind, data, order=order)
    inst.center = rd.integer(data.get("center", 0), "$.center")
    try:
        if kind in ("module", "potential"):
            _read_module(rd, data, inst)
        elif kind == "mhs":
            _read_mhs(rd, data, inst)
        elif kind == "nilpotent":
            _read_nilpotent(rd, data, inst)
        else:
            _read_germ(rd, data, inst)
    except CheckError as exc:
        raise InputError(str(exc), "$") from None
    return inst


def _need(rd: _Reader, data: dict, key: str):
    if key not in data:
        rd.fail(f"missing key '{key}'", f"$.{key}")
    return data[key]


def _read_module(rd: _Reader, data: dict, inst: Instance):
    k = rd.integer(_need(rd, data, "weight"), "$.weight")
    dims = _need(rd, data, "dims")
    if not isinstance(dims, list):
        rd.fail("'dims' must be a list", "$.dims")
    dims = [rd.integer(d, f"$.dims[{i}]") for i, d in enumerate(dims)]
    n = sum(dims)
    B = rd.matrix(_need(rd, data, "pairing"), "$.pairing", n)
    acts = _need(rd, data, "action")
    if not isinstance(acts, list):
        rd.fail("'action' must be a list of matrices", "$.action")
    action = [rd.matrix(A, f"$.action[{j}]", n) for j, A in enumerate(acts)]
    M = FrobeniusModule(k, dims, B, action)
    inst.module = M
    inst.potential = _read_potential(rd, data.get("potential"), M, inst.order)


def _read_potential(rd: _Reader, v, M: FrobeniusModule, order: int) -> Potential:
    r = M.r
    if v is None:
        return Potential.zero(M.weight, r, order)
    if not isinstance(v, dict):
        rd.fail("'potential' must be an object", "$.potential")
    scalar = rd.series(v["series"], "$.potential.series", r, order) if "series" in v else None
    linear, quadratic = {}, {}
    for key, s in (v.get("linear") or {}).items():
        a = rd.integer(key, f"$.potential.linear.{key}")
        linear[a] = rd.series(s, f"$.potential.linear.{key}", r, order)
    for key, s in (v.get("quadratic") or {}).items():
        parts = key.split(",")
        if len(parts) != 2:
            rd.fail(f"quadratic key must be 'a,b', got {key!r}", "$.potential.quadratic", key)
        a, b = (rd.integer(p.strip(), f"$.potential.quadratic.{key}") for p in parts)
        quadratic[(a, b)] = rd.series(s, f"$.potential.quadratic.{key}", r, order)
    return Potential(M.weight, r, order, scalar, linear, quadratic)


def _read_mhs(rd: _Reader, data: dict, inst: Instance):
    n = rd.integer(_need(rd, data, "dim"), "$.dim")
    fl = _need(rd, data, "filtrations")
    F = rd.filtration(_need(rd, fl, "F"), "$.filtrations.F", n, True)
    W = rd.filtration(_need(rd, fl, "W"), "$.filtrations.W", n, False)
    inst.mhs = MHS(F, W)
    inst.filtrations = {"F": F, "W": W}


def _read_nilpotent(rd: _Reader, data: dict, inst: Instance):
    n = rd.integer(_need(rd, data, "dim"), "$.dim")
    Ns = _need(rd, data, "nilpotents")
    if not isinstance(Ns, list) or not Ns:
        rd.fail("'nilpotents' must be a non-empty list of matrices", "$.nilpotents")
    inst.nilpotents = [rd.matrix(N, f"$.nilpotents[{j}]", n) for j, N in enumerate(Ns)]
    inst.filtrations = {}
    for name, flt in (data.get("filtrations") or {}).items():
        inst.filtrations[name] = rd.filtration(flt, f"$.filtrations.{name}", n, name == "F")


def _read_germ(rd: _Reader, data: dict, inst: Instance):
    k = rd.integer(_need(rd, data, "weight"), "$.weight")
    n = rd.integer(_need(rd, data, "dim"), "$.dim")
    fl = _need(rd, data, "filtrations")
    F = rd.filtration(_need(rd, fl, "F"), "$.filtrations.F", n, True)
    W = rd.filtration(fl["W"], "$.filtrations.W", n, False) if "W" in fl else None
    Ns = [rd.matrix(N, f"$.nilpotents[{j}]", n) for j, N in enumerate(_need(rd, data, "nilpotents"))]
    Q = rd.matrix(_need(rd, data, "pairing"), "$.pairing", n)
    r = len(Ns)
    ent = {}
    for key, s in (data.get("gamma") or {}).items():
        try:
            i, j = (int(x) for x in key.split(","))
        except ValueError:
            rd.fail(f"gamma key must be 'i,j', got {key!r}", "$.gamma", key)
        if not (0 <= i < n and 0 <= j < n):
            rd.fail(f"gamma index {key!r} out of range", "$.gamma", key)
        ser = rd.series(s, f"$.gamma.{key}", r, inst.order)
        if ser:
            ent[(i, j)] = ser
    G = VHSGerm(k, F, Ns, Q, MatSeries(n, r, inst.order, ent), W)
    if "unit" in data:
        G.extra["unit"] = tuple(rd.vectors([data["unit"]], "$.unit", n)[0])
    inst.germ = G
    inst.filtrations = {"F": F, **({"W": W} if W is not None else {})}


# ----------------------------------------------------------------------
# writing
# ----------------------------------------------------------------------

def series_to_json(s: Series) -> dict:
    r = s.r
    logs = s.has_logs()
    grouped: dict = {}
    for k in sorted(s.terms, key=lambda k: (sum(k[1:1 + r]), k[1:], k[0])):
        key = ",".join(str(x) for x in k[1:1 + r])
        if logs:
            key += "|" + ",".join(str(x) for x in k[1 + r:])
        grouped.setdefault(key, []).append((k[0], s.terms[k]))
    out = {}
    for key, items in grouped.items():
        if len(items) == 1 and items[0][0] == 0:
            out[key] = fmt(items[0][1])
        else:
            objs = [{"coeff": fmt(c), "tau_power": t} for t, c in items]
            out[key] = objs[0] if len(objs) == 1 else objs
    return out


def _mat(M) -> list:
    return [[fmt(x) for x in row] for row in M]


def filtration_to_json(F: _Filtration) -> dict:
    """Pieces at every index from the first jump through the last one."""
    return {str(i): [[fmt(x) for x in row] for row in F[i].rows] for i in range(F.lo, F.hi + 1)}


def potential_to_json(P: Potential) -> dict:
    if P.weight == 3:
        return {"series": series_to_json(P.scalar)} if P.scalar else {}
    out = {}
    if P.linear:
        out["linear"] = {str(a): series_to_json(s) for a, s in sorted(P.linear.items())}
    if P.quadratic:
        out["quadratic"] = {f"{a},{b}": series_to_json(s) for (a, b), s in sorted(P.quadratic.items())}
    return out


def module_to_json(M: FrobeniusModule, P: Potential | None = None) -> dict:
    out = {"kind": "module", "weight": M.weight, "dims": list(M.dims), "pairing": _mat(M.B),
           "action": [_mat(A) for A in M.action]}
    if P is not None:
        out["truncation_order"] = P.order
        pj = potential_to_json(P)
        if pj:
            out["potential"] = pj
    return out


def mhs_to_json(M: MHS) -> dict:
    return {"kind": "mhs", "dim": M.n, "filtrations": {"F": filtration_to_json(M.F), "W": filtration_to_json(M.W)}}


def bigrading_to_json(I: Bigrading) -> dict:
    return {f"{p},{q}": [[fmt(x) for x in row] for row in s.rows] for (p, q), s in sorted(I.pieces.items())}


def germ_to_json(G: VHSGerm) -> dict:
    out = {"kind": "germ", "weight": G.weight, "dim": G.n, "truncation_order": G.order,
           "filtrations": {"F": filtration_to_json(G.Finf)}}
    if G.W is not None:
        out["filtrations"]["W"] = filtration_to_json(G.W)
    out["nilpotents"] = [_mat(N) for N in G.Ns]
    out["pairing"] = _mat(G.Q)
    out["gamma"] = {f"{i},{j}": series_to_json(s) for (i, j), s in sorted(G.Gamma.entries.items()) if s}
    if "unit" in G.extra:
        out["unit"] = [fmt(x) for x in G.extra["unit"]]
    return out


def dumps(obj: dict) -> str:
    """Canonical rendering: two-space indent, flat lists of scalars kept on one line."""
    return _render(obj, 0) + "\n"


def _render(x, depth: int) -> str:
    pad, inner = "  " * depth, "  " * (depth + 1)
    if isinstance(x, dict):
        if not x:
            return "{}"
        body = ",\n".join(f"{inner}{json.dumps(str(k))}: {_render(v, depth + 1)}" for k, v in x.items())
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(x, list):
        if all(not isinstance(v, (dict, list)) for v in x):
            return "[" + ", ".join(json.dumps(v, ensure_ascii=False) for v in x) + "]"
        body = ",\n".join(inner + _render(v, depth + 1) for v in x)
        return "[\n" + body + "\n" + pad + "]"
    return json.dumps(x, ensure_ascii=False)


def to_json(inst: Instance) -> dict:
    if inst.kind in ("module", "potential"):
        d = module_to_json(inst.module, inst.potential)
        d["kind"] = inst.kind
        return d
    if inst.kind == "mhs":
        return mhs_to_json(inst.mhs)
    if inst.kind == "germ":
        return germ_to_json(inst.germ)
    d = {"kind": "nilpotent", "dim": len(inst.nilpotents[0]), "nilpotents": [_mat(N) for N in inst.nilpotents]}
    if inst.center:
        d["center"] = inst.center
    if inst.filtrations:
        d["filtrations"] = {name: filtration_to_json(F) for name, F in inst.filtrations.items()}
    return d
