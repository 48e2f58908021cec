"""Command-line front end: ``hodgefrob <command> <file> [options]``.

Exit codes: 0 when every requested check passes, 1 when a check fails,
2 when the input cannot be read or has the wrong kind.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import instances as inst_io
from .amodel import amodel_report, build_vhs_germ, maximal_unipotency_check
from .degeneration import (
    higgs_conditions, higgs_field, horizontality_check, psi_convolution_check, psi_filtration, validate_germ,
    x_from_germ,
)
from .frobmod import validate_module, validate_quantum_potential
from .hodge import (
    deligne_bigrading, relative_weight_filtration, verify_bigrading, verify_relative_weight_filtration,
    verify_weight_filtration, weight_filtration_cone,
)
from .instances import InputError, bigrading_to_json, filtration_to_json, series_to_json
from .linfilt import commutator, is_zero_matrix, mat_add, zeros
from .qseries import MatSeries, Series, to_string
from .report import CheckError, Report
from .scalars import fmt
from .unfold import algebra_from_module, check_frobenius_manifold, hm_precondition_check, unfolded_product
from .vhs2frob import extension_data_weight3, extract, roundtrip_germ, roundtrip_module

DATA_DIR = Path(__file__).parent / "data"


class Outcome:
    """What a command produced: a report plus JSON payload and text lines."""

    def __init__(self, report: Report, payload: dict | None = None, text: list[str] | None = None,
                 document: dict | None = None):
        self.report = report
        self.payload = payload or {}
        self.text = text or []
        self.document = document


# ----------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------

def _parse_eval(spec: str | None) -> list[complex] | None:
    if not spec:
        return None
    name, _, vals = spec.partition("=")
    if name.strip() != "q" or not vals:
        raise InputError(f"--eval expects q=v1[,v2,...], got {spec!r}")
    try:
        return [complex(v.strip().replace("i", "j")) for v in vals.split(",")]
    except ValueError:
        raise InputError(f"--eval values must be numbers, got {vals!r}") from None


def _parse_unit(spec: str | None, n: int) -> tuple | None:
    if not spec:
        return None
    from .scalars import parse
    try:
        v = tuple(parse(x.strip()) for x in spec.split(","))
    except ValueError:
        raise InputError(f"--unit must be a comma-separated exact vector, got {spec!r}") from None
    if len(v) != n:
        raise InputError(f"--unit needs {n} entries, got {len(v)}")
    return v


def _series_out(s: Series, q: list[complex] | None) -> dict:
    out = {"exact": series_to_json(s), "text": to_string(s)}
    if q is not None:
        if len(q) != s.r:
            raise InputError(f"--eval needs {s.r} values, got {len(q)}")
        z = s.evaluate(q)
        out["value"] = [z.real, z.imag]
    return out


def _require(inst: inst_io.Instance, *kinds: str):
    if inst.kind not in kinds:
        raise InputError(f"this command needs a file of kind {' or '.join(kinds)}, got {inst.kind!r}", "$.kind")


def _matseries_json(M: MatSeries) -> dict:
    return {f"{i},{j}": series_to_json(s) for (i, j), s in sorted(M.entries.items()) if s}


def _sum(Ns: list) -> list:
    S = zeros(len(Ns[0]))
    for N in Ns:
        S = mat_add(S, N)
    return S


def _rows(sub) -> list:
    return [[fmt(x) for x in row] for row in sub.rows]


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

def run_validate(inst: inst_io.Instance, **_) -> Outcome:
    if inst.kind in ("module", "potential"):
        rep = Report("validate")
        rep.extend(validate_module(inst.module), "module.")
        rep.extend(validate_quantum_potential(inst.module, inst.potential), "potential.")
        return Outcome(rep)
    if inst.kind == "mhs":
        return Outcome(inst.mhs.validate())
    if inst.kind == "germ":
        return Outcome(validate_germ(inst.germ))
    rep = Report("nilpotent tuple")
    Ns = inst.nilpotents
    bad = [(a, b) for a in range(len(Ns)) for b in range(a + 1, len(Ns))
           if not is_zero_matrix(commutator(Ns[a], Ns[b]))]
    rep.add("pairwise commuting", not bad, failing=bad)
    return Outcome(rep)


def run_deligne(inst: inst_io.Instance, **_) -> Outcome:
    _require(inst, "mhs")
    rep = Report("Deligne bigrading")
    v = inst.mhs.validate()
    rep.extend(v)
    if not v.ok:
        return Outcome(rep)
    I = deligne_bigrading(inst.mhs)
    rep.extend(verify_bigrading(I, inst.mhs))
    text = [f"I^{{{p},{q}}}: dim {d}" for (p, q), d in I.dims().items()]
    return Outcome(rep, {"bigrading": bigrading_to_json(I),
                         "dims": {f"{p},{q}": d for (p, q), d in I.dims().items()}}, text)


def run_weightfilt(inst: inst_io.Instance, center: int | None = None, relative: bool = False, **_) -> Outcome:
    _require(inst, "nilpotent", "germ")
    if inst.kind == "germ":
        Ns, c = inst.germ.Ns, inst.germ.weight
    else:
        Ns, c = inst.nilpotents, inst.center
    if center is not None:
        c = center
    N = _sum(Ns)
    if relative:
        if inst.kind == "germ" or "W" not in (inst.filtrations or {}):
            raise InputError("--relative needs a filtration 'W' in the file", "$.filtrations.W")
        W = inst.filtrations["W"]
        rep = Report("relative weight filtration")
        R = relative_weight_filtration(N, W)
        rep.add("relative weight filtration exists", R is not None)
        if R is None:
            return Outcome(rep)
        rep.extend(verify_relative_weight_filtration(N, W, R))
        F = R
    else:
        try:
            F, rep = weight_filtration_cone(Ns, c)
        except CheckError as exc:
            rep = Report("weight filtration")
            rep.add("nilpotent maps commute", False, **exc.where)
            return Outcome(rep)
        rep.extend(verify_weight_filtration(N, F, c), "sum.")
    jumps = {str(i): F[i].dim for i in range(F.lo - 1, F.hi + 1)}
    text = [f"W_{i}: dim {d}" for i, d in jumps.items()]
    return Outcome(rep, {"filtration": filtration_to_json(F), "dims": jumps}, text)


def run_amodel(inst: inst_io.Instance, **_) -> Outcome:
    _require(inst, "module", "potential")
    try:
        G, rep = amodel_report(inst.module, inst.potential)
    except CheckError as exc:
        rep = Report("A-model variation")
        rep.add(str(exc), False, **exc.where)
        return Outcome(rep)
    doc = inst_io.germ_to_json(G)
    return Outcome(rep, {"germ": doc}, document=doc)


def run_extract(inst: inst_io.Instance, unit: str | None = None, q=None, **_) -> Outcome:
    _require(inst, "germ")
    G = inst.germ
    try:
        ex = extract(G, _parse_unit(unit, G.n))
    except CheckError as exc:
        rep = Report("extraction")
        rep.add(str(exc), False, **exc.where)
        return Outcome(rep)
    doc = inst_io.module_to_json(ex.module, ex.potential)
    coords = [_series_out(s, q) for s in ex.coordinates.coordinates()]
    text = [f"q~_{j + 1} = {c['text']}" for j, c in enumerate(coords)]
    return Outcome(ex.report, {"module": doc, "coordinates": coords}, text, document=doc)


def run_yukawa(inst: inst_io.Instance, unit: str | None = None, q=None, **_) -> Outcome:
    _require(inst, "germ")
    G = inst.germ
    try:
        ed = extension_data_weight3(G, _parse_unit(unit, G.n))
    except CheckError as exc:
        rep = Report("weight 3 extension data")
        rep.add(str(exc), False, **exc.where)
        return Outcome(rep)
    table = {",".join(str(i) for i in abc): _series_out(s, q) for abc, s in sorted(ed.yukawa.items())}
    coords = [_series_out(s, q) for s in ed.coordinates]
    text = [f"Y[{k}] = {v['text']}" for k, v in table.items()]
    text += [f"q~_{j + 1} = {c['text']}" for j, c in enumerate(coords)]
    return Outcome(ed.report, {"yukawa": table, "coordinates": coords}, text)


def _unfold(inst: inst_io.Instance):
    _require(inst, "module", "potential")
    A = algebra_from_module(inst.module)
    U = unfolded_product(A, inst.potential)
    return U, check_frobenius_manifold(U, inst.module.B)


def _zpoly_json(x) -> dict:
    return {"*".join(f"z{a}" for a in mono) or "1": series_to_json(s) for mono, s in sorted(x.terms.items())}


def run_unfold(inst: inst_io.Instance, **_) -> Outcome:
    try:
        U, rep = _unfold(inst)
    except CheckError as exc:
        rep = Report("Frobenius manifold")
        rep.add(str(exc), False, **exc.where)
        return Outcome(rep)
    tensor = {}
    for (a, b), vec in sorted(U.entries.items()):
        if a > b:
            continue
        row = {str(c): _zpoly_json(x) for c, x in enumerate(vec) if x}
        if row:
            tensor[f"{a},{b}"] = row
    algebra = {f"{a},{b}": [fmt(x) for x in U.algebra.table[a][b]]
               for a in range(U.n) for b in range(a, U.n) if any(U.algebra.table[a][b])}
    return Outcome(rep, {"algebra": algebra, "product": tensor})


def run_check_fm(inst: inst_io.Instance, **_) -> Outcome:
    try:
        _, rep = _unfold(inst)
    except CheckError as exc:
        rep = Report("Frobenius manifold")
        rep.add(str(exc), False, **exc.where)
    return Outcome(rep)


def run_roundtrip(inst: inst_io.Instance, unit: str | None = None, **_) -> Outcome:
    _require(inst, "module", "potential", "germ")
    rep = Report("round trip")
    try:
        if inst.kind == "germ":
            G = inst.germ
            e = _parse_unit(unit, G.n)
            rep.extend(roundtrip_germ(G, e), "germ.")
            ex = extract(G, e)
            rep.extend(roundtrip_module(ex.module, ex.potential), "module.")
        else:
            rep.extend(roundtrip_module(inst.module, inst.potential), "module.")
            rep.extend(roundtrip_germ(build_vhs_germ(inst.module, inst.potential)), "germ.")
    except CheckError as exc:
        rep.add(str(exc), False, **exc.where)
    diff = [c.name for c in rep.failures()]
    return Outcome(rep, {"diff": diff})


def run_degenerate(inst: inst_io.Instance, **_) -> Outcome:
    _require(inst, "germ")
    G = inst.germ
    rep = Report("degeneration")
    rep.extend(validate_germ(G), "germ.")
    rep.extend(maximal_unipotency_check(G), "maximal unipotency.")
    rep.extend(horizontality_check(G), "horizontality.")
    if not rep.ok:
        return Outcome(rep)
    xp = x_from_germ(G)
    payload = {"limit_bigrading": {f"{p},{q}": d for (p, q), d in G.bigrading.dims().items()},
               "X_minus1": _matseries_json(xp.X_minus1)}
    return Outcome(rep, payload)


def run_higgs(inst: inst_io.Instance, **_) -> Outcome:
    _require(inst, "germ")
    G = inst.germ
    rep = Report("Higgs field")
    rep.extend(higgs_conditions(G), "conditions.")
    try:
        thetas, hrep = higgs_field(G)
    except CheckError as exc:
        rep.add(str(exc), False, **exc.where)
        return Outcome(rep)
    rep.extend(hrep, "theta.")
    return Outcome(rep, {"theta": [_matseries_json(t) for t in thetas]})


def run_psi(inst: inst_io.Instance, unit: str | None = None, **_) -> Outcome:
    _require(inst, "germ")
    G = inst.germ
    psi, rep = psi_filtration(G)
    rep.extend(psi_convolution_check(G), "convolution.")
    rep.extend(hm_precondition_check(G, _parse_unit(unit, G.n)), "hm.")
    jumps = {str(i): psi[i].dim for i in range(psi.lo - 1, psi.hi + 1)}
    return Outcome(rep, {"psi": filtration_to_json(psi), "dims": jumps},
                   [f"Psi_{i}: dim {d}" for i, d in jumps.items()])


COMMANDS = {
    "validate": run_validate,
    "deligne": run_deligne,
    "weightfilt": run_weightfilt,
    "amodel": run_amodel,
    "extract": run_extract,
    "yukawa": run_yukawa,
    "unfold": run_unfold,
    "check-fm": run_check_fm,
    "roundtrip": run_roundtrip,
    "degenerate": run_degenerate,
    "higgs": run_higgs,
    "psi": run_psi,
}


def run(command: str, path: str, order: int | None = None, **opts) -> Outcome:
    """Read ``path`` and run ``command``; raises InputError on bad input."""
    inst = inst_io.read_file(path, order)
    opts["q"] = _parse_eval(opts.pop("eval_at", None))
    return COMMANDS[command](inst, **opts)


# ----------------------------------------------------------------------
# click wiring
# ----------------------------------------------------------------------

def _emit(out: Outcome, as_json: bool, output: str | None):
    if output and out.document is not None:
        Path(output).write_text(inst_io.dumps(out.document), encoding="utf-8")
    if as_json:
        doc = {"report": out.report.to_dict(), **out.payload}
        click.echo(json.dumps(doc, indent=2, sort_keys=False))
    else:
        click.echo(out.report.render())
        for line in out.text:
            click.echo(line)
    return 0 if out.report.ok else 1


def _common(f):
    f = click.option("--order", "-D", type=int, default=None,
                     help="Truncation order (default: file value, then HODGEFROB_ORDER, then 6).")(f)
    f = click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")(f)
    f = click.argument("file", type=click.Path(dir_okay=False))(f)
    return f


def _make(name: str, extra=()):
    def cmd(file, order, as_json, **opts):
        output = opts.pop("output", None)
        try:
            out = run(name, file, order, **opts)
        except InputError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        sys.exit(_emit(out, as_json, output))

    cmd.__name__ = name.replace("-", "_")
    f = cmd
    for opt in extra:
        f = opt(f)
    return click.command(name, help=_HELP[name])(_common(f))


_HELP = {
    "validate": "Check the axioms of a module and its potential, an MHS, a germ or a nilpotent tuple.",
    "deligne": "Compute and verify the Deligne bigrading of a mixed Hodge structure.",
    "weightfilt": "Weight filtration of the sum of the nilpotents (or the relative one with --relative).",
    "amodel": "Build the A-model germ of a module with potential and run its verification battery.",
    "extract": "Recover the module and potential from a germ in canonical coordinates.",
    "yukawa": "Canonical coordinates and Yukawa couplings of a weight 3 germ.",
    "unfold": "Unfold a module with potential to a Frobenius manifold product and dump it.",
    "check-fm": "Check the Frobenius manifold axioms of the unfolded product.",
    "roundtrip": "Module to germ to module and germ to module to germ identity tests.",
    "degenerate": "Limit data, horizontality and X_{-1} of a germ.",
    "higgs": "Higgs field of a germ and its integrability conditions.",
    "psi": "The opposite filtration Psi with its certificates and the generation preconditions.",
}

_EVAL = click.option("--eval", "eval_at", default=None, metavar="q=V[,V...]",
                     help="Also evaluate output series numerically at the given q.")
_UNIT = click.option("--unit", default=None, metavar="V0,V1,...", help="Generator of the top piece.")
_OUT = click.option("--output", "-o", default=None, type=click.Path(dir_okay=False),
                    help="Write the produced instance file here.")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Exact computations with Frobenius modules and degenerating variations of Hodge structure."""


for _name, _extra in [
    ("validate", ()), ("deligne", ()),
    ("weightfilt", (click.option("--center", type=int, default=None, help="Center of the filtration."),
                    click.option("--relative", is_flag=True, help="Relative to the file's W."))),
    ("amodel", (_OUT,)), ("extract", (_UNIT, _EVAL, _OUT)), ("yukawa", (_UNIT, _EVAL)),
    ("unfold", ()), ("check-fm", ()), ("roundtrip", (_UNIT,)), ("degenerate", ()), ("higgs", ()),
    ("psi", (_UNIT,)),
]:
    main.add_command(_make(_name, _extra))


@main.command("corpus")
def corpus():
    """List the bundled example instances."""
    for p in sorted(DATA_DIR.glob("*.json")):
        click.echo(str(p))


if __name__ == "__main__":
    main()
