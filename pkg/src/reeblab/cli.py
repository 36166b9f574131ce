"""Command-line scenario runner.

Usage::

    reeblab <command> --config FILE [--out DIR] [--seed U64]
    reeblab run FILE [--out DIR] [--seed U64]

Exit status is 0 on success, 1 on a computation error and 2 on a config
error. The structured result goes to ``<out>/result.json``; plot data goes to
CSV files next to it.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import COMMANDS, Scenario, load_scenario
from .errors import ConfigError, ReeblabError

log = logging.getLogger("reeblab")

DEFAULT_OUT = "reeblab_out"


def num(value, tol=None, **diag):
    """A numeric output field with its tolerance and diagnostics."""
    d = {"value": _plain(value), "tol": _plain(tol)}
    d.update({k: _plain(v) for k, v in diag.items()})
    return d


def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        v = float(v)
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    return v


def wrap_numbers(obj):
    """Wrap any remaining bare number as ``{"value": x, "tol": null}``."""
    if isinstance(obj, dict):
        if "value" in obj and "tol" in obj:
            return obj
        return {k: wrap_numbers(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [wrap_numbers(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, float)):
        return {"value": obj, "tol": None}
    return obj


# ---------------------------------------------------------------------------
# orbit resolution


def resolve_orbit(system, spec):
    from .orbits import axis_orbit, orbit_through

    reverse = False
    if isinstance(spec, dict):
        reverse = bool(spec.get("reversed", False))
        if "point" in spec:
            orb = orbit_through(system, np.array(spec["point"]), spec.get("period"), spec.get("label", ""))
        else:
            spec = spec["name"]
    if isinstance(spec, str):
        if not system.is_split:
            raise ReeblabError(f"named orbit {spec!r} needs a split system; give a point instead")
        orb = axis_orbit(system, 1 if spec == "gamma1" else 2)
    return orb.reversed() if reverse else orb


# ---------------------------------------------------------------------------
# commands


def cmd_orbits(sc: Scenario):
    from .orbits import find_periodic_orbits

    p = sc.params
    res = find_periodic_orbits(sc.system, p["action_cap"], n_angle=p["n_angle"])
    return {
        "orbits": [
            {"label": o.label, "marked_point": num(o.marked_point, 1e-9), "T0": num(o.T0, 1e-9,
             closure_error=o.closure_error)} for o in res
        ],
        "degenerate": res.degenerate,
        "exhaustive": res.exhaustive,
        "n_seeds": num(res.n_seeds, 0),
        "failures": num(len(res.failures), 0),
        "notes": list(res.notes),
    }


def _spectrum_record(spec):
    from .spectral import SPEC_TOL

    return [
        {"nu": num(e.nu, SPEC_TOL, richardson_residual=e.residual),
         "wind": num(e.wind, 0, min_section_norm=e.min_norm)}
        for e in spec.entries
    ]


def cmd_spectrum(sc: Scenario):
    from .spectral import asymptotic_spectrum, cz_index

    p = sc.params
    orb = resolve_orbit(sc.system, p["orbit"])
    spec = asymptotic_spectrum(sc.system, orb, p["frame"], p["N"], p["k"], p["delta"],
                               richardson=p["richardson"], half_width_turns=p["half_width_turns"])
    tol = sc.tolerances.get("spec_tol", 1e-6)
    cz = cz_index(spec, p["delta"], tol)
    return {
        "orbit": orb.label, "k": num(p["k"], 0), "N": num(p["N"], 0), "frame": p["frame"],
        "window": num(list(spec.resolved_window), 1e-6),
        "entries": _spectrum_record(spec),
        "structure_defects": spec.structure_defects(),
        "cz": num(cz.cz, 0, alpha_lt=cz.alpha_lt, alpha_geq=cz.alpha_geq, p=cz.p, gap=cz.gap),
    }


def cmd_cz(sc: Scenario):
    from .spectral import asymptotic_spectrum, cz_index

    p = sc.params
    orb = resolve_orbit(sc.system, p["orbit"])
    tol = sc.tolerances.get("spec_tol", 1e-6)
    rows = []
    for k in p["k"]:
        spec = asymptotic_spectrum(sc.system, orb, p["frame"], p["N"], k, p["delta"], richardson=p["richardson"])
        r = cz_index(spec, p["delta"], tol)
        rows.append({"k": num(k, 0), "cz": num(r.cz, 0, gap=r.gap), "alpha_lt": num(r.alpha_lt, 0),
                     "alpha_geq": num(r.alpha_geq, 0), "p": num(r.p, 0),
                     "structure_defects": spec.structure_defects()})
    return {"orbit": orb.label, "frame": p["frame"], "delta": num(p["delta"], 0), "rows": rows}


def cmd_convexity(sc: Scenario):
    from .orbits import find_periodic_orbits
    from .spectral import SPEC_TOL, convexity_check

    p = sc.params
    orbs = find_periodic_orbits(sc.system, p["action_cap"], n_angle=p["n_angle"])
    rep = convexity_check(sc.system, p["action_cap"], orbs, N=p["N"], strict=p["strict"])
    return {
        "action_cap": num(rep.action_cap, 0),
        "verdict": rep.verdict,
        "degenerate": rep.degenerate_flag,
        "caveats": rep.caveats,
        "rows": [{"orbit": r["orbit"], "k": num(r["k"], 0), "action": num(r["action"], 1e-9),
                  "cz": num(r["cz"], 0, gap=r["gap"]), "alpha_lt": num(r["alpha_lt"], 0),
                  "alpha_geq": num(r["alpha_geq"], 0), "p": num(r["p"], 0)} for r in rep.rows],
        "table": rep.to_table().splitlines(),
        "spec_tol": num(SPEC_TOL, 0),
    }


def cmd_linking(sc: Scenario):
    from .knots import ClosedCurve, linking_detail, self_linking

    p = sc.params
    seed = sc.seed or 0
    orbs = [resolve_orbit(sc.system, s) for s in p["curves"]]
    out = {"components": [o.label for o in orbs]}
    if len(orbs) == 2:
        c1, c2 = (ClosedCurve.from_orbit(sc.system, o) for o in orbs)
        r = linking_detail(c1, c2, seed=seed, gauss=p["gauss"])
        out["linking_number"] = num(r.value, 0, crossings=r.crossings, projections=r.checks)
        if r.gauss is not None:
            out["gauss_integral"] = num(r.gauss, 1e-3, deviation=abs(r.gauss - r.value))
    if p["self_linking"]:
        out["self_linking"] = [{"orbit": o.label, "sl": num(self_linking(sc.system, o, seed=seed), 0)}
                               for o in orbs]
    return out


def cmd_rotation(sc: Scenario):
    from .knots import linking_class
    from .cycles import rotation_number

    p = sc.params
    link = [resolve_orbit(sc.system, s) for s in p["link"]]
    comp = resolve_orbit(sc.system, p["component"])
    y = linking_class(sc.system, link)
    r = rotation_number(sc.system, comp, y, twist=p["twist"], periods=p["periods"], seed=sc.seed or 0)
    return {
        "component": comp.label, "class": y.description,
        "rho": num(r.rho, max(r.slope_error, 1e-12) / (2 * np.pi), two_pi_rho=r.two_pi_rho,
                   identity_residual=r.identity_residual),
        "linking_sum": num(r.linking_sum, 0), "slope": num(r.slope, r.slope_error), "twist": num(r.twist, 0),
    }


def cmd_fried(sc: Scenario):
    from .cycles import FriedConfig, fried_check

    p = sc.params
    link = [resolve_orbit(sc.system, s) for s in p["link"]]
    cfg = FriedConfig(samples=p["samples"], horizon=p["horizon"], seed=sc.seed, tube_excl=p["tube_excl"],
                      rho_tol=p["rho_tol"], mu_tol=p["mu_tol"], coefficients=p["coefficients"],
                      half_check=p["half_check"])
    rep = fried_check(sc.system, link, cfg)
    rec = rep.to_record()
    rec["text"] = rep.to_text().splitlines()
    return rec


def _page(sc):
    from .sections import build_page

    p = sc.params
    return build_page(sc.system, p["binding"], p["theta0"], p.get("tilt", 0.0))


def cmd_section(sc: Scenario):
    from .sections import return_time_bounds, transversality_scan

    p = sc.params
    page = _page(sc)
    tr = transversality_scan(page, p["n_rho"], 2 * p["n_phi"])
    out = {"page": {k: (num(v, 0) if isinstance(v, float) else v) for k, v in page.describe().items()},
           "transversality": num(tr.minimum, 1e-12, location=list(tr.location), transverse=tr.transverse,
                                 expected=page.expected_rate)}
    if not page.tilt:
        b = return_time_bounds(page, p["n_rho"], p["n_phi"])
        out["return_time"] = {"inf": num(b.inf, 1e-6), "sup": num(b.sup, 1e-6), "rows": num(b.rows, 0)}
    return out


def cmd_return_map(sc: Scenario):
    from .sections import area_preservation, return_orbit

    p = sc.params
    page = _page(sc)
    it = return_orbit(page, p["start"][0], p["start"][1], p["iterations"])
    out = {"page": page.describe(),
           "iterates": [{"k": num(k, 0), "rho": num(r, 1e-9), "phi": num(f, 1e-9), "tau": num(t, 1e-9)}
                        for k, (r, f, t) in enumerate(it)]}
    if p["rectangles"]:
        ac = area_preservation(page, p["rectangles"], seed=sc.seed or 0)
        out["area_preservation"] = num(ac.max_rel_error, 1e-4, before=ac.before, after=ac.after)
    out["page"] = {k: (num(v, 0) if isinstance(v, float) else v) for k, v in out["page"].items()}
    return out


def cmd_area(sc: Scenario):
    from .sections import page_area

    page = _page(sc)
    a = page_area(page)
    return {"page": {k: (num(v, 0) if isinstance(v, float) else v) for k, v in page.describe().items()},
            "area": num(a.quadrature, 1e-5, stokes=a.stokes, rel_diff=a.rel_diff,
                        binding_action=a.binding_action)}


HANDLERS = {
    "orbits": cmd_orbits, "spectrum": cmd_spectrum, "cz": cmd_cz, "convexity": cmd_convexity,
    "linking": cmd_linking, "rotation": cmd_rotation, "fried": cmd_fried, "section": cmd_section,
    "return-map": cmd_return_map, "area": cmd_area,
}


# ---------------------------------------------------------------------------
# output


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])


def emit_plotdata(command: str, result: dict, out_dir) -> list[Path]:
    """Write the CSV plot data of a result; returns the files written."""
    out = Path(out_dir)
    written = []
    if command == "spectrum":
        rows = sorted((e["nu"]["value"], e["wind"]["value"]) for e in result.get("entries", []))
        p = out / "spectrum.csv"
        _write_csv(p, ["nu", "wind"], rows)
        written.append(p)
    elif command == "fried":
        samples = result.get("intersection", {}).get("samples", [])
        rows = [(s["index"], s["T_n"]["value"], s["estimate"]["value"]) for s in samples]
        p = out / "samples.csv"
        _write_csv(p, ["index", "T_n", "estimate"], rows)
        written.append(p)
    elif command == "return-map":
        rows = [(it["k"]["value"], it["rho"]["value"], it["phi"]["value"], it["tau"]["value"])
                for it in result.get("iterates", [])]
        p = out / "iterates.csv"
        _write_csv(p, ["k", "rho", "phi", "tau"], rows)
        written.append(p)
    elif command == "cz":
        rows = [(r["k"]["value"], r["cz"]["value"]) for r in result.get("rows", [])]
        p = out / "cz.csv"
        _write_csv(p, ["k", "cz"], rows)
        written.append(p)
    return written


def run(scenario: Scenario, out_dir=None) -> dict:
    """Execute a validated scenario and write its artifacts; returns the record."""
    result = HANDLERS[scenario.command](scenario)
    record = {
        "reeblab_version": __version__,
        "scenario": scenario.describe(),
        "system": {"label": scenario.system.label, "params": _plain(scenario.system.params)},
        "params": _plain(scenario.params),
        "tolerances": _plain(scenario.tolerances),
        "result": wrap_numbers(_plain(result)),
    }
    out = Path(out_dir or scenario.out_dir or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    text = json.dumps(record, sort_keys=True, indent=2, allow_nan=False) + "\n"
    (out / "result.json").write_text(text)
    if scenario.csv:
        emit_plotdata(scenario.command, record["result"], out)
    return record


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="reeblab",
        description="Reeb-flow index, linking and section computations on star-shaped hypersurfaces.",
        epilog="Environment: REEBLAB_THREADS caps worker threads; REEBLAB_PURE_PYTHON=1 disables the "
               "compiled kernels. Exit status: 0 ok, 1 computation error, 2 config error.",
    )
    ap.add_argument("--version", action="version", version=f"reeblab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    def common(p):
        p.add_argument("--out", help=f"output directory (default: config output.dir or ./{DEFAULT_OUT})")
        p.add_argument("--seed", type=_u64, help="64-bit seed; overrides the config seed")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    r = sub.add_parser("run", help="run a scenario file; the command is read from the file")
    r.add_argument("scenario", help="scenario file (YAML)")
    common(r)
    for c in COMMANDS:
        p = sub.add_parser(c, help=f"run the {c} computation")
        p.add_argument("--config", required=True, help="scenario file (YAML)")
        common(p)
    return ap


def _u64(s):
    try:
        v = int(s, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "run":
            sc = load_scenario(args.scenario, None, args.seed)
        else:
            sc = load_scenario(args.config, args.command, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        record = run(sc, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ReeblabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    res = record["result"]
    if "verdict" in res:
        print(f"{sc.command}: verdict {res['verdict']}")
    else:
        print(f"{sc.command}: ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
