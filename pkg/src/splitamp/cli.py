"""Command-line interface: ``splitamp <command> [options]``.

Exit codes: 0 success, 2 input error, 3 non-convergence, 4 precondition
violation.  Options may also come from a JSON run-spec file given with
``--config``; explicit flags take precedence over the file.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cc import SolverConfig, solve_ccsd
from .ci import extract_overlaps, fci
from .ci.overlaps import OverlapSet
from .errors import ConvergenceError, InputError, PreconditionError, SplitAmpError
from .estimator import (
    PowerLawModel,
    ShotBudgetQuery,
    count_overlaps,
    fit_power_law,
    read_power_law_csv,
    shot_budget,
)
from .integrals import ActiveSpaceSpec, build_fock
from .noise import noise_study
from .workflows import casci, casci_overlaps, eccc, load_basis, resolve_path, tccsd

log = logging.getLogger("splitamp")

EXIT_OK, EXIT_INPUT, EXIT_CONVERGENCE, EXIT_PRECONDITION = 0, 2, 3, 4
SIG = 12


def fmt(x):
    """Round floats (recursively) to 12 significant digits for stable output."""
    if isinstance(x, dict):
        return {k: fmt(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [fmt(v) for v in x]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if not math.isfinite(x) or x == 0.0 else float(f"{x:.{SIG}g}")
    if isinstance(x, np.integer):
        return int(x)
    return x


def num(x) -> str:
    return "" if x is None else f"{float(x):.{SIG}g}"


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, output):
    _emit(json.dumps(fmt(obj), indent=2, sort_keys=True) + "\n", output)


# -- option groups -----------------------------------------------------------
def _add_common(p, fcidump=True):
    if fcidump:
        p.add_argument("fcidump", nargs="?", help="FCIDUMP path or builtin:<name>")
    p.add_argument("--config", help="JSON run-spec file; flags override its values")
    p.add_argument("-o", "--output", help="write results here instead of stdout")
    p.add_argument("-v", "--verbose", action="count", default=None)


def _add_solver(p):
    g = p.add_argument_group("solver")
    g.add_argument("--max-iterations", type=int)
    g.add_argument("--tolerance", type=float, help="residual infinity-norm tolerance")
    g.add_argument("--diis-depth", type=int)
    g.add_argument("--level-shift", type=float)
    g.add_argument("--t1t3-mode", choices=["frozen", "iterative"])


def _add_active(p):
    g = p.add_argument_group("active space")
    g.add_argument("--cas", nargs=2, type=int, metavar=("NELEC", "NORB"),
                   help="CAS(NELEC, NORB) centred on the Fermi level")
    g.add_argument("--active", help="comma-separated active spatial orbitals (0-based)")
    g.add_argument("--nalpha", type=int, help="active alpha electrons (with --active)")
    g.add_argument("--nbeta", type=int, help="active beta electrons (with --active)")
    g.add_argument("--overlaps", help="overlap JSONL file (quantum-input branch)")
    g.add_argument("--c0-threshold", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="splitamp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scf-info", help="reference energy and Fock diagonal")
    _add_common(p)

    p = sub.add_parser("casci", help="CASCI (or FCI without an active space)")
    _add_common(p)
    _add_active(p)

    p = sub.add_parser("extract-overlaps", help="write CASCI/FCI overlaps as JSONL")
    _add_common(p)
    _add_active(p)
    p.add_argument("--max-rank", type=int)

    p = sub.add_parser("ccsd", help="plain CCSD")
    _add_common(p)
    _add_solver(p)
    p.add_argument("--amplitudes-out", help="write converged amplitudes as JSONL")

    p = sub.add_parser("tccsd", help="tailored CCSD")
    _add_common(p)
    _add_solver(p)
    _add_active(p)

    p = sub.add_parser("eccc", help="externally corrected CCSD")
    _add_common(p)
    _add_solver(p)
    _add_active(p)
    t = p.add_mutually_exclusive_group()
    t.add_argument("--type1", dest="type2", action="store_false", default=None, help="keep disconnected T3/T4")
    t.add_argument("--type2", dest="type2", action="store_true", help="drop purely disconnected T3/T4 (default)")
    p.add_argument("--k", type=float, help="variance filter significance multiple (default 2)")
    p.add_argument("--literal-filter", action="store_true", default=None)

    p = sub.add_parser("noise-sweep", help="sample the energy error under Gaussian overlap noise")
    _add_common(p)
    _add_solver(p)
    _add_active(p)
    p.add_argument("--workflow", choices=["tccsd", "eccc"])
    p.add_argument("--sigmas", type=float, nargs="+")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-boot", type=int)

    p = sub.add_parser("shot-budget", help="shots for a target error from T1 diagnostics")
    _add_common(p, fcidump=False)
    p.add_argument("--t1", type=float, nargs="+", help="T1 diagnostic values")
    p.add_argument("--t1-csv", help="CSV with a t1_diag column (and optional label/R column)")
    p.add_argument("--d", type=int, help="overlap count")
    p.add_argument("--cas-count", nargs=3, type=int, metavar=("NSP", "NA", "NB"),
                   help="derive d from the active space (TCCSD count)")
    p.add_argument("--N", type=int, help="total spin orbitals")
    p.add_argument("--n", type=int, help="qubits (active spin orbitals)")
    p.add_argument("--target", type=float, help="target error in Eh (default 1e-3)")

    p = sub.add_parser("count-overlaps", help="number of overlaps d for a CAS")
    _add_common(p, fcidump=False)
    p.add_argument("--cas", nargs=3, type=int, metavar=("NSP", "NA", "NB"))
    p.add_argument("--method", choices=["tccsd", "eccc"])

    p = sub.add_parser("fit-powerlaw", help="fit a*d^beta*N^gamma to a noise-error dataset")
    _add_common(p, fcidump=False)
    p.add_argument("csv", nargs="?", help="CSV with label, d, N, sigma, mean_abs_error")
    p.add_argument("--n-boot", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("curve", help="energies over several geometries as long-format CSV")
    _add_common(p, fcidump=False)
    _add_solver(p)
    _add_active(p)
    p.add_argument("fcidumps", nargs="*", help="one FCIDUMP per geometry")
    p.add_argument("--labels", help="comma-separated geometry labels")
    p.add_argument("--methods", help="comma-separated subset of hf,ccsd,casci,tccsd,eccc")
    return ap


DEFAULTS = {
    "max_rank": 4, "k": 2.0, "type2": True, "literal_filter": False, "workflow": "tccsd",
    "sigmas": [1e-4, 1e-3, 1e-2], "samples": 30, "seed": 0, "n_boot": 1000, "target": 1e-3,
    "method": "tccsd", "methods": "ccsd,casci,tccsd", "verbose": 0,
}


def merge_config(args: argparse.Namespace) -> dict:
    opts = {}
    if getattr(args, "config", None):
        try:
            opts.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(opts, dict):
            raise InputError("config file must contain a JSON object")
        opts = {k.replace("-", "_"): v for k, v in opts.items()}
    for k, v in vars(args).items():
        if v is not None:
            opts[k] = v
    for k, v in DEFAULTS.items():
        opts.setdefault(k, v)
    return opts


def solver_config(o: dict) -> SolverConfig:
    kw = {}
    for flag, field in [("max_iterations", "max_iterations"), ("tolerance", "residual_tolerance"),
                        ("diis_depth", "diis_depth"), ("level_shift", "level_shift"), ("t1t3_mode", "t1t3_mode")]:
        if o.get(flag) is not None:
            kw[field] = o[flag]
    if isinstance(o.get("solver"), dict):
        kw = {**o["solver"], **kw}
    return SolverConfig(**kw)


def _basis(o):
    if not o.get("fcidump"):
        raise InputError("an FCIDUMP path is required")
    return load_basis(o["fcidump"])


def _overlaps(o):
    return OverlapSet.from_jsonl(resolve_path(o["overlaps"])) if o.get("overlaps") else None


def active_space(o: dict, basis, overlaps: OverlapSet | None = None) -> ActiveSpaceSpec:
    """Active space from --cas, --active, the overlap file, or the full space."""
    if o.get("cas"):
        ne, norb = o["cas"]
        return ActiveSpaceSpec.around_fermi_level(basis, ne, norb)
    if o.get("active") is not None:
        act = o["active"]
        orbs = [int(x) for x in act.split(",") if x.strip()] if isinstance(act, str) else list(act)
        occ = set(basis.occ)
        na = o.get("nalpha", sum(1 for p in orbs if p in occ))
        nb = o.get("nbeta", sum(1 for p in orbs if p + basis.n_spatial in occ))
        return ActiveSpaceSpec(tuple(orbs), na, nb)
    if overlaps is not None:
        n = basis.n_spatial
        orbs = sorted({p % n for p in overlaps.occ + overlaps.vir})
        na = sum(1 for p in overlaps.occ if p < n)
        return ActiveSpaceSpec(tuple(orbs), na, len(overlaps.occ) - na)
    return ActiveSpaceSpec(tuple(range(basis.n_spatial)), basis.n_alpha, basis.n_beta)


def _c0(o):
    from .ci.overlaps import C0_THRESHOLD

    return o.get("c0_threshold") or C0_THRESHOLD


def _check_converged(res):
    if not res.converged:
        raise ConvergenceError(f"CC did not converge after {res.iterations} iterations "
                               f"(residual {res.final_residual_norm:.3e})")


# -- commands --------------------------------------------------------------
def cmd_scf_info(o):
    basis = _basis(o)
    fock, e_hf = build_fock(basis)
    occ, vir = list(basis.occ), list(basis.vir)
    brillouin = float(np.abs(fock[np.ix_(occ, vir)]).max(initial=0.0))
    _emit_json({"e_hf": e_hf, "e_core": basis.e_core, "n_spatial": basis.n_spatial,
                "n_alpha": basis.n_alpha, "n_beta": basis.n_beta, "fock_diagonal": np.diag(fock).tolist(),
                "max_abs_fock_ov": brillouin}, o.get("output"))


def cmd_casci(o):
    basis = _basis(o)
    spec = active_space(o, basis)
    res = casci(basis, spec)
    _, e_hf = build_fock(basis)
    _emit_json({"e_total": res.e_total, "e_correlation": res.e_total - e_hf, "e_hf": e_hf,
                "e_frozen_core": res.e_frozen_core, "active_orbitals": list(spec.active_spatial_orbitals),
                "n_determinants": len(res.state.basis)}, o.get("output"))


def cmd_extract_overlaps(o):
    basis = _basis(o)
    spec = active_space(o, basis)
    ov, _ = casci_overlaps(basis, spec, int(o["max_rank"]), _c0(o))
    _emit(ov.to_jsonl(), o.get("output"))


def cmd_ccsd(o):
    basis = _basis(o)
    res = solve_ccsd(basis, solver_config(o))
    if o.get("amplitudes_out"):
        res.amplitudes.to_jsonl(o["amplitudes_out"])
    _emit_json(res.to_dict(), o.get("output"))
    _check_converged(res)


def cmd_tccsd(o):
    basis = _basis(o)
    ov = _overlaps(o)
    spec = active_space(o, basis, ov)
    res = tccsd(basis, spec, solver_config(o), overlaps=ov, c0_threshold=_c0(o))
    out = res.to_dict()
    out["active_orbitals"] = list(spec.active_spatial_orbitals)
    out["overlap_source"] = "file" if ov is not None else "casci"
    _emit_json(out, o.get("output"))
    _check_converged(res)


def cmd_eccc(o):
    basis = _basis(o)
    ov = _overlaps(o)
    spec = active_space(o, basis, ov)
    res, report = eccc(basis, spec, solver_config(o), overlaps=ov, type2=bool(o["type2"]), k=float(o["k"]),
                       literal_filter=bool(o["literal_filter"]), c0_threshold=_c0(o))
    out = res.to_dict()
    out.update(type="II" if o["type2"] else "I", n_t3=len(res.amplitudes.t3), n_t4=len(res.amplitudes.t4),
               n_zeroed_by_variance=report.n_zeroed_by_variance,
               n_dropped_disconnected=report.n_dropped_disconnected,
               overlap_source="file" if ov is not None else "casci")
    _emit_json(out, o.get("output"))
    _check_converged(res)


def cmd_noise_sweep(o):
    basis = _basis(o)
    ov = _overlaps(o)
    spec = active_space(o, basis, ov)
    if ov is None:
        ov, _ = casci_overlaps(basis, spec, 2 if o["workflow"] == "tccsd" else 4, _c0(o))
    res = noise_study(o["workflow"], ov, basis, spec, [float(s) for s in o["sigmas"]], int(o["samples"]),
                      int(o["seed"]), solver_config(o), bool(o["type2"]), float(o["k"]), int(o["n_boot"]))
    if res.beta_sigma is not None:
        log.info("beta_sigma = %.6f +- %.6f", res.beta_sigma, res.beta_sigma_err)
        sys.stderr.write(f"beta_sigma = {res.beta_sigma:.6f} +- {res.beta_sigma_err:.6f}\n")
    _emit(res.to_csv(), o.get("output"))


def _read_t1_csv(path):
    rows = list(csv.DictReader(io.StringIO(Path(resolve_path(path)).read_text())))
    if not rows or "t1_diag" not in rows[0]:
        raise InputError("T1 CSV needs a t1_diag column")
    key = next((k for k in ("label", "R", "r_angstrom") if k in rows[0]), None)
    return [(r[key] if key else str(i), float(r["t1_diag"])) for i, r in enumerate(rows)]


def cmd_shot_budget(o):
    rows = []
    if o.get("t1_csv"):
        rows += _read_t1_csv(o["t1_csv"])
    if o.get("t1"):
        rows += [(str(i), float(t)) for i, t in enumerate(o["t1"])]
    if not rows:
        raise InputError("give --t1 values or --t1-csv")
    d = o.get("d")
    if d is None and o.get("cas_count"):
        d = count_overlaps(*o["cas_count"], method="tccsd")
    if d is None or o.get("N") is None or o.get("n") is None:
        raise InputError("--d (or --cas-count), --N and --n are required")
    model = PowerLawModel()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "t1_diag", "a", "s", "s_low", "s_high"])
    total = 0
    for label, t1 in rows:
        b = shot_budget(ShotBudgetQuery(t1, float(o["target"]), int(d), int(o["N"]), int(o["n"])), model)
        total += b.s
        w.writerow([label, num(t1), num(b.a), b.s, b.s_low, b.s_high])
    w.writerow(["total", "", "", total, "", ""])
    _emit(buf.getvalue(), o.get("output"))


def cmd_count_overlaps(o):
    if not o.get("cas"):
        raise InputError("--cas NSP NA NB is required")
    _emit(f"{count_overlaps(*o['cas'], method=o['method'])}\n", o.get("output"))


def cmd_fit_powerlaw(o):
    if not o.get("csv"):
        raise InputError("a dataset CSV is required")
    try:
        records = read_power_law_csv(resolve_path(o["csv"]))
    except OSError as exc:
        raise InputError(str(exc)) from exc
    model = fit_power_law(records, n_boot=int(o.get("n_boot", 50_000)), seed=int(o["seed"]))
    _emit_json({"beta": model.beta, "beta_err": model.beta_err, "gamma": model.gamma,
                "gamma_err": model.gamma_err, "a": model.a, "n_records": len(records),
                "n_boot": model.n_boot, "per_label_prefactors": model.per_label_prefactors}, o.get("output"))


CURVE_COLUMNS = ["label", "method", "e_total", "e_correlation", "e_as", "e_ext", "converged", "iterations", "error"]


def emit_curve(fcidumps, labels, methods, o) -> str:
    """Long-format CSV over geometries; failures are recorded per row."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    config = solver_config(o)
    for label, path in zip(labels, fcidumps):
        try:
            basis = load_basis(path)
            _, e_hf = build_fock(basis)
        except SplitAmpError as exc:
            for m in methods:
                w.writerow([label, m, "", "", "", "", False, "", f"{type(exc).__name__}: {exc}"])
            continue
        for m in methods:
            row = {"label": label, "method": m}
            try:
                if m == "hf":
                    row.update(e_total=e_hf, e_correlation=0.0, converged=True)
                elif m == "ccsd":
                    r = solve_ccsd(basis, config)
                    row.update(e_total=r.e_total, e_correlation=r.e_correlation, converged=r.converged,
                               iterations=r.iterations)
                elif m == "casci":
                    r = casci(basis, active_space(o, basis))
                    row.update(e_total=r.e_total, e_correlation=r.e_total - e_hf, converged=True)
                elif m == "tccsd":
                    r = tccsd(basis, active_space(o, basis), config)
                    row.update(e_total=r.e_total, e_correlation=r.e_correlation, e_as=r.e_as, e_ext=r.e_ext,
                               converged=r.converged, iterations=r.iterations)
                elif m == "eccc":
                    r, _ = eccc(basis, active_space(o, basis), config)
                    row.update(e_total=r.e_total, e_correlation=r.e_correlation, converged=r.converged,
                               iterations=r.iterations)
                else:
                    raise InputError(f"unknown method {m!r}")
            except SplitAmpError as exc:
                row.update(converged=False, error=f"{type(exc).__name__}: {exc}")
            w.writerow([num(row.get(c)) if c.startswith("e_") else row.get(c, "") for c in CURVE_COLUMNS])
    return buf.getvalue()


def cmd_curve(o):
    paths = o.get("fcidumps") or []
    if not paths:
        raise InputError("give one FCIDUMP per geometry")
    labels = o.get("labels")
    labels = labels.split(",") if isinstance(labels, str) else (labels or [Path(str(p)).stem for p in paths])
    if len(labels) != len(paths):
        raise InputError("number of labels does not match number of FCIDUMPs")
    methods = o["methods"].split(",") if isinstance(o["methods"], str) else list(o["methods"])
    _emit(emit_curve(paths, labels, methods, o), o.get("output"))


COMMANDS = {
    "scf-info": cmd_scf_info, "casci": cmd_casci, "extract-overlaps": cmd_extract_overlaps, "ccsd": cmd_ccsd,
    "tccsd": cmd_tccsd, "eccc": cmd_eccc, "noise-sweep": cmd_noise_sweep, "shot-budget": cmd_shot_budget,
    "count-overlaps": cmd_count_overlaps, "fit-powerlaw": cmd_fit_powerlaw, "curve": cmd_curve,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        o = merge_config(args)
        logging.basicConfig(level=logging.WARNING - 10 * min(int(o["verbose"]), 2),
                            format="%(levelname)s %(name)s: %(message)s")
        COMMANDS[args.command](o)
    except ConvergenceError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONVERGENCE
    except PreconditionError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PRECONDITION
    except (InputError, FileNotFoundError, IsADirectoryError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
