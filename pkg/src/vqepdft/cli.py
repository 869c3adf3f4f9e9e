"""Command-line entry point: ``vqepdft <subcommand> [flags]``.

Exit codes: 0 success, 1 domain error, 2 usage error (bad flags, missing
or unreadable input files). Result documents go through
:func:`vqepdft.io_formats.emit_results`; diagnostics go to stderr.

Option precedence is flags > ``--config`` JSON file > built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .errors import MaxIterExceeded, ParseError, VqePdftError

ANSATZ_CHOICES = ("uccsd", "rouccsd", "chea", "ohea")
MAPPING_CHOICES = ("parity", "jordan_wigner")
MODE_CHOICES = ("exact", "shots", "shots+readout")
OPTIMIZER_CHOICES = ("gradient_lbfgs", "nelder_mead")
UNIT_CHOICES = ("hartree", "ev")

DEFAULTS = {
    "basis": "sto-3g",
    "charge": 0,
    "mapping": "parity",
    "mode": "exact",
    "shots": 2048,
    "calibration_shots": 8192,
    "restarts": 10,
    "optimizer": "gradient_lbfgs",
    "max_iter": 1000,
    "temp": 300.0,
    "format": "json",
    "radial": 60,
    "angular": 14,
    "unit": "hartree",
    "mitigation": True,
}
CHOICES = {
    "ansatz": ANSATZ_CHOICES,
    "mapping": MAPPING_CHOICES,
    "mode": MODE_CHOICES,
    "optimizer": OPTIMIZER_CHOICES,
    "format": ("json", "csv"),
    "unit": UNIT_CHOICES,
}


class UsageError(Exception):
    """Bad invocation: reported with exit code 2."""


# --- parser -------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of option values (flags take precedence)")
    p.add_argument("--output", help="write the result document here instead of stdout")
    p.add_argument("--format", help="json (default) or csv (flattened key,value rows)")
    p.add_argument("--threads", type=int, help="cap BLAS/OpenMP worker threads")
    p.add_argument("--seed", type=int, help="RNG seed; required for sampled measurement modes")


def _system(p: argparse.ArgumentParser) -> None:
    p.add_argument("--geom", help="XYZ geometry file")
    p.add_argument("--unit-geom", dest="geom_unit", help="override geometry units: bohr or angstrom")
    p.add_argument("--basis", help="sto-3g or 6-31g")
    p.add_argument("--charge", type=int, help="molecular charge")
    p.add_argument("--spin", type=int, help="2S of the active space (default: lowest)")
    p.add_argument("--active", help="active window 'ne,no' (default: all electrons and orbitals)")
    p.add_argument("--fcidump", help="FCIDUMP file (instead of --geom)")


def _variational(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ansatz", help="uccsd, rouccsd, chea or ohea (default: uccsd if closed shell, else rouccsd)")
    p.add_argument("--mapping", help="parity (tapered) or jordan_wigner")
    p.add_argument("--restarts", type=int, help="VQE restarts (best kept)")
    p.add_argument("--optimizer", help="gradient_lbfgs or nelder_mead")
    p.add_argument("--max-iter", dest="max_iter", type=int, help="iteration cap per restart")
    p.add_argument("--params", help="parameter file to use instead of optimising")
    p.add_argument("--save-params", dest="save_params", help="write optimised parameters here")


def _measurement(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", help="exact, shots or shots+readout")
    p.add_argument("--shots", type=int, help="shots per measurement group")
    p.add_argument("--calibration-shots", dest="calibration_shots", type=int, help="shots per calibration column")
    p.add_argument("--f0", type=float, help="readout fidelity for |0> (default 0.9835)")
    p.add_argument("--f1", type=float, help="readout fidelity for |1> (default 0.9588)")
    p.add_argument("--no-mitigation", dest="mitigation", action="store_const", const=False,
                   help="skip readout-error mitigation")
    p.add_argument("--rdm-out", dest="rdm_out", help="write the measured RDMs as text matrices")


def _grid(p: argparse.ArgumentParser) -> None:
    p.add_argument("--radial", type=int, help="radial points per atom")
    p.add_argument("--angular", type=int, help="polar Gauss-Legendre order per atom")
    p.add_argument("--grid-out", dest="grid_out", help="write the orbital grid file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vqepdft", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("scf", help="RHF and active-space integrals")
    _common(p)
    _system(p)
    p.add_argument("--write-fcidump", dest="write_fcidump", help="write the active-space FCIDUMP here")

    p = sub.add_parser("fci", help="exact active-space ground state")
    _common(p)
    _system(p)

    p = sub.add_parser("vqe", help="variational ground state on the exact path")
    _common(p)
    _system(p)
    _variational(p)

    p = sub.add_parser("rdm", help="measured 1-/2-RDMs of the VQE state")
    _common(p)
    _system(p)
    _variational(p)
    _measurement(p)

    p = sub.add_parser("pdft", help="on-top energy from measured RDMs")
    _common(p)
    _system(p)
    _variational(p)
    _measurement(p)
    _grid(p)

    p = sub.add_parser("pipeline", help="geometry -> SCF -> VQE -> RDMs -> PDFT")
    _common(p)
    _system(p)
    _variational(p)
    _measurement(p)
    _grid(p)

    p = sub.add_parser("marcus", help="Marcus rate, ensemble averages and four-point energies")
    msub = p.add_subparsers(dest="marcus_command", metavar="action")
    msub.required = True
    q = msub.add_parser("rate", help="rate from lambda, dG and <|H_DA|^2>")
    _common(q)
    q.add_argument("--lambda", dest="lambda_", type=float, help="reorganisation energy (eV)")
    q.add_argument("--dg", type=float, help="driving force (eV, positive)")
    q.add_argument("--hda2", type=float, help="<|H_DA|^2> (eV^2)")
    q.add_argument("--temp", type=float, help="temperature (K)")
    q = msub.add_parser("ensemble", help="frame-table means and the rate at the means")
    _common(q)
    q.add_argument("--frames", nargs="+", help="frame CSV file(s), merged on frame id")
    q.add_argument("--temp", type=float, help="temperature (K)")
    q = msub.add_parser("fourpoint", help="lambda and dG from four single-point energies")
    _common(q)
    q.add_argument("--energies", nargs=4, type=float, metavar=("E_II", "E_FI", "E_FF", "E_IF"),
                   help="state/geometry energies: initial@initial, final@initial, final@final, initial@final")
    q.add_argument("--results", nargs=4, metavar=("II", "FI", "FF", "IF"),
                   help="four pipeline result documents in the same order")
    q.add_argument("--key", help="dotted key read from each result document (default pdft.total)")
    q.add_argument("--unit", help="energy unit of --energies: hartree (default) or ev")
    q.add_argument("--hda2", type=float, help="also report the rate with this <|H_DA|^2> (eV^2)")
    q.add_argument("--temp", type=float, help="temperature (K)")
    return parser


# --- option resolution --------------------------------------------------------

def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise UsageError(f"{what} file not found: {path}") from None
    except OSError as exc:
        raise UsageError(f"cannot read {what} file {path}: {exc.strerror}") from None


def resolve(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    given = {k: v for k, v in vars(args).items() if v is not None}
    config: dict = {}
    if args.config:
        try:
            config = json.loads(_read_text(args.config, "config"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config}: {exc.msg} (line {exc.lineno})") from None
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        config = {k.replace("-", "_"): v for k, v in config.items()}
        if "lambda" in config:
            config["lambda_"] = config.pop("lambda")
        unknown = sorted(set(config) - set(vars(args)))
        if unknown:
            raise UsageError(f"config has unknown option(s) {unknown} for this command")
    merged = {k: DEFAULTS.get(k) for k in vars(args)}
    merged.update(config)
    merged.update(given)
    ns = argparse.Namespace(**merged)
    for key, allowed in CHOICES.items():
        val = getattr(ns, key, None)
        if val is not None:
            val = str(val).lower().replace("-", "_") if key == "mapping" else str(val).lower()
            if val == "jw":
                val = "jordan_wigner"
            if val not in allowed:
                raise UsageError(f"--{key.replace('_', '-')} must be one of {', '.join(allowed)}")
            setattr(ns, key, val)
    return ns


# --- shared steps -------------------------------------------------------------

class System:
    """Active-space Hamiltonian plus whatever produced it."""

    def __init__(self, h, ints=None, scf=None, source=""):
        self.h = h
        self.ints = ints
        self.scf = scf
        self.source = source

    def describe(self) -> dict:
        h = self.h
        out = {
            "source": self.source,
            "n_orbitals": h.n_orb,
            "n_alpha": h.n_alpha,
            "n_beta": h.n_beta,
            "e_core": h.e_core,
        }
        if self.scf is not None:
            out["scf"] = self.scf
        return out


def _parse_active(text: str) -> tuple[int, int]:
    try:
        ne, no = (int(t) for t in str(text).split(","))
    except ValueError:
        raise UsageError(f"--active expects 'ne,no', got {text!r}") from None
    return ne, no


def load_system(ns) -> System:
    from .hamiltonian import ActiveSpaceHamiltonian
    from .integrals import Integrals, SBasis, make_active_space, parse_xyz, rhf
    from .io_formats import parse_fcidump

    if ns.fcidump and ns.geom:
        raise UsageError("give either --fcidump or --geom, not both")
    if ns.fcidump:
        rec = parse_fcidump(_read_text(ns.fcidump, "FCIDUMP"))
        h = ActiveSpaceHamiltonian.from_fcidump(rec)
        if ns.spin is not None:
            if (h.n_electrons + ns.spin) % 2 or ns.spin > h.n_electrons:
                raise UsageError("--spin is inconsistent with the FCIDUMP electron count")
            h = h.with_electrons((h.n_electrons + ns.spin) // 2, (h.n_electrons - ns.spin) // 2)
        return System(h, source=os.path.basename(ns.fcidump))
    if not ns.geom:
        raise UsageError("a Hamiltonian source is required: --geom or --fcidump")
    geom = parse_xyz(_read_text(ns.geom, "geometry"), ns.geom_unit)
    ints = Integrals.compute(geom, SBasis.from_name(geom, ns.basis))
    n_el = geom.n_electrons_neutral - int(ns.charge)
    if n_el < 1:
        raise UsageError(f"charge {ns.charge} leaves no electrons")
    # closed-shell orbitals: the N+1 system supplies them for odd N
    n_scf = n_el if n_el % 2 == 0 else n_el + 1
    mos = rhf(ints, n_scf)
    if ns.active:
        ne, no = _parse_active(ns.active)
    else:
        ne, no = n_el, len(ints.basis)
    h = make_active_space(mos, ints, no, ne, spin_2s=ns.spin, n_electrons=n_el)
    scf = {
        "energy": mos.energy,
        "n_electrons": n_scf,
        "iterations": mos.iterations,
        "orbital_energies": [float(e) for e in mos.orbital_energies],
    }
    return System(h, ints, scf, source=os.path.basename(ns.geom))


def _default_family(h) -> str:
    return "uccsd" if h.n_alpha == h.n_beta else "rouccsd"


def build_variational(ns, system: System):
    from .ansatz import AnsatzSpec, build_ansatz

    family = ns.ansatz or _default_family(system.h)
    spec = AnsatzSpec.for_hamiltonian(family, system.h, ns.mapping)
    return build_ansatz(spec)


def run_vqe(ns, system: System, ansatz) -> tuple[np.ndarray, dict]:
    from .vqe import VqeOptions, export_parameters, import_parameters, minimize

    enc = ansatz.spec.encoding
    hq = enc.map_hamiltonian(system.h)
    if ns.params:
        params = import_parameters(_read_text(ns.params, "parameter"))
        if params.size != ansatz.n_params:
            raise UsageError(f"parameter file holds {params.size} values, ansatz needs {ansatz.n_params}")
        from .simulator import Observable, run
        energy = Observable(hq).expectation(run(ansatz.circuit, params))
        info = {"energy": energy, "optimized": False}
    else:
        opts = VqeOptions(optimizer=ns.optimizer, restarts=ns.restarts, max_iter=ns.max_iter,
                          seed=0 if ns.seed is None else ns.seed)
        try:
            res = minimize(hq, ansatz, opts)
        except MaxIterExceeded as exc:
            res = exc.result
            print(f"warning: {exc}", file=sys.stderr)
        params = res.parameters
        info = {
            "energy": res.energy,
            "optimized": True,
            "converged": res.converged,
            "iterations": res.iterations,
            "restart_index": res.restart_index,
            "gradient_norm": res.gradient_norm,
        }
        if ns.save_params:
            Path(ns.save_params).write_text(export_parameters(res), encoding="utf-8")
    info.update({
        "ansatz": ansatz.spec.family,
        "mapping": enc.scheme,
        "tapered": enc.tapered,
        "n_qubits": enc.n_qubits,
        "n_params": ansatz.n_params,
        "depth": ansatz.depth,
        "parameters": [float(x) for x in params],
    })
    return params, info


def measurement_plan(ns, n_qubits: int):
    from .rdm import MeasurementPlan
    from .simulator import HARDWARE_F0, HARDWARE_F1, ReadoutModel

    if ns.mode != "exact" and ns.seed is None:
        raise UsageError(f"--seed is required in {ns.mode} mode")
    readout = None
    if ns.mode == "shots+readout":
        f0 = HARDWARE_F0 if ns.f0 is None else ns.f0
        f1 = HARDWARE_F1 if ns.f1 is None else ns.f1
        readout = ReadoutModel.uniform(n_qubits, f0, f1)
    if ns.shots < 1 or ns.calibration_shots < 1:
        raise UsageError("shot counts must be positive")
    seed = 0 if ns.seed is None else ns.seed
    return MeasurementPlan(mode=ns.mode, shots=ns.shots, seed=seed,
                           readout=readout,
                           mitigation=bool(ns.mitigation), calibration_shots=ns.calibration_shots)


def run_rdm(ns, system: System, ansatz, params) -> tuple[object, dict]:
    from .rdm import measure_rdms, plan_size, rdms_to_text

    enc = ansatz.spec.encoding
    plan = measurement_plan(ns, enc.n_qubits)
    rdms = measure_rdms(ansatz.circuit, params, enc, plan)
    if ns.rdm_out:
        Path(ns.rdm_out).write_text(rdms_to_text(rdms), encoding="utf-8")
    info = {
        "mode": plan.mode,
        "shots": plan.shots if plan.mode != "exact" else None,
        "mitigation": plan.mitigation if plan.mode == "shots+readout" else None,
        "energy": rdms.energy(system.h),
        "trace_gamma": float(np.trace(rdms.gamma)),
        "gamma": [[float(x) for x in row] for row in rdms.gamma],
        **plan_size(enc),
    }
    return rdms, info


def run_pdft(ns, system: System, rdms) -> dict:
    from .grid import write_grid
    from .pdft import PdftProblem, assemble_energy, pdft_energy

    if system.ints is None:
        print("note: FCIDUMP input carries no orbitals; E_ot and the PDFT total are not available",
              file=sys.stderr)
        return assemble_energy(system.h, rdms)
    problem = PdftProblem.from_active_space(system.h, system.ints)
    grid = problem.grid(ns.radial, ns.angular)
    if ns.grid_out:
        Path(ns.grid_out).write_text(write_grid(grid), encoding="utf-8")
    out = pdft_energy(problem, rdms, grid)
    out["grid_points"] = grid.npoints
    return out


# --- subcommands --------------------------------------------------------------

def cmd_scf(ns) -> dict:
    system = load_system(ns)
    if system.ints is None:
        raise UsageError("scf needs --geom")
    if ns.write_fcidump:
        from .io_formats import write_fcidump
        Path(ns.write_fcidump).write_text(write_fcidump(system.h.to_fcidump()), encoding="utf-8")
    return {"command": "scf", "system": system.describe()}


def cmd_fci(ns) -> dict:
    from .fci import fci_ground

    system = load_system(ns)
    res = fci_ground(system.h)
    return {
        "command": "fci",
        "system": system.describe(),
        "fci": {"energy": res.energy, "determinants": res.basis.size, "residual": res.residual},
    }


def _fci_energy(system: System) -> float:
    from .fci import fci_ground
    return fci_ground(system.h).energy


def cmd_vqe(ns) -> dict:
    system = load_system(ns)
    ansatz = build_variational(ns, system)
    _, info = run_vqe(ns, system, ansatz)
    fci = _fci_energy(system)
    info["fci_energy"] = fci
    info["error"] = info["energy"] - fci
    return {"command": "vqe", "system": system.describe(), "vqe": info}


def cmd_rdm(ns) -> dict:
    system = load_system(ns)
    ansatz = build_variational(ns, system)
    params, vinfo = run_vqe(ns, system, ansatz)
    _, rinfo = run_rdm(ns, system, ansatz, params)
    return {"command": "rdm", "system": system.describe(), "vqe": vinfo, "rdm": rinfo}


def cmd_pdft(ns) -> dict:
    system = load_system(ns)
    ansatz = build_variational(ns, system)
    params, vinfo = run_vqe(ns, system, ansatz)
    rdms, rinfo = run_rdm(ns, system, ansatz, params)
    return {"command": "pdft", "system": system.describe(), "vqe": vinfo,
            "rdm": {k: v for k, v in rinfo.items() if k != "gamma"}, "pdft": run_pdft(ns, system, rdms)}


def cmd_pipeline(ns) -> dict:
    if not ns.geom:
        raise UsageError("pipeline needs --geom")
    system = load_system(ns)
    ansatz = build_variational(ns, system)
    params, vinfo = run_vqe(ns, system, ansatz)
    fci = _fci_energy(system)
    vinfo["fci_energy"] = fci
    vinfo["error"] = vinfo["energy"] - fci
    rdms, rinfo = run_rdm(ns, system, ansatz, params)
    return {
        "command": "pipeline",
        "stages": ["scf", "active_space", "mapping", "vqe", "rdm", "pdft"],
        "system": system.describe(),
        "vqe": vinfo,
        "rdm": rinfo,
        "pdft": run_pdft(ns, system, rdms),
    }


def _lookup(doc: dict, dotted: str, path: str) -> float:
    node = doc
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            raise UsageError(f"{path}: no key {dotted!r}")
        node = node[part]
    if not isinstance(node, (int, float)) or isinstance(node, bool):
        raise VqePdftError(f"{path}: {dotted} is not a number")
    return float(node)


def cmd_marcus(ns) -> dict:
    from .io_formats import FourPointEnergies, merge_frame_tables, parse_frame_table, parse_results
    from .marcus import HARTREE_TO_EV, MarcusParams, ensemble_stats, four_point, rate

    action = ns.marcus_command
    if action == "rate":
        missing = [f for f, v in (("--lambda", ns.lambda_), ("--dg", ns.dg), ("--hda2", ns.hda2)) if v is None]
        if missing:
            raise UsageError(f"marcus rate needs {', '.join(missing)}")
        k = rate(MarcusParams(ns.lambda_, ns.dg, ns.hda2, ns.temp))
        return {"command": "marcus rate", "lambda": ns.lambda_, "delta_g": ns.dg, "h_da_sq_mean": ns.hda2,
                "temperature": ns.temp, "k_et": k}
    if action == "ensemble":
        if not ns.frames:
            raise UsageError("marcus ensemble needs --frames")
        if isinstance(ns.frames, str):
            ns.frames = [ns.frames]
        tables = [parse_frame_table(_read_text(p, "frame table")) for p in ns.frames]
        return {"command": "marcus ensemble", **ensemble_stats(merge_frame_tables(*tables), ns.temp)}
    # fourpoint
    if (ns.energies is None) == (ns.results is None):
        raise UsageError("fourpoint needs exactly one of --energies or --results")
    if ns.results is not None:
        key = ns.key or "pdft.total"
        vals = []
        for path in ns.results:
            try:
                vals.append(_lookup(parse_results(_read_text(path, "result")), key, path))
            except ParseError as exc:
                raise UsageError(f"{path}: {exc}") from None
        unit = "hartree"
    else:
        vals, unit = list(ns.energies), ns.unit
    if unit == "ev":
        vals = [v / HARTREE_TO_EV for v in vals]
    out = {"command": "marcus fourpoint", **four_point(FourPointEnergies(*vals)), "temperature": ns.temp}
    if ns.hda2 is not None:
        out["h_da_sq_mean"] = ns.hda2
        out["k_et"] = rate(MarcusParams(out["lambda"], out["delta_g"], ns.hda2, ns.temp))
    return out


COMMANDS = {
    "scf": cmd_scf,
    "fci": cmd_fci,
    "vqe": cmd_vqe,
    "rdm": cmd_rdm,
    "pdft": cmd_pdft,
    "pipeline": cmd_pipeline,
    "marcus": cmd_marcus,
}


# --- output -------------------------------------------------------------------

def _flatten(node, prefix: str, rows: list) -> None:
    if isinstance(node, dict):
        for k in sorted(node):
            _flatten(node[k], f"{prefix}.{k}" if prefix else str(k), rows)
    elif isinstance(node, (list, tuple)):
        for i, v in enumerate(node):
            _flatten(v, f"{prefix}[{i}]", rows)
    else:
        rows.append((prefix, node))


def render(doc: dict, fmt: str) -> str:
    from .io_formats import emit_results, format_number

    if fmt == "json":
        return emit_results(doc)
    rows: list = []
    _flatten(doc, "", rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in rows:
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif v is None:
            v = ""
        elif isinstance(v, float):
            v = format_number(v)
        w.writerow([k, v])
    return buf.getvalue()


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = resolve(parser, argv)
    except SystemExit as exc:      # argparse usage errors and --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    try:
        with threadpool_limits(limits=ns.threads):
            doc = COMMANDS[ns.command](ns)
        text = render(doc, ns.format)
        if ns.output:
            Path(ns.output).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (VqePdftError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
