"""Command-line front end: ``clustersim {cavity,ensemble,sweep,verify}``.

Single runs write a JSON report; sweeps write CSV. Pass ``--no-timestamp``
to make the output byte-for-byte reproducible.

Sweep files are TOML::

    scheme = "cavity"            # or "ensemble"
    parameter = "N"              # N, kappa, tau, offset_fraction, g2_ratio
    values = [2, 3, 4, 5, 6]     # or: linspace = [start, stop, count]
    tie_rates = true             # optional: tau follows kappa (and vice versa)

    [fixed]                      # optional overrides for the other inputs
    kappa = 0.1
    tau = 0.1
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cavity_qed import StageConfig, initial_register, run_chain, timing_offset_stage
from .cluster_verify import cluster_fidelity, reference_signs, stabilizer_expectations
from .core_linalg import StateVector, SubsystemLayout
from .ensembles import build_cluster_ensembles

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SWEEP_PARAMETERS = ("N", "kappa", "tau", "offset_fraction", "g2_ratio")
CAVITY_DEFAULTS = {"N": 2, "kappa": 0.0, "tau": 0.0, "offset_fraction": 0.0,
                   "g2_ratio": math.sqrt(3.0), "early_atom": 1}
ENSEMBLE_DEFAULTS = {"N": 2, "gate_mode": "abstract", "sign_convention": "h_phase", "seed": None}
OFFSET_NOTE = ("timing offset: early atom alone for offset*t, both atoms for (1-offset)*t, "
               "late atom alone for offset*t; fidelity sums over cavity photon numbers")

REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["scheme", "inputs", "fidelity", "success_probability", "per_stage", "version"],
    "properties": {
        "scheme": {"enum": ["cavity", "ensemble"]},
        "inputs": {"type": "object"},
        "fidelity": {"type": "number", "minimum": 0, "maximum": 1.000000001},
        "success_probability": {"type": "number", "minimum": 0, "maximum": 1.000000001},
        "per_stage": {"type": "array", "items": {"type": "object"}},
        "version": {"type": "string"},
        "timestamp": {"type": "string"},
        "notes": {"type": "array", "items": {"type": "string"}},
        "details": {"type": "object"},
    },
    "additionalProperties": False,
}


class UsageError(Exception):
    pass


@dataclass
class RunReport:
    scheme: str
    inputs: dict
    fidelity: float
    success_probability: float
    per_stage: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    version: str = __version__
    timestamp: str | None = None

    def to_dict(self) -> dict:
        out = {"scheme": self.scheme, "inputs": self.inputs, "fidelity": self.fidelity,
               "success_probability": self.success_probability, "per_stage": self.per_stage,
               "version": self.version, "notes": self.notes, "details": self.details}
        if self.timestamp is not None:
            out["timestamp"] = self.timestamp
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        return cls(data["scheme"], data["inputs"], data["fidelity"], data["success_probability"],
                   data["per_stage"], data.get("notes", []), data.get("details", {}),
                   data["version"], data.get("timestamp"))


# -- runners (plain functions so the sweep can fan them out) -------------------


def run_cavity(params: dict) -> tuple[RunReport, StateVector]:
    p = {**CAVITY_DEFAULTS, **params}
    n, offset = int(p["N"]), float(p["offset_fraction"])
    cfg = StageConfig.canonical(kappa=float(p["kappa"]), tau=float(p["tau"]),
                                g2_ratio=float(p["g2_ratio"]))
    strict = cfg.is_canonical
    inputs = {"N": n, "kappa": cfg.kappa, "tau": cfg.tau, "g2_ratio": float(p["g2_ratio"]),
              "offset_fraction": offset, "early_atom": int(p["early_atom"]), "t": cfg.t}
    if offset > 0:
        if n != 2:
            raise UsageError("timing offsets are modelled for the two-atom stage only (use --n 2)")
        early = f"atom{int(p['early_atom'])}"
        res = timing_offset_stage(initial_register(2), ("atom1", "atom2"), cfg, offset, early)
        report = RunReport("cavity", inputs, res.fidelity, res.survival_probability,
                           [res.stage.as_dict()], [OFFSET_NOTE])
        return report, res.stage.state
    strict = strict and cfg.kappa == cfg.tau
    chain = run_chain(n, cfg, leakage_tol=1e-9 if strict else None)
    notes = []
    if not strict:
        worst = max(s.cavity_leakage for s in chain.per_stage)
        notes.append("non-canonical stage (g2 ratio or unequal decay rates): cavity projected "
                     f"onto vacuum after each stage, largest residue {worst:.3g}")
    report = RunReport("cavity", inputs, chain.fidelity, chain.success_probability,
                       [s.as_dict() for s in chain.per_stage], notes)
    return report, chain.state


def run_ensemble(params: dict) -> RunReport:
    p = {**ENSEMBLE_DEFAULTS, **params}
    n = int(p["N"])
    mode = str(p["gate_mode"]).replace("-", "_")
    seed = None if p["seed"] is None else int(p["seed"])
    res = build_cluster_ensembles(n, mode, p["sign_convention"], seed)
    inputs = {"N": n, "gate_mode": mode, "sign_convention": p["sign_convention"], "seed": seed}
    details = res.as_dict()
    details.pop("fidelity")
    details.pop("success_probability")
    return RunReport("ensemble", inputs, res.fidelity, res.success_probability,
                     [{"step": line} for line in res.log], [], details)


def _sweep_point(job: tuple[str, dict]) -> dict:
    scheme, params = job
    if scheme == "cavity":
        report, _ = run_cavity(params)
    else:
        report = run_ensemble(params)
    return {**report.inputs, "fidelity": report.fidelity,
            "success_probability": report.success_probability}


# -- I/O helpers ---------------------------------------------------------------


def _timestamp(args) -> str | None:
    if args.no_timestamp:
        return None
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8", newline="")


def _write_report(report: RunReport, path: str) -> None:
    _write_text(path, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def _print_summary(report: RunReport) -> None:
    print(f"fidelity {report.fidelity:.6g}")
    print(f"probability {report.success_probability:.6g}")


def state_to_json(state: StateVector) -> dict:
    return {"layout": [[label, dim] for label, dim in state.layout.factors],
            "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes]}


def state_from_json(data: dict) -> StateVector:
    try:
        layout = SubsystemLayout(tuple((str(lab), int(dim)) for lab, dim in data["layout"]))
        amps = np.array([complex(re, im) for re, im in data["amplitudes"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed state file: {exc}") from None
    return StateVector(layout, amps)


# -- sweep specification ---------------------------------------------------------


@dataclass
class SweepSpec:
    scheme: str
    parameter: str
    values: list
    fixed: dict = field(default_factory=dict)
    tie_rates: bool = False

    def points(self) -> list[dict]:
        out = []
        for value in self.values:
            params = dict(self.fixed)
            params[self.parameter] = value
            if self.tie_rates and self.parameter in ("kappa", "tau"):
                params["tau" if self.parameter == "kappa" else "kappa"] = value
            out.append(params)
        return out


def parse_sweep(text: str, source: str = "<sweep>") -> SweepSpec:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line, col = getattr(exc, "lineno", None), getattr(exc, "colno", None)
        where = f"{source}:{line}:{col}" if line is not None else source
        raise UsageError(f"{where}: {getattr(exc, 'msg', exc)} (line {line}, column {col})"
                         if line is not None else f"{where}: {exc}") from None
    scheme = raw.get("scheme", "cavity")
    if scheme not in ("cavity", "ensemble"):
        raise UsageError(f"{source}: scheme must be 'cavity' or 'ensemble', got {scheme!r}")
    parameter = raw.get("parameter")
    allowed = SWEEP_PARAMETERS if scheme == "cavity" else ("N",)
    if parameter not in allowed:
        raise UsageError(f"{source}: parameter must be one of {allowed}, got {parameter!r}")
    if ("values" in raw) == ("linspace" in raw):
        raise UsageError(f"{source}: give exactly one of 'values' or 'linspace'")
    if "values" in raw:
        values = raw["values"]
        if not isinstance(values, list) or not values:
            raise UsageError(f"{source}: 'values' must be a non-empty array")
    else:
        lin = raw["linspace"]
        if not (isinstance(lin, list) and len(lin) == 3 and float(lin[2]).is_integer() and lin[2] >= 1):
            raise UsageError(f"{source}: 'linspace' must be [start, stop, count]")
        values = [float(v) for v in np.linspace(float(lin[0]), float(lin[1]), int(lin[2]))]
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise UsageError(f"{source}: sweep value {v!r} is not a finite number")
    if parameter == "N":
        if any(float(v) != int(v) for v in values):
            raise UsageError(f"{source}: N values must be integers")
        values = [int(v) for v in values]
    else:
        values = [float(v) for v in values]
    fixed = raw.get("fixed", {})
    if not isinstance(fixed, dict):
        raise UsageError(f"{source}: [fixed] must be a table")
    known = set(CAVITY_DEFAULTS if scheme == "cavity" else ENSEMBLE_DEFAULTS)
    unknown = set(fixed) - known
    if unknown:
        raise UsageError(f"{source}: unknown fixed inputs {sorted(unknown)}")
    extra = set(raw) - {"scheme", "parameter", "values", "linspace", "fixed", "tie_rates"}
    if extra:
        raise UsageError(f"{source}: unknown keys {sorted(extra)}")
    return SweepSpec(scheme, parameter, values, dict(fixed), bool(raw.get("tie_rates", False)))


def _fmt(value) -> str:
    if isinstance(value, bool) or value is None:
        return "" if value is None else str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def sweep_csv(spec: SweepSpec, workers: int = 1) -> str:
    jobs = [(spec.scheme, point) for point in spec.points()]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(job) for job in jobs]
    if spec.scheme == "cavity":
        columns = ["N", "kappa", "tau", "offset_fraction", "g2_ratio", "early_atom"]
    else:
        columns = ["N", "gate_mode", "sign_convention", "seed"]
    columns += ["fidelity", "success_probability"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


# -- commands --------------------------------------------------------------------


def cmd_cavity(args) -> int:
    params = {"N": args.n, "kappa": args.kappa, "tau": args.tau, "offset_fraction": args.offset,
              "g2_ratio": args.g2_ratio, "early_atom": args.early_atom}
    report, state = run_cavity(params)
    report.timestamp = _timestamp(args)
    _write_report(report, args.output)
    if args.state_out:
        _write_text(args.state_out, json.dumps(state_to_json(state), indent=2) + "\n")
    if args.output != "-":
        _print_summary(report)
    return 0


def cmd_ensemble(args) -> int:
    params = {"N": args.n, "gate_mode": args.mode, "sign_convention": args.sign_convention,
              "seed": args.seed}
    report = run_ensemble(params)
    report.timestamp = _timestamp(args)
    _write_report(report, args.output)
    if args.output != "-":
        _print_summary(report)
    return 0


def cmd_sweep(args) -> int:
    path = Path(args.spec_file)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read sweep file: {exc}") from None
    spec = parse_sweep(text, str(path))
    _write_text(args.output, sweep_csv(spec, args.workers))
    return 0


def cmd_verify(args) -> int:
    try:
        data = json.loads(Path(args.state_file).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read state file: {exc}") from None
    state = state_from_json(data)
    n = len(state.layout.factors)
    fid = cluster_fidelity(state, n)
    print(f"cluster_fidelity {fid:.12g}")
    try:
        values = stabilizer_expectations(state, n)
    except ValueError as exc:
        print(f"stabilizers unavailable: {exc}")
        return 0
    for j, (value, sign) in enumerate(zip(values, reference_signs(n)), start=1):
        print(f"K{j} {value:.12g} (ideal {sign:+d})")
    return 0


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _rate(text: str) -> float:
    value = float(text)
    if not math.isfinite(value) or value < 0:
        raise argparse.ArgumentTypeError("must be a finite non-negative number")
    return value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clustersim", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    cav = sub.add_parser("cavity", help="cavity-QED chain (or timing-offset stage)")
    cav.add_argument("--n", type=int, default=2, help="number of atoms (>= 2)")
    cav.add_argument("--kappa", type=_rate, default=0.0, help="cavity decay rate in units of g1")
    cav.add_argument("--tau", type=_rate, default=0.0, help="spontaneous emission rate in units of g1")
    cav.add_argument("--g2-ratio", type=_rate, default=math.sqrt(3.0), help="g2/g1")
    cav.add_argument("--offset", type=float, default=0.0, help="entry offset as a fraction of t")
    cav.add_argument("--early-atom", type=int, choices=(1, 2), default=1)
    cav.add_argument("--output", default="cavity_report.json", help="JSON report path ('-' for stdout)")
    cav.add_argument("--state-out", help="also write the final atomic state (for `verify`)")
    cav.add_argument("--no-timestamp", action="store_true")
    cav.set_defaults(func=cmd_cavity)

    ens = sub.add_parser("ensemble", help="atomic-ensemble cluster pipeline")
    ens.add_argument("--n", type=int, default=2)
    ens.add_argument("--mode", choices=("abstract", "measurement-based", "measurement_based"),
                     default="abstract")
    ens.add_argument("--sign-convention", choices=("h_phase", "verbatim"), default="h_phase")
    ens.add_argument("--seed", type=int, default=None, help="sample the reported measurement branch")
    ens.add_argument("--output", default="ensemble_report.json")
    ens.add_argument("--no-timestamp", action="store_true")
    ens.set_defaults(func=cmd_ensemble)

    sw = sub.add_parser("sweep", help="parameter sweep from a TOML file, CSV out")
    sw.add_argument("spec_file")
    sw.add_argument("--output", default="-", help="CSV path ('-' for stdout)")
    sw.add_argument("--workers", type=_positive_int, default=1)
    sw.add_argument("--no-timestamp", action="store_true", help="accepted for symmetry; CSV has none")
    sw.set_defaults(func=cmd_sweep)

    ver = sub.add_parser("verify", help="cluster fidelity and stabilizers of a state file")
    ver.add_argument("state_file")
    ver.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "offset", 0.0) and not 0.0 <= args.offset < 1.0:
            raise UsageError("--offset must lie in [0, 1)")
        return args.func(args)
    except UsageError as exc:
        print(f"clustersim: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"clustersim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
