"""Batch front door: JSON config in, CSV/JSON results plus metadata out.

Exit status contract: 0 = all criteria of the dispatched experiment passed,
2 = experiment ran but criteria failed (results still written), 1 =
operational error (bad config, I/O, sampler abort).
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import os
import sys

from dataclasses import dataclass

import numpy as np

from . import __version__
from .analysis import (
    ObservableId,
    equivalence_experiment,
    hbar_sweep,
)
from .classical import (
    EquationId,
    action_gap,
    kink_profile,
    odd_gap_prediction,
    odd_kink,
    residual,
    solve_broken_bvp,
)
from .core import Branch, Lattice, ModelParams, make_lattice, make_params
from .action import discrete_ito_identity_residual
from .sampler import SamplerConfig
from .transform import numeric_jacobian_det

COMMANDS = (
    "equivalence",
    "classical-limit",
    "bvp",
    "kink",
    "ito-check",
    "jacobian-check",
)

DEFAULT_OBSERVABLES = ("MIDPOINT_SQ", "MEAN_SQ", "ENDPOINT")
DEFAULT_HBAR_LIST = (0.5, 0.2, 0.1, 0.05)
OUTPUT_DIR_ENV = "KINKLAB_OUTPUT_DIR"

_GAP_AUDIT_NODES = 4_000_000  # fine grid for the odd-kink action-gap audit


class ConfigError(ValueError):
    """Base for configuration problems (exit status 1)."""


class ParseError(ConfigError):
    """Malformed config document."""


class ValidationError(ConfigError):
    """Well-formed document with an invalid or unknown field."""


@dataclass(frozen=True)
class ExperimentSpec:
    command: str
    branch: Branch
    params: ModelParams
    T: float
    N: int
    sampler: SamplerConfig
    observables: tuple[ObservableId, ...]
    hbar_list: tuple[float, ...]
    threads: int | None
    output_path: str | None
    format: str


def _take(section: dict, taken: dict, path: str):
    unknown = set(section) - set(taken)
    if unknown:
        raise ValidationError(f"unknown key '{path}{sorted(unknown)[0]}'")


def _number(doc: dict, key: str, default, path: str, *, integer: bool = False):
    if key not in doc:
        return default
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ValidationError(f"field '{path}{key}' must be a number, got {val!r}")
    if integer:
        if isinstance(val, float) and not val.is_integer():
            raise ValidationError(f"field '{path}{key}' must be an integer, got {val!r}")
        return int(val)
    return float(val)


def parse_dict(doc: dict) -> ExperimentSpec:
    """Validate a config document and apply defaults."""
    if not isinstance(doc, dict):
        raise ValidationError("config root must be an object")
    known = {
        "command", "branch", "params", "lattice", "sampler",
        "observables", "hbar_list", "threads", "output_path", "format",
    }
    _take(doc, dict.fromkeys(known), "")

    command = doc.get("command")
    if command not in COMMANDS:
        raise ValidationError(
            f"field 'command' must be one of {list(COMMANDS)}, got {command!r}"
        )

    branch_name = doc.get("branch", "plus")
    try:
        branch = Branch(str(branch_name).lower())
    except ValueError:
        raise ValidationError(f"field 'branch' must be 'plus' or 'minus', got {branch_name!r}")

    p = doc.get("params", {})
    if not isinstance(p, dict):
        raise ValidationError("field 'params' must be an object")
    _take(p, {"a": 0, "b": 0, "hbar": 0}, "params.")
    try:
        params = make_params(
            a=_number(p, "a", 1.0, "params."),
            b=_number(p, "b", 2.0, "params."),
            hbar=_number(p, "hbar", 1.0, "params."),
        )
    except ValueError as exc:
        raise ValidationError(f"params: {exc}") from exc

    lat = doc.get("lattice", {})
    if not isinstance(lat, dict):
        raise ValidationError("field 'lattice' must be an object")
    _take(lat, {"T": 0, "N": 0}, "lattice.")
    T = _number(lat, "T", 1.0, "lattice.")
    N = _number(lat, "N", 32, "lattice.", integer=True)
    try:
        make_lattice(T, N)
    except ValueError as exc:
        raise ValidationError(f"lattice: {exc}") from exc

    smp = doc.get("sampler", {})
    if not isinstance(smp, dict):
        raise ValidationError("field 'sampler' must be an object")
    fields = {
        "n_samples": 0, "n_burnin": 0, "n_thin": 0, "proposal_width": 0,
        "seed": 0, "x0": 0, "blowup_threshold": 0, "blowup_budget": 0,
        "n_walkers": 0,
    }
    _take(smp, fields, "sampler.")
    try:
        sampler = SamplerConfig(
            n_samples=_number(smp, "n_samples", 100_000, "sampler.", integer=True),
            n_burnin=_number(smp, "n_burnin", 1000, "sampler.", integer=True),
            n_thin=_number(smp, "n_thin", 4, "sampler.", integer=True),
            proposal_width=_number(smp, "proposal_width", 0.5, "sampler."),
            seed=_number(smp, "seed", 42, "sampler.", integer=True),
            x0=_number(smp, "x0", 0.0, "sampler."),
            blowup_threshold=_number(smp, "blowup_threshold", 1e6, "sampler."),
            blowup_budget=_number(smp, "blowup_budget", 0.01, "sampler."),
            n_walkers=_number(smp, "n_walkers", 64, "sampler.", integer=True),
        )
    except ValueError as exc:
        raise ValidationError(f"sampler: {exc}") from exc

    obs_names = doc.get("observables", list(DEFAULT_OBSERVABLES))
    if not isinstance(obs_names, list) or not all(isinstance(o, str) for o in obs_names):
        raise ValidationError("field 'observables' must be a list of names")
    observables = []
    for name in obs_names:
        try:
            observables.append(ObservableId[name.upper()])
        except KeyError:
            raise ValidationError(
                f"field 'observables': unknown observable {name!r} "
                f"(choose from {[o.name for o in ObservableId]})"
            )

    hl = doc.get("hbar_list", list(DEFAULT_HBAR_LIST))
    if not isinstance(hl, list) or not all(
        isinstance(h, (int, float)) and not isinstance(h, bool) for h in hl
    ):
        raise ValidationError("field 'hbar_list' must be a list of numbers")
    hbar_list = tuple(float(h) for h in hl)

    threads = doc.get("threads")
    if threads is not None:
        if isinstance(threads, bool) or not isinstance(threads, int) or threads < 1:
            raise ValidationError(f"field 'threads' must be a positive integer, got {threads!r}")

    output_path = doc.get("output_path")
    if output_path is not None and not isinstance(output_path, str):
        raise ValidationError("field 'output_path' must be a string")

    fmt = doc.get("format", "CSV")
    if fmt not in ("CSV", "JSON"):
        raise ValidationError(f"field 'format' must be 'CSV' or 'JSON', got {fmt!r}")

    return ExperimentSpec(
        command=command,
        branch=branch,
        params=params,
        T=T,
        N=N,
        sampler=sampler,
        observables=tuple(observables),
        hbar_list=hbar_list,
        threads=threads,
        output_path=output_path,
        format=fmt,
    )


def parse_config(text: str) -> ExperimentSpec:
    """Parse a JSON config document into a fully validated spec."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"config parse error: {exc.msg} (line {exc.lineno}, column {exc.colno})"
        ) from exc
    return parse_dict(doc)


def spec_to_dict(spec: ExperimentSpec) -> dict:
    """Round-trippable plain-data form of a spec (also embedded in metadata)."""
    s = spec.sampler
    return {
        "command": spec.command,
        "branch": spec.branch.value,
        "params": {"a": spec.params.a, "b": spec.params.b, "hbar": spec.params.hbar},
        "lattice": {"T": spec.T, "N": spec.N},
        "sampler": {
            "n_samples": s.n_samples,
            "n_burnin": s.n_burnin,
            "n_thin": s.n_thin,
            "proposal_width": s.proposal_width,
            "seed": s.seed,
            "x0": s.x0,
            "blowup_threshold": s.blowup_threshold,
            "blowup_budget": s.blowup_budget,
            "n_walkers": s.n_walkers,
        },
        "observables": [o.name for o in spec.observables],
        "hbar_list": list(spec.hbar_list),
        "threads": spec.threads,
        "output_path": spec.output_path,
        "format": spec.format,
    }


def serialize_config(spec: ExperimentSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2, sort_keys=True)


def apply_override(doc: dict, assignment: str) -> None:
    """Apply one --set KEY=VALUE override (dotted keys reach into sections)."""
    if "=" not in assignment:
        raise ValidationError(f"override {assignment!r} is not KEY=VALUE")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    target = doc
    parts = key.split(".")
    for part in parts[:-1]:
        target = target.setdefault(part, {})
        if not isinstance(target, dict):
            raise ValidationError(f"override {key!r} descends into a non-object")
    target[parts[-1]] = value


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_rows(path: str, fmt: str, header: list[str], rows: list[list]) -> None:
    if fmt == "CSV":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    else:
        payload = {"rows": [dict(zip(header, row)) for row in rows]}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _resolve_output(spec: ExperimentSpec) -> str:
    ext = "csv" if spec.format == "CSV" else "json"
    name = spec.output_path or f"{spec.command}.{ext}"
    if os.path.isabs(name):
        return name
    base = os.environ.get(OUTPUT_DIR_ENV, ".")
    return os.path.join(base, name)


def _run_equivalence(spec: ExperimentSpec, lattice: Lattice, threads: int):
    report = equivalence_experiment(
        lattice, spec.params, spec.branch, spec.sampler, spec.observables, threads=threads
    )
    header = [
        "observable", "mean_mapped", "stderr_mapped",
        "mean_metropolis", "stderr_metropolis", "z", "pass",
    ]
    rows = []
    for r in report.rows:
        mm = r.mapped.mean if np.ndim(r.mapped.mean) == 0 else float(np.mean(r.mapped.mean))
        hm = r.metropolis.mean if np.ndim(r.metropolis.mean) == 0 else float(np.mean(r.metropolis.mean))
        sm = r.mapped.stderr if np.ndim(r.mapped.stderr) == 0 else float(np.max(r.mapped.stderr))
        sh = r.metropolis.stderr if np.ndim(r.metropolis.stderr) == 0 else float(np.max(r.metropolis.stderr))
        rows.append([r.observable.name, mm, sm, hm, sh, r.z, r.passed])
    extra = {
        "acceptance_rate": report.acceptance_rate,
        "n_rejected_blowups": report.n_rejected_blowups,
    }
    return header, rows, report.all_passed, extra


def _run_classical_limit(spec: ExperimentSpec, lattice: Lattice, threads: int):
    report = hbar_sweep(
        lattice, spec.params, spec.branch, spec.hbar_list, spec.sampler, threads=threads
    )
    header = [
        "hbar", "rms_dev_from_kink", "max_el_symmetric_residual",
        "mean_el_broken_residual", "n_blowups",
    ]
    rows = [
        [r.hbar, r.rms_dev_from_kink, r.max_el_symmetric_residual,
         r.mean_el_broken_residual, r.n_rejected_blowups]
        for r in report.rows
    ]
    devs = [r.rms_dev_from_kink for r in report.rows]
    decreasing = all(x > y for x, y in zip(devs, devs[1:]))
    a = spec.params.a
    last = report.rows[-1]
    passed = (
        decreasing
        and last.max_el_symmetric_residual < a / 5.0
        and abs(last.mean_el_broken_residual - a) <= 0.2 * a
    )
    extra = {
        "rms_strictly_decreasing": decreasing,
        "final_max_el_symmetric_residual": last.max_el_symmetric_residual,
        "final_mean_el_broken_residual": last.mean_el_broken_residual,
    }
    return header, rows, passed, extra


def _run_bvp(spec: ExperimentSpec, lattice: Lattice, threads: int):
    guess = np.full(lattice.N + 1, spec.sampler.x0)
    path = solve_broken_bvp(lattice, spec.params, guess)
    r_el = residual(path, EquationId.EL_BROKEN, lattice, spec.params)
    r_bc = residual(path, EquationId.BOUNDARY_COND, lattice, spec.params)
    tol = 1e-6
    passed = float(np.max(np.abs(r_el))) < tol and float(np.max(np.abs(r_bc))) < tol
    header = ["node", "t", "phi"]
    rows = [[i, lattice.times[i], path[i]] for i in range(lattice.N + 1)]
    extra = {
        "left_value": float(path[0]),
        "max_el_broken_residual": float(np.max(np.abs(r_el))),
        "boundary_residual_left": float(r_bc[0]),
        "boundary_residual_right": float(r_bc[1]),
        "tolerance": tol,
    }
    return header, rows, passed, extra


def _run_kink(spec: ExperimentSpec, lattice: Lattice, threads: int):
    solution = odd_kink(spec.params, lattice.T)
    profile = kink_profile(solution, lattice.times)
    r_flow = residual(profile, EquationId.FLOW_PLUS, lattice, spec.params)
    r_sym = residual(profile, EquationId.EL_SYMMETRIC, lattice, spec.params)

    fine = make_lattice(lattice.T, _GAP_AUDIT_NODES)
    gap = action_gap(solution, fine, spec.params)
    prediction = odd_gap_prediction(
        spec.params, kink_profile(solution, lattice.T)
    )
    agreement = abs(gap - prediction)
    passed = agreement < 1e-6

    header = ["node", "t", "phi"]
    rows = [[i, lattice.times[i], profile[i]] for i in range(lattice.N + 1)]
    extra = {
        "alpha": solution.alpha,
        "c": solution.c,
        "max_flow_residual": float(np.max(np.abs(r_flow))),
        "max_el_symmetric_residual": float(np.max(np.abs(r_sym))),
        "action_gap_fine_grid": gap,
        "gap_prediction_odd_path": prediction,
        "gap_abs_error": agreement,
        "gap_audit_nodes": _GAP_AUDIT_NODES,
    }
    return header, rows, passed, extra


def _run_ito_check(spec: ExperimentSpec, lattice: Lattice, threads: int):
    rng = np.random.default_rng(spec.sampler.seed)
    n_paths = 1000
    worst = 0.0
    for _ in range(n_paths):
        path = rng.normal(0.0, 2.0, lattice.N + 1)
        scale = max(1.0, float(np.max(np.abs(path))) ** 3)
        worst = max(worst, abs(discrete_ito_identity_residual(path)) / scale)
    passed = worst < 1e-10
    header = ["n_paths", "max_rel_residual", "pass"]
    rows = [[n_paths, worst, passed]]
    extra = {"max_rel_residual": worst}
    return header, rows, passed, extra


def _run_jacobian_check(spec: ExperimentSpec, lattice: Lattice, threads: int):
    rng = np.random.default_rng(spec.sampler.seed)
    n_paths = 20
    dets = []
    for _ in range(n_paths):
        path = rng.normal(0.0, 2.0, lattice.N + 1)
        dets.append(numeric_jacobian_det(path, spec.branch, lattice, spec.params))
    max_dev = max(abs(d - 1.0) for d in dets)
    passed = max_dev < 1e-6
    header = ["det", "max_abs_deviation", "n_paths", "tolerance_pass"]
    rows = [[dets[0], max_dev, n_paths, passed]]
    extra = {"det": dets[0], "max_abs_deviation": max_dev, "tolerance_pass": passed}
    return header, rows, passed, extra


_RUNNERS = {
    "equivalence": _run_equivalence,
    "classical-limit": _run_classical_limit,
    "bvp": _run_bvp,
    "kink": _run_kink,
    "ito-check": _run_ito_check,
    "jacobian-check": _run_jacobian_check,
}


def execute(spec: ExperimentSpec) -> int:
    """Run the experiment, write results plus a metadata sidecar."""
    lattice = make_lattice(spec.T, spec.N)
    threads = spec.threads or os.cpu_count() or 1
    header, rows, passed, extra = _RUNNERS[spec.command](spec, lattice, threads)

    out_path = _resolve_output(spec)
    out_dir = os.path.dirname(out_path)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    _write_rows(out_path, spec.format, header, rows)

    clean_extra = {
        k: (None if isinstance(v, float) and math.isnan(v) else v)
        for k, v in extra.items()
    }
    meta = {
        "command": spec.command,
        "code_version": __version__,
        "criteria_passed": passed,
        "output_path": out_path,
        "results": clean_extra,
        "seed": spec.sampler.seed,
        "spec": spec_to_dict(spec),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(out_path + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0 if passed else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kinklab",
        description="Lattice path-integral laboratory (double well vs free field).",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    run_p = sub.add_parser("run", help="run an experiment from a JSON config")
    run_p.add_argument(
        "config", nargs="?", default=None,
        help="JSON config file (omit to start from defaults and use --set)",
    )
    run_p.add_argument(
        "--set", action="append", dest="overrides", metavar="KEY=VALUE", default=[],
        help="override a config field, e.g. --set sampler.seed=7",
    )
    args = parser.parse_args(argv)

    try:
        if args.config is None:
            doc = {}
        else:
            with open(args.config) as fh:
                text = fh.read()
            try:
                doc = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ParseError(
                    f"config parse error: {exc.msg} (line {exc.lineno}, column {exc.colno})"
                ) from exc
            if not isinstance(doc, dict):
                raise ValidationError("config root must be an object")
        for assignment in args.overrides:
            apply_override(doc, assignment)
        spec = parse_dict(doc)
        return execute(spec)
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"kinklab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
