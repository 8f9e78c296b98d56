"""Scenario files: parsing, validation, batch runs and parameter sweeps.

Config layout (JSON, ``"schema": 1``)::

    {"schema": 1, "seed": 0,
     "scenarios": [{"name": ..., "model": {...}, "representation": "impedance",
                    "beta": [1, 0], "input": {...}, "initial": {...},
                    "horizon": 5.0, "dt": 0.001, "cells": 32, "audits": [...]}],
     "sweep": {"base": "<scenario name>", "parameters": {"model.R": [1, 10, 100]}}}

Matrices are ``{"rows": r, "cols": c, "data": [...]}`` in row-major order;
complex entries are ``[re, im]`` pairs. Coefficients and signals use the term
library ``{"base": ..., "terms": [{"amplitude": ..., "basis": "sine", "parameter": 1.0}]}``.
"""

from __future__ import annotations

import copy
import csv
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import delay_line as dl
from .errors import (BadBetaError, CoercivityError, ConfigError, InvalidNodeError, NoBetaError,
                     ResolventFailure, StepFailure, StructuralError, ValidationError)
from .evolution import (IMPEDANCE, SCATTERING, audit_power, build_evolution_family, cayley_equivalence,
                        check_composition_laws, estimate_wp_constant, refinement_study, simulate, time_grid)
from .operator_model import (BASES, DiracNodeMatrices, PHSystem, Term, TimeCoefficient, check_dirac_node,
                             check_scattering_passive)
from .signals import Signal

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
# accepted parameters per audit and a check for each value
_NUM = (lambda v: isinstance(v, (int, float)) and not isinstance(v, bool), "a number")
_POS_INT = (lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 1, "a positive integer")
AUDIT_PARAMS: dict[str, dict[str, tuple]] = {
    "certify": {},
    "power": {"conservative": (lambda v: isinstance(v, bool), "true or false")},
    "cayley_equiv": {"tol": _NUM},
    "composition": {"steps": _POS_INT, "tol": _NUM},
    "resolvent": {"lambda": (lambda v: _NUM[0](v) or (isinstance(v, list) and len(v) == 2), "a number or [re, im]"),
                  "min_factor": _NUM},
    "wp_constant": {"trials": _POS_INT, "tol": _NUM},
    "convergence": {"refinements": (lambda v: _POS_INT[0](v) and v >= 2, "an integer >= 2"),
                    "order_range": (lambda v: isinstance(v, list) and len(v) == 2 and all(map(_NUM[0], v)),
                                    "a [low, high] pair")},
}
AUDITS = tuple(AUDIT_PARAMS)
REPRESENTATIONS = (IMPEDANCE, SCATTERING, "both")

EXIT_OK, EXIT_AUDIT, EXIT_PARSE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3, 4
NUMERICAL_ERRORS = (StepFailure, ResolventFailure, CoercivityError, BadBetaError, NoBetaError,
                    np.linalg.LinAlgError, FloatingPointError)


# ---------------------------------------------------------------- parsing


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    if key not in obj:
        raise ConfigError(f"{where} is missing {key!r}")
    return obj[key]


def parse_scalar(value, where="value") -> complex | float:
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, list) and len(value) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return complex(value[0], value[1])
    raise ConfigError(f"{where}: expected a number or an [re, im] pair, got {value!r}")


def _scalars(values, where) -> np.ndarray:
    if not isinstance(values, list):
        raise ConfigError(f"{where}: expected a list")
    parsed = [parse_scalar(v, where) for v in values]
    dtype = complex if any(isinstance(v, complex) for v in parsed) else float
    return np.array(parsed, dtype=dtype)


def parse_matrix(obj, where="matrix") -> np.ndarray:
    rows = _require(obj, "rows", where)
    cols = _require(obj, "cols", where)
    if not (isinstance(rows, int) and isinstance(cols, int)) or rows < 0 or cols < 0:
        raise ConfigError(f"{where}: rows and cols must be non-negative integers")
    data = _scalars(_require(obj, "data", where), where)
    if data.size != rows * cols:
        raise ValidationError(f"{where}: {data.size} entries for a {rows}x{cols} matrix")
    return data.reshape(rows, cols)


def _terms(obj, where, convert):
    terms = obj.get("terms", [])
    if not isinstance(terms, list):
        raise ConfigError(f"{where}.terms must be a list")
    out = []
    for i, t in enumerate(terms):
        w = f"{where}.terms[{i}]"
        basis = _require(t, "basis", w)
        if basis not in BASES:
            raise ValidationError(f"{w}: unknown basis {basis!r}")
        out.append((convert(_require(t, "amplitude", w), w + ".amplitude"), basis,
                    float(parse_scalar(_require(t, "parameter", w), w + ".parameter").real)))
    return out


def parse_coefficient(obj, where="coefficient") -> TimeCoefficient:
    """A bare matrix is a constant coefficient."""
    if isinstance(obj, dict) and "rows" in obj:
        return TimeCoefficient(parse_matrix(obj, where))
    base = parse_matrix(_require(obj, "base", where), where + ".base")
    try:
        return TimeCoefficient(base, tuple(Term(a, b, p) for a, b, p in _terms(obj, where, parse_matrix)))
    except (ValueError, StructuralError) as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def parse_signal(obj, where="signal") -> Signal:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    if "times" in obj:
        times = _scalars(obj["times"], where + ".times").real
        values = _require(obj, "values", where)
        if not isinstance(values, list):
            raise ConfigError(f"{where}.values must be a list")
        # each sample is a list of entries, so [1, 2] is a real 2-vector, not 1+2i
        rows = [_scalars(v, where + ".values") for v in values]
        if len({r.shape for r in rows}) > 1:
            raise ValidationError(f"{where}: samples differ in dimension")
        vals = np.array(rows)
        try:
            return Signal.sampled(times, vals)
        except (ValueError, StructuralError) as exc:
            raise ValidationError(f"{where}: {exc}") from exc
    base = _scalars(_require(obj, "base", where), where + ".base")
    terms = _terms(obj, where, _scalars)
    for amp, _, _ in terms:
        if amp.shape != base.shape:
            raise ValidationError(f"{where}: term amplitude length differs from base")
    return Signal.analytic(base, terms)


@dataclass
class Scenario:
    name: str
    model: dl.DelaySpec | PHSystem
    representation: str = IMPEDANCE
    beta: complex = 1.0
    input: Signal | None = None
    history: Signal | None = None
    state: np.ndarray | None = None
    horizon: float = 1.0
    dt: float = 1e-3
    audits: list[tuple[str, dict]] = field(default_factory=list)
    seed: int = 0
    raw: dict = field(default_factory=dict)

    @property
    def is_delay(self) -> bool:
        return isinstance(self.model, dl.DelaySpec)

    @property
    def port_dim(self) -> int:
        return self.model.port_dim if self.is_delay else self.model.m

    def system(self) -> PHSystem:
        return dl.discretize(self.model) if self.is_delay else self.model

    def initial_state(self, sys: PHSystem) -> np.ndarray:
        if self.state is not None:
            return self.state
        if self.history is not None:
            return dl.initial_state(sys, self.history)
        return np.zeros(sys.n)

    def audit(self, name: str) -> dict | None:
        for audit_name, params in self.audits:
            if audit_name == name:
                return params
        return None


def _parse_model(obj, where, cells_override) -> dl.DelaySpec | PHSystem:
    kind = obj.get("type", "delay") if isinstance(obj, dict) else None
    if kind is None:
        raise ConfigError(f"{where} must be an object")
    try:
        if kind == "delay":
            tau = float(parse_scalar(_require(obj, "tau", where), where + ".tau").real)
            mats = {k: parse_matrix(_require(obj, k, where), f"{where}.{k}") for k in ("H0", "A1", "J", "R", "E")}
            H = parse_coefficient(obj["H"], where + ".H") if "H" in obj else None
            cells = cells_override if cells_override is not None else obj.get("cells", 32)
            if not isinstance(cells, int):
                raise ConfigError(f"{where}.cells must be an integer")
            return dl.DelaySpec(tau, mats["H0"], mats["A1"], mats["J"], mats["R"], mats["E"], H, cells)
        if kind == "node":
            mats = {k: parse_matrix(_require(obj, k, where), f"{where}.{k}") for k in "ABCD"}
            psi = parse_matrix(obj["psi"], where + ".psi") if "psi" in obj else None
            weight = parse_matrix(obj["weight"], where + ".weight") if "weight" in obj else None
            node = DiracNodeMatrices(mats["A"], mats["B"], mats["C"], mats["D"], psi=psi, weight=weight)
            P = parse_coefficient(obj["P"], where + ".P") if "P" in obj else None
            G = parse_coefficient(obj["G"], where + ".G") if "G" in obj else None
            return PHSystem(node, P, G)
    except (InvalidNodeError, StructuralError) as exc:
        raise ValidationError(f"{where}: {exc}") from exc
    raise ValidationError(f"{where}: unknown model type {kind!r}")


def _parse_audits(items, where) -> list[tuple[str, dict]]:
    if not isinstance(items, list):
        raise ConfigError(f"{where} must be a list")
    out = []
    for i, item in enumerate(items):
        if isinstance(item, str):
            name, params = item, {}
        elif isinstance(item, dict) and len(item) == 1:
            name, params = next(iter(item.items()))
            if not isinstance(params, dict):
                raise ConfigError(f"{where}[{i}]: audit parameters must be an object")
        else:
            raise ConfigError(f"{where}[{i}]: expected a name or a single-key object")
        if name not in AUDITS:
            raise ValidationError(f"{where}[{i}]: unknown audit {name!r}; expected one of {AUDITS}")
        for key, value in params.items():
            if key not in AUDIT_PARAMS[name]:
                raise ValidationError(f"{where}[{i}]: {name} takes no parameter {key!r}")
            check, what = AUDIT_PARAMS[name][key]
            if not check(value):
                raise ValidationError(f"{where}[{i}]: {name}.{key} must be {what}")
        out.append((name, params))
    return out


def parse_scenario(obj: dict, seed: int = 0, where: str = "scenario") -> Scenario:
    name = _require(obj, "name", where)
    if not isinstance(name, str) or not name or "/" in name:
        raise ValidationError(f"{where}: name must be a non-empty string without '/'")
    where = f"scenario {name!r}"
    cells = obj.get("cells")
    model = _parse_model(_require(obj, "model", where), where + ".model", cells)
    rep = obj.get("representation", IMPEDANCE)
    if rep not in REPRESENTATIONS:
        raise ValidationError(f"{where}: representation must be one of {REPRESENTATIONS}")
    beta = parse_scalar(obj.get("beta", 1.0), where + ".beta")
    if complex(beta).real <= 0:
        raise ValidationError(f"{where}: beta must have positive real part")
    horizon = float(parse_scalar(_require(obj, "horizon", where), where + ".horizon").real)
    dt = float(parse_scalar(_require(obj, "dt", where), where + ".dt").real)
    if not (horizon > 0 and dt > 0 and dt <= horizon):
        raise ValidationError(f"{where}: need horizon > 0, dt > 0 and dt <= horizon")
    try:
        time_grid(horizon, dt)
    except ValueError as exc:
        raise ValidationError(f"{where}: {exc}") from exc
    audits = _parse_audits(obj.get("audits", []), where + ".audits")
    if rep == "both" and "cayley_equiv" not in [a for a, _ in audits]:
        raise ValidationError(f"{where}: representation 'both' requires the cayley_equiv audit")

    sc = Scenario(name, model, rep, complex(beta), horizon=horizon, dt=dt, audits=audits,
                  seed=int(obj.get("seed", seed)), raw=obj)
    m = sc.port_dim
    sc.input = parse_signal(obj["input"], where + ".input") if "input" in obj else Signal.zero(m)
    if sc.input.dim != m:
        raise ValidationError(f"{where}: input has dimension {sc.input.dim}, ports have {m}")
    initial = obj.get("initial")
    if initial is not None:
        if not isinstance(initial, dict):
            raise ConfigError(f"{where}.initial must be an object")
        if "history" in initial:
            if not sc.is_delay:
                raise ValidationError(f"{where}: an initial history needs a delay model")
            sc.history = parse_signal(initial["history"], where + ".initial.history")
            if sc.history.dim != model.z_dim:
                raise ValidationError(f"{where}: history dimension {sc.history.dim} != {model.z_dim}")
        elif "state" in initial:
            sc.state = _scalars(initial["state"], where + ".initial.state")
            n = (model.cells + 1) * model.z_dim if sc.is_delay else model.n
            if sc.state.shape != (n,):
                raise ValidationError(f"{where}: initial state must have length {n}")
        else:
            raise ConfigError(f"{where}.initial needs 'history' or 'state'")
    if sc.is_delay:
        report = model.check_horizon(horizon)
        if not report.is_coercive or not report.is_self_adjoint:
            raise ValidationError(f"{where}: H(t) is not self-adjoint coercive on [0, {horizon}]")
    return sc


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported or missing schema version (expected {SCHEMA_VERSION})")
    if not isinstance(cfg.get("scenarios"), list) or not cfg["scenarios"]:
        raise ConfigError("config needs a non-empty 'scenarios' list")
    return cfg


def parse_config(cfg: dict, seed: int | None = None) -> list[Scenario]:
    base_seed = int(cfg.get("seed", 0)) if seed is None else seed
    scenarios = [parse_scenario(obj, base_seed, f"scenarios[{i}]") for i, obj in enumerate(cfg["scenarios"])]
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise ValidationError("scenario names must be unique")
    if seed is not None:
        for s in scenarios:
            s.seed = seed
    return scenarios


# ---------------------------------------------------------------- output


def to_jsonable(value: Any):
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value


def _reim(prefix: str, count: int) -> list[str]:
    return [f"{prefix}_{i}_{part}" for i in range(count) for part in ("re", "im")]


def _pairs(row: np.ndarray) -> list[float]:
    row = np.asarray(row, dtype=complex)
    return [float(v) for z in row for v in (z.real, z.imag)]


def write_trajectory_csv(traj, path) -> Path:
    """Columns: time, state_i_re/im, input_j_re/im, output_j_re/im."""
    path = Path(path)
    n, m = traj.states.shape[1], traj.inputs.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time"] + _reim("state", n) + _reim("input", m) + _reim("output", m))
        for k, t in enumerate(traj.times):
            w.writerow([repr(float(t))] + _pairs(traj.states[k]) + _pairs(traj.inputs[k]) + _pairs(traj.outputs[k]))
    return path


def write_ledger_csv(ledger, path) -> Path:
    """One row per grid time; row 0 carries the initial Hamiltonian and zero step terms,
    row k the terms of the step ending at ``t_k``."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "hamiltonian", "supplied_power", "p_drift", "g_term", "residual"])
        for k, t in enumerate(ledger.times):
            if k == 0:
                step = [0.0] * 4
            else:
                step = [ledger.supplied_power[k - 1], ledger.p_drift[k - 1], ledger.g_term[k - 1],
                        ledger.residual[k - 1]]
            w.writerow([repr(float(t)), repr(float(ledger.hamiltonian[k]))] + [repr(float(v)) for v in step])
    return path


# ---------------------------------------------------------------- running


def certificate_report(sc: Scenario, sys: PHSystem | None = None) -> dict:
    sys = sc.system() if sys is None else sys
    out: dict[str, Any] = {}
    failed = []
    if sc.is_delay:
        cm = dl.build_certificates(sc.model)
        rep = dl.certify(sc.model)
        out.update(M=cm.M, N=cm.N, impedance_ok=rep.impedance_ok, scattering_ok=rep.scattering_ok,
                   min_eig_M=rep.min_eig_M, min_eig_N=rep.min_eig_N)
        if not rep.impedance_ok:
            failed.append("M")
    dirac = check_dirac_node(sys.node)
    scat = check_scattering_passive(sys.node)
    out.update(node_is_dirac=dirac.is_dirac, node_dissipativity_margin=dirac.dissipativity_margin,
               beta_found=dirac.beta_found, node_scattering_passive=scat.is_scattering_passive,
               node_scattering_margin=scat.margin)
    if not dirac.is_dirac:
        failed.append("discrete Dirac node")
    out["failed_certificates"] = failed
    out["passed"] = not failed
    return out


def _representations(sc: Scenario) -> list[str]:
    return [IMPEDANCE, SCATTERING] if sc.representation == "both" else [sc.representation]


def _audit_resolvent(sc: Scenario, params: dict) -> dict:
    if not sc.is_delay:
        return {"passed": False, "error": "resolvent audit needs a delay model"}
    lam = parse_scalar(params.get("lambda", 10.0), "resolvent.lambda")
    k, p = sc.model.z_dim, sc.model.port_dim
    x = np.ones(k)
    zero = dl.solve_resolvent(sc.model, lam, np.zeros((sc.model.cells + 1, k)), np.zeros(k), np.zeros(p))
    homogeneous_zero = not (np.any(zero.w) or np.any(zero.z) or np.any(zero.e))
    residuals = [dl.solve_resolvent(sc.model.with_cells(sc.model.cells * 2**i), lam,
                                    np.zeros((sc.model.cells * 2**i + 1, k)), x, np.zeros(p)).residual
                 for i in range(3)]
    factors = [a / b if b > 0 else math.inf for a, b in zip(residuals, residuals[1:])]
    min_factor = float(params.get("min_factor", 1.7))
    return {"lambda": lam, "cells": [sc.model.cells * 2**i for i in range(3)], "residuals": residuals,
            "refinement_factors": factors, "homogeneous_zero": homogeneous_zero,
            "passed": homogeneous_zero and all(f >= min_factor for f in factors)}


def _run_audit(name: str, params: dict, sc: Scenario, sys: PHSystem, x0: np.ndarray, runs: dict,
               rng: np.random.Generator) -> dict:
    if name == "certify":
        return certificate_report(sc, sys)
    if name == "power":
        result: dict[str, Any] = {"passed": True}
        for rep, (traj, ledger) in runs.items():
            a = audit_power(traj, ledger, bool(params.get("conservative", False)), raise_on_failure=False)
            result[rep] = a.__dict__
            result["passed"] &= a.passed
        return result
    if name == "cayley_equiv":
        tol = float(params.get("tol", 1e-6))
        err, _, _ = cayley_equivalence(sys, x0, sc.input, sc.horizon, sc.dt, sc.beta)
        return {"max_relative_state_error": err, "tol": tol, "passed": err < tol}
    if name == "composition":
        tol = float(params.get("tol", 1e-9))
        n_steps = min(int(params.get("steps", 40)), int(round(sc.horizon / sc.dt)))
        fam = build_evolution_family(sys, n_steps * sc.dt, sc.dt, _representations(sc)[0], sc.beta)
        r, s, t = (float(i * sc.dt) for i in np.sort(rng.integers(0, n_steps + 1, size=3)))
        comp = check_composition_laws(fam, t, s, r, rng=rng)
        return {**comp.__dict__, "t": t, "s": s, "r": r, "max_residual": comp.max_residual,
                "tol": tol, "passed": comp.max_residual < tol}
    if name == "resolvent":
        return _audit_resolvent(sc, params)
    if name == "wp_constant":
        trials = int(params.get("trials", 20))
        tol = float(params.get("tol", 1e-3))
        K = estimate_wp_constant(sys, sc.horizon, sc.dt, trials, SCATTERING, sc.beta, rng)
        return {"K": K, "trials": trials, "passed": K <= 1 + tol}
    if name == "convergence":
        # successive halvings of the scenario step
        dts = [sc.dt / 2**i for i in range(int(params.get("refinements", 3)) + 1)]
        diffs, slope = refinement_study(sys, _representations(sc)[0], x0, sc.input, sc.horizon, dts)
        lo, hi = params.get("order_range", [1.8, 2.2])
        return {"dts": dts, "differences": diffs, "observed_order": slope, "passed": bool(lo <= slope <= hi)}
    raise ValueError(f"unknown audit {name!r}")


def run_scenario(sc: Scenario, out_dir, plots: bool = True) -> dict:
    """Run one scenario, write its artifacts under ``out_dir/<name>`` and return the report."""
    out = Path(out_dir) / sc.name
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(sc.seed)
    report: dict[str, Any] = {"name": sc.name, "seed": sc.seed, "representation": sc.representation,
                              "horizon": sc.horizon, "dt": sc.dt, "audits": {}, "artifacts": []}
    try:
        sys = sc.system()
        x0 = sc.initial_state(sys)
        report["state_dim"], report["port_dim"] = sys.n, sys.m
        runs = {}
        for rep in _representations(sc):
            traj, ledger = simulate(sys, rep, x0, sc.input, sc.horizon, sc.dt, beta=sc.beta)
            runs[rep] = (traj, ledger)
            files = [write_trajectory_csv(traj, out / f"trajectory_{rep}.csv"),
                     write_ledger_csv(ledger, out / f"ledger_{rep}.csv")]
            if plots:
                from .plotting import plot_ledger, plot_trajectory
                files += [plot_trajectory(traj, ledger, out / f"trajectory_{rep}.png", f"{sc.name} ({rep})"),
                          plot_ledger(ledger, out / f"ledger_{rep}.png")]
            report["artifacts"] += [str(f) for f in files]
            report.setdefault("final_hamiltonian", {})[rep] = float(ledger.hamiltonian[-1])

        for name, params in sc.audits:
            try:
                report["audits"][name] = _run_audit(name, params, sc, sys, x0, runs, rng)
            except (ValueError, StructuralError) as exc:
                # an audit that cannot be evaluated counts as failed, the others still run
                report["audits"][name] = {"passed": False, "error": f"{type(exc).__name__}: {exc}"}
        report["passed"] = all(a.get("passed", False) for a in report["audits"].values())
        report["exit_code"] = EXIT_OK if report["passed"] else EXIT_AUDIT
    except NUMERICAL_ERRORS as exc:
        report.update(passed=False, exit_code=EXIT_NUMERICAL, error=f"{type(exc).__name__}: {exc}")
    with open(out / "report.json", "w") as fh:
        json.dump(to_jsonable(report), fh, indent=2)
    return report


def combine_exit_codes(codes) -> int:
    codes = list(codes)
    if EXIT_NUMERICAL in codes:
        return EXIT_NUMERICAL
    if EXIT_AUDIT in codes:
        return EXIT_AUDIT
    return EXIT_OK


def run(config_path, out_dir, seed: int | None = None, plots: bool = True) -> int:
    """Run every scenario in a config; return the process exit code."""
    try:
        scenarios = parse_config(load_config(config_path), seed)
    except ConfigError as exc:
        log.error("parse error: %s", exc)
        return EXIT_PARSE
    except ValidationError as exc:
        log.error("validation error: %s", exc)
        return EXIT_VALIDATION
    codes = []
    for sc in scenarios:
        rep = run_scenario(sc, out_dir, plots)
        log.info("%s: %s", sc.name, "pass" if rep["passed"] else "FAIL")
        codes.append(rep["exit_code"])
    return combine_exit_codes(codes)


def certify_config(config_path, out_dir=None, seed: int | None = None) -> tuple[int, list[dict]]:
    """Certificates only, no simulation."""
    try:
        scenarios = parse_config(load_config(config_path), seed)
    except ConfigError as exc:
        log.error("parse error: %s", exc)
        return EXIT_PARSE, []
    except ValidationError as exc:
        log.error("validation error: %s", exc)
        return EXIT_VALIDATION, []
    reports = []
    for sc in scenarios:
        rep = {"name": sc.name, **certificate_report(sc)}
        reports.append(to_jsonable(rep))
        if out_dir is not None:
            d = Path(out_dir) / sc.name
            d.mkdir(parents=True, exist_ok=True)
            with open(d / "certificates.json", "w") as fh:
                json.dump(reports[-1], fh, indent=2)
    code = EXIT_OK if all(r["passed"] for r in reports) else EXIT_AUDIT
    return code, reports


# ---------------------------------------------------------------- sweeps


def _set_path(obj: dict, path: str, value):
    keys = path.split(".")
    target = obj
    for key in keys[:-1]:
        if not isinstance(target, dict) or key not in target:
            raise ValidationError(f"sweep path {path!r} does not exist in the base scenario")
        target = target[key]
    last = keys[-1]
    current = target.get(last) if isinstance(target, dict) else None
    if isinstance(current, dict) and "rows" in current and isinstance(value, (int, float)):
        # scalar sweep value on a matrix entry means value * identity
        r, c = current["rows"], current["cols"]
        value = {"rows": r, "cols": c, "data": list((value * np.eye(r, c)).ravel())}
    target[last] = value


def sweep_points(cfg: dict) -> tuple[dict, list[dict]]:
    spec = cfg.get("sweep") or {}
    if not isinstance(spec, dict):
        raise ConfigError("'sweep' must be an object")
    base_ref = spec.get("base", 0)
    if isinstance(base_ref, int):
        if not 0 <= base_ref < len(cfg["scenarios"]):
            raise ValidationError(f"sweep base index {base_ref} out of range")
        base = cfg["scenarios"][base_ref]
    elif isinstance(base_ref, str):
        matches = [s for s in cfg["scenarios"] if isinstance(s, dict) and s.get("name") == base_ref]
        if not matches:
            raise ValidationError(f"sweep base {base_ref!r} not found")
        base = matches[0]
    else:
        raise ConfigError("sweep.base must be a scenario name or index")
    params = spec.get("parameters", {})
    if not isinstance(params, dict) or not all(isinstance(v, list) for v in params.values()):
        raise ConfigError("sweep.parameters must map dotted paths to lists of values")
    params = {k: v for k, v in params.items() if v}
    if not params:
        return base, [{}]
    keys = list(params)
    return base, [dict(zip(keys, combo)) for combo in itertools.product(*(params[k] for k in keys))]


def _point_scenario(base: dict, point: dict, index: int) -> dict:
    obj = copy.deepcopy(base)
    for path, value in point.items():
        _set_path(obj, path, value)
    obj["name"] = f"{base.get('name', 'sweep')}_{index:03d}"
    return obj


def _run_point(args) -> dict:
    base, point, index, seed, out_dir, plots = args
    obj = _point_scenario(base, point, index)
    row: dict[str, Any] = {"point": index, **point}
    try:
        sc = parse_scenario(obj, seed)
    except ConfigError as exc:
        return {**row, "exit_code": EXIT_PARSE, "error": str(exc)}
    except ValidationError as exc:
        return {**row, "exit_code": EXIT_VALIDATION, "error": str(exc)}
    if sc.audit("certify") is None:
        sc.audits.insert(0, ("certify", {}))
    rep = run_scenario(sc, out_dir, plots)
    audits = rep.get("audits", {})
    cert = audits.get("certify", {})
    power = audits.get("power", {})
    row.update(
        impedance_ok=cert.get("impedance_ok", cert.get("node_is_dirac")),
        scattering_ok=cert.get("scattering_ok", cert.get("node_scattering_passive")),
        min_eig_M=cert.get("min_eig_M"), min_eig_N=cert.get("min_eig_N"),
        max_power_residual=max((v["max_residual"] for k, v in power.items() if isinstance(v, dict)), default=None),
        max_abs_power_residual=max((v["max_abs_residual"] for k, v in power.items() if isinstance(v, dict)),
                                   default=None),
        cayley_mismatch=audits.get("cayley_equiv", {}).get("max_relative_state_error"),
        convergence_order=audits.get("convergence", {}).get("observed_order"),
        exit_code=rep["exit_code"],
    )
    return row


def sweep(config_path, out_dir, seed: int | None = None, jobs: int = 1, plots: bool = False) -> tuple[int, list[dict]]:
    """Cartesian sweep; writes ``summary.csv``/``summary.json`` and returns (exit code, rows)."""
    try:
        cfg = load_config(config_path)
        parse_config(cfg, seed)
        base, points = sweep_points(cfg)
        seed = int(cfg.get("seed", 0)) if seed is None else seed
        for i, point in enumerate(points):
            parse_scenario(_point_scenario(base, point, i), seed)
    except ConfigError as exc:
        log.error("parse error: %s", exc)
        return EXIT_PARSE, []
    except ValidationError as exc:
        log.error("validation error: %s", exc)
        return EXIT_VALIDATION, []
    out_dir = Path(out_dir)
    tasks = [(base, p, i, seed, out_dir, plots) for i, p in enumerate(points)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_point, tasks))
    else:
        rows = [_run_point(t) for t in tasks]

    summary: dict[str, Any] = {"rows": rows}
    swept = list(points[0])
    if swept == ["dt"] and len(rows) >= 2:
        pairs = [(r["dt"], r["max_abs_power_residual"]) for r in rows if r.get("max_abs_power_residual")]
        if len(pairs) >= 2:
            dts, res = np.array(pairs, dtype=float).T
            summary["dt_order"] = float(np.polyfit(np.log(dts), np.log(res), 1)[0])
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(to_jsonable(summary), fh, indent=2)
    columns = list(dict.fromkeys(k for r in rows for k in r))
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for r in rows:
            w.writerow({k: json.dumps(to_jsonable(v)) if isinstance(v, (dict, list)) else to_jsonable(v)
                        for k, v in r.items()})
    if len(swept) == 1 and len(rows) > 1:
        from .plotting import plot_sweep
        numeric = [r for r in rows if isinstance(r.get(swept[0]), (int, float))]
        keys = ("max_abs_power_residual",) if swept[0] == "dt" else ("min_eig_M", "min_eig_N")
        if numeric:
            plot_sweep(numeric, swept[0], out_dir / "sweep.png", keys)
    code = combine_exit_codes(r["exit_code"] for r in rows if r["exit_code"] in (0, 1, 4))
    bad_inputs = [r["exit_code"] for r in rows if r["exit_code"] in (EXIT_PARSE, EXIT_VALIDATION)]
    if bad_inputs and code == EXIT_OK:
        code = max(bad_inputs)
    summary["exit_code"] = code
    return code, rows
