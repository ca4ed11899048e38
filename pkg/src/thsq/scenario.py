"""Scenario files: parse, validate eagerly, serialize.

The config syntax is YAML. Complex numbers are written as [re, im]
pairs; a matrix is a list of rows of such pairs, a state a list of
pairs. Time-dependent operators (the Hamiltonian ansatz or the Dyson
map) are written as {base: <matrix>, terms: [{function: <spec>,
matrix: <matrix>}]} where <spec> is one of the coefficient-function
forms documented in the README (constant, poly, exp, sin, cos, pwc).

parse_config resolves every cross-reference and checks every invariant
eagerly; run-time code works with the resolved objects only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
import yaml

from . import dyson
from .control import ControlField, OptimizerOptions
from .dyson import DysonMap, TimeFunction
from .errors import ParseError, ValidationError
from .evolution import TimeGrid

MODES = (
    "evolve-p",
    "evolve-f",
    "evolve-ths",
    "evolve-metric",
    "solve-metric",
    "control-optimize",
    "verify",
)

_TOP_KEYS = {
    "name",
    "mode",
    "hbar",
    "matrices",
    "states",
    "fields",
    "grid",
    "map",
    "hamiltonian",
    "generator",
    "operator",
    "state",
    "dual",
    "theta0",
    "weights",
    "control",
    "tolerances",
}

_CONTROL_KEYS = {
    "kind",
    "drift",
    "controls",
    "theta1",
    "w",
    "initial",
    "target",
    "guess",
    "optimizer",
}

_OPTIMIZER_KEYS = {
    "max_iters",
    "learning_rate",
    "fd_step",
    "stop_tol",
    "target_fidelity",
    "intervals",
    "u_max",
    "guess_scale",
    "max_backtracks",
}

_TOLERANCE_KEYS = {
    "norm_tol",
    "herm_tol",
    "tol_pd",
    "tol_real",
    "equiv_tol",
    "metric_tol",
    "fid_tol",
}

_FUNparms = {
    "constant": {"c"},
    "poly": {"coeffs"},
    "exp": {"rate", "amplitude"},
    "sin": {"omega", "phase", "amplitude"},
    "cos": {"omega", "phase", "amplitude"},
    "pwc": {"field"},
}


def _want(cond: bool, msg: str):
    if not cond:
        raise ValidationError(msg)


def _as_float(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}: expected a real number, got {value!r}")
    return float(value)


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{where}: expected an integer, got {value!r}")
    return int(value)


def _complex_entry(value, where: str) -> complex:
    _want(
        isinstance(value, (list, tuple)) and len(value) == 2,
        f"{where}: complex entries are [re, im] pairs, got {value!r}",
    )
    re = _as_float(value[0], where + "[0]")
    im = _as_float(value[1], where + "[1]")
    return complex(re, im)


def _parse_matrix(value, where: str) -> np.ndarray:
    _want(isinstance(value, list) and value, f"{where}: matrix must be a list of rows")
    n = len(value)
    out = np.empty((n, n), dtype=complex)
    for i, row in enumerate(value):
        _want(
            isinstance(row, list) and len(row) == n,
            f"{where}: row {i} must have {n} entries (square matrix)",
        )
        for j, entry in enumerate(row):
            out[i, j] = _complex_entry(entry, f"{where}[{i}][{j}]")
    _want(bool(np.all(np.isfinite(out.view(float)))), f"{where}: non-finite entry")
    return out


def _parse_state(value, where: str) -> np.ndarray:
    _want(isinstance(value, list) and value, f"{where}: state must be a list of [re, im]")
    out = np.array([_complex_entry(e, f"{where}[{i}]") for i, e in enumerate(value)])
    _want(bool(np.all(np.isfinite(out.view(float)))), f"{where}: non-finite entry")
    return out


@dataclass
class Scenario:
    """A validated experiment description with all references resolved."""

    name: str
    mode: str
    hbar: float
    matrices: dict[str, np.ndarray]
    states: dict[str, np.ndarray]
    fields: dict[str, ControlField]
    grid: TimeGrid | None
    map: DysonMap | None
    hamiltonian: Callable[[float], np.ndarray] | None
    generator: Callable[[float], np.ndarray] | None
    operator: np.ndarray | None
    state: np.ndarray | None
    dual: np.ndarray | None
    theta0: np.ndarray | None
    weights: np.ndarray | None
    control: dict[str, Any] | None
    tolerances: dict[str, float]
    normalized: dict[str, Any] = field(repr=False, default_factory=dict)

    @property
    def dim(self) -> int | None:
        for m in self.matrices.values():
            return m.shape[0]
        for s in self.states.values():
            return s.size
        return None

    def tol(self, key: str, default: float) -> float:
        return self.tolerances.get(key, default)


def _function_spec(spec, fields: dict[str, ControlField], where: str) -> TimeFunction:
    _want(isinstance(spec, dict), f"{where}: function spec must be a mapping")
    ftype = spec.get("type")
    _want(
        ftype in _FUNparms,
        f"{where}: unknown function type {ftype!r} (choose from {sorted(_FUNparms)})",
    )
    extra = set(spec) - {"type"} - _FUNparms[ftype]
    _want(not extra, f"{where}: unknown keys {sorted(extra)} for type {ftype!r}")
    if ftype == "constant":
        return dyson.constant(_as_float(spec.get("c", 1.0), where + ".c"))
    if ftype == "poly":
        coeffs = spec.get("coeffs")
        _want(isinstance(coeffs, list) and coeffs, f"{where}: poly needs coeffs")
        return dyson.polynomial([_as_float(c, where + ".coeffs") for c in coeffs])
    if ftype == "exp":
        return dyson.exponential(
            _as_float(spec.get("rate", 0.0), where + ".rate"),
            _as_float(spec.get("amplitude", 1.0), where + ".amplitude"),
        )
    if ftype in ("sin", "cos"):
        make = dyson.sine if ftype == "sin" else dyson.cosine
        return make(
            _as_float(spec.get("omega", 1.0), where + ".omega"),
            _as_float(spec.get("phase", 0.0), where + ".phase"),
            _as_float(spec.get("amplitude", 1.0), where + ".amplitude"),
        )
    # pwc
    name = spec.get("field")
    _want(name in fields, f"{where}: pwc references undefined field {name!r}")
    return fields[name].as_time_function()


def _operator_family(
    entry,
    matrices: dict[str, np.ndarray],
    fields: dict[str, ControlField],
    where: str,
    cond_max: float = 1e12,
) -> DysonMap:
    """Resolve a constant-name or {base, terms} description into a map."""
    if isinstance(entry, str):
        _want(entry in matrices, f"{where}: undefined matrix {entry!r}")
        return DysonMap(base=matrices[entry], terms=(), cond_max=cond_max)
    _want(isinstance(entry, dict), f"{where}: expected a matrix name or mapping")
    extra = set(entry) - {"base", "terms", "cond_max"}
    _want(not extra, f"{where}: unknown keys {sorted(extra)}")
    base_name = entry.get("base")
    _want(base_name in matrices, f"{where}: undefined base matrix {base_name!r}")
    terms = []
    for k, term in enumerate(entry.get("terms", []) or []):
        tw = f"{where}.terms[{k}]"
        _want(isinstance(term, dict), f"{tw}: must be a mapping")
        _want(not set(term) - {"function", "matrix"}, f"{tw}: unknown keys")
        mname = term.get("matrix")
        _want(mname in matrices, f"{tw}: undefined matrix {mname!r}")
        tf = _function_spec(term.get("function"), fields, tw + ".function")
        terms.append((tf, matrices[mname]))
    cond = _as_float(entry.get("cond_max", cond_max), where + ".cond_max")
    try:
        return DysonMap(base=matrices[base_name], terms=tuple(terms), cond_max=cond)
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def _normalize_operator_entry(entry) -> Any:
    if isinstance(entry, str):
        return entry
    out = {"base": entry["base"]}
    if entry.get("terms"):
        out["terms"] = [
            {"function": dict(t["function"]), "matrix": t["matrix"]}
            for t in entry["terms"]
        ]
    if "cond_max" in entry:
        out["cond_max"] = float(entry["cond_max"])
    return out


def parse_config(text: str) -> Scenario:
    """Parse and eagerly validate a scenario description.

    Raises ParseError (with the YAML location) on syntax errors and
    ValidationError naming the offending key or reference otherwise.
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            raise ParseError(str(exc.problem or exc), mark.line + 1, mark.column + 1) from exc
        raise ParseError(str(exc)) from exc

    if not isinstance(raw, dict):
        raise ValidationError("config must be a mapping at top level")
    unknown = set(raw) - _TOP_KEYS
    _want(not unknown, f"unknown top-level keys: {sorted(unknown)}")

    mode = raw.get("mode")
    _want(mode in MODES, f"mode must be one of {MODES}, got {mode!r}")
    name = raw.get("name", "scenario")
    _want(isinstance(name, str) and name, "name must be a non-empty string")
    hbar = _as_float(raw.get("hbar", 1.0), "hbar")
    _want(hbar > 0, "hbar must be positive")

    matrices: dict[str, np.ndarray] = {}
    for mname, lit in (raw.get("matrices") or {}).items():
        matrices[str(mname)] = _parse_matrix(lit, f"matrices.{mname}")
    states: dict[str, np.ndarray] = {}
    for sname, lit in (raw.get("states") or {}).items():
        states[str(sname)] = _parse_state(lit, f"states.{sname}")

    fields_cfg = raw.get("fields") or {}
    fields: dict[str, ControlField] = {}
    for fname, lit in fields_cfg.items():
        where = f"fields.{fname}"
        _want(isinstance(lit, dict), f"{where}: must be a mapping")
        _want(not set(lit) - {"horizon", "amplitudes", "u_max"}, f"{where}: unknown keys")
        _want("horizon" in lit and "amplitudes" in lit, f"{where}: needs horizon and amplitudes")
        amps = lit["amplitudes"]
        _want(isinstance(amps, list) and amps, f"{where}.amplitudes: non-empty list")
        try:
            fields[str(fname)] = ControlField(
                horizon=_as_float(lit["horizon"], where + ".horizon"),
                amplitudes=[_as_float(a, where + ".amplitudes") for a in amps],
                u_max=_as_float(lit.get("u_max", 10.0), where + ".u_max"),
            )
        except ValueError as exc:
            raise ValidationError(f"{where}: {exc}") from exc

    grid = None
    if raw.get("grid") is not None:
        gw = "grid"
        g = raw["grid"]
        _want(isinstance(g, dict), f"{gw}: must be a mapping")
        _want(not set(g) - {"t_start", "t_end", "steps", "samples"}, f"{gw}: unknown keys")
        _want("t_end" in g and "steps" in g, f"{gw}: needs t_end and steps")
        try:
            grid = TimeGrid(
                t_end=_as_float(g["t_end"], gw + ".t_end"),
                steps=_as_int(g["steps"], gw + ".steps"),
                samples=None if g.get("samples") is None else _as_int(g["samples"], gw + ".samples"),
                t_start=_as_float(g.get("t_start", 0.0), gw + ".t_start"),
            )
        except ValueError as exc:
            raise ValidationError(f"{gw}: {exc}") from exc

    the_map = None
    if raw.get("map") is not None:
        the_map = _operator_family(raw["map"], matrices, fields, "map")

    def op_family(key: str) -> DysonMap | None:
        if raw.get(key) is None:
            return None
        return _operator_family(raw[key], matrices, fields, key)

    ham_family = op_family("hamiltonian")
    gen_family = op_family("generator")

    def named_matrix(key: str) -> np.ndarray | None:
        ref = raw.get(key)
        if ref is None:
            return None
        _want(isinstance(ref, str), f"{key}: expected a matrix name")
        _want(ref in matrices, f"{key}: undefined matrix {ref!r}")
        return matrices[ref]

    def named_state(key: str) -> np.ndarray | None:
        ref = raw.get(key)
        if ref is None:
            return None
        _want(isinstance(ref, str), f"{key}: expected a state name")
        _want(ref in states, f"{key}: undefined state {ref!r}")
        return states[ref]

    operator = named_matrix("operator")
    state = named_state("state")
    dual = named_state("dual")
    theta0 = named_matrix("theta0")

    weights = None
    if raw.get("weights") is not None:
        w = raw["weights"]
        _want(isinstance(w, list) and w, "weights: non-empty list of positive reals")
        weights = np.array([_as_float(x, "weights") for x in w])
        _want(bool(np.all(weights > 0)), "weights: all entries must be positive")

    tolerances: dict[str, float] = {}
    for key, value in (raw.get("tolerances") or {}).items():
        _want(key in _TOLERANCE_KEYS, f"tolerances: unknown key {key!r}")
        tolerances[key] = _as_float(value, f"tolerances.{key}")
        _want(tolerances[key] > 0, f"tolerances.{key}: must be positive")

    control = None
    if raw.get("control") is not None:
        c = raw["control"]
        _want(isinstance(c, dict), "control: must be a mapping")
        _want(not set(c) - _CONTROL_KEYS, f"control: unknown keys {sorted(set(c) - _CONTROL_KEYS)}")
        kind = c.get("kind", "hermitian")
        _want(kind in ("hermitian", "generator", "observable"), f"control.kind: bad kind {kind!r}")
        _want(isinstance(c.get("drift"), str) and c["drift"] in matrices,
              f"control.drift: undefined matrix {c.get('drift')!r}")
        ctrl_names = c.get("controls", [])
        _want(isinstance(ctrl_names, list), "control.controls: must be a list of matrix names")
        for cn in ctrl_names:
            _want(cn in matrices, f"control.controls: undefined matrix {cn!r}")
        for skey in ("initial", "target"):
            _want(isinstance(c.get(skey), str) and c[skey] in states,
                  f"control.{skey}: undefined state {c.get(skey)!r}")
        if c.get("theta1") is not None:
            _want(c["theta1"] in matrices, f"control.theta1: undefined matrix {c['theta1']!r}")
        _want(kind != "observable" or c.get("theta1") is not None,
              "control.theta1: required for kind 'observable'")
        if c.get("w") is not None:
            _want(c["w"] in fields, f"control.w: undefined field {c['w']!r}")
            _want(kind == "observable", "control.w: the gauge channel needs kind 'observable'")
            _want(len(ctrl_names) == 1, "control.w: the toy model takes exactly one control")
        guess = c.get("guess")
        if guess is not None and guess != "random":
            _want(isinstance(guess, list), "control.guess: list of field names or 'random'")
            for gn in guess:
                _want(gn in fields, f"control.guess: undefined field {gn!r}")
            _want(len(guess) == len(ctrl_names),
                  "control.guess: one field per control operator")
        opt = c.get("optimizer") or {}
        _want(isinstance(opt, dict), "control.optimizer: must be a mapping")
        _want(not set(opt) - _OPTIMIZER_KEYS,
              f"control.optimizer: unknown keys {sorted(set(opt) - _OPTIMIZER_KEYS)}")
        control = {
            "kind": kind,
            "drift": c["drift"],
            "controls": list(ctrl_names),
            "theta1": c.get("theta1"),
            "w": c.get("w"),
            "initial": c["initial"],
            "target": c["target"],
            "guess": guess,
            "optimizer": {k: opt[k] for k in sorted(opt)},
        }

    # mode requirements
    need = {
        "evolve-p": [("hamiltonian", ham_family), ("state", state), ("grid", grid)],
        "evolve-f": [("operator", operator), ("state", state), ("grid", grid)],
        "evolve-ths": [("state", state), ("grid", grid)],
        "evolve-metric": [("grid", grid)],
        "solve-metric": [("operator", operator)],
        "control-optimize": [("control", control), ("grid", grid)],
        "verify": [("hamiltonian", ham_family), ("map", the_map), ("state", state), ("grid", grid)],
    }
    for key, value in need[mode]:
        _want(value is not None, f"mode {mode!r} requires a {key!r} section")
    if mode in ("evolve-ths", "evolve-metric"):
        _want(
            gen_family is not None or (ham_family is not None and the_map is not None),
            f"mode {mode!r} needs either a generator or hamiltonian + map",
        )
    if mode == "evolve-ths":
        _want(
            dual is not None or theta0 is not None or the_map is not None,
            "evolve-ths needs a dual state, a theta0 matrix, or a map to derive the dual ket",
        )
    if mode == "evolve-metric":
        _want(
            theta0 is not None or the_map is not None,
            "evolve-metric needs theta0 or a map for the initial metric",
        )

    # referenced dimensions must agree
    dims = {m.shape[0] for m in matrices.values()} | {s.size for s in states.values()}
    _want(len(dims) <= 1, f"matrices/states mix dimensions: {sorted(dims)}")

    ham = None if ham_family is None else (lambda t, _f=ham_family: dyson.evaluate_map(_f, t))
    gen = None if gen_family is None else (lambda t, _f=gen_family: dyson.evaluate_map(_f, t))

    normalized: dict[str, Any] = {"name": name, "mode": mode, "hbar": hbar}
    if matrices:
        normalized["matrices"] = {
            k: [[[float(x.real), float(x.imag)] for x in row] for row in m]
            for k, m in matrices.items()
        }
    if states:
        normalized["states"] = {
            k: [[float(x.real), float(x.imag)] for x in s] for k, s in states.items()
        }
    if fields:
        normalized["fields"] = {
            k: {
                "horizon": f.horizon,
                "amplitudes": [float(a) for a in f.amplitudes],
                "u_max": f.u_max,
            }
            for k, f in fields.items()
        }
    if grid is not None:
        normalized["grid"] = {
            "t_start": grid.t_start,
            "t_end": grid.t_end,
            "steps": grid.steps,
            "samples": grid.samples,
        }
    for key in ("map", "hamiltonian", "generator"):
        if raw.get(key) is not None:
            normalized[key] = _normalize_operator_entry(raw[key])
    for key in ("operator", "state", "dual", "theta0"):
        if raw.get(key) is not None:
            normalized[key] = raw[key]
    if weights is not None:
        normalized["weights"] = [float(x) for x in weights]
    if control is not None:
        normalized["control"] = control
    if tolerances:
        normalized["tolerances"] = dict(sorted(tolerances.items()))

    return Scenario(
        name=name,
        mode=mode,
        hbar=hbar,
        matrices=matrices,
        states=states,
        fields=fields,
        grid=grid,
        map=the_map,
        hamiltonian=ham,
        generator=gen,
        operator=operator,
        state=state,
        dual=dual,
        theta0=theta0,
        weights=weights,
        control=control,
        tolerances=tolerances,
        normalized=normalized,
    )


def serialize(scenario: Scenario) -> str:
    """Deterministic YAML text that parses back to an equivalent Scenario."""
    return yaml.safe_dump(scenario.normalized, sort_keys=True, default_flow_style=None)
