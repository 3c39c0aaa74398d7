"""Scenario ingestion, run orchestration, model comparison and reporting.

Scenario files are YAML (one structured file per run).  Every run emits
plain CSV (exact headers, 17-significant-digit floats) plus a JSON
manifest carrying the config hash, tool version, echoed defaults and the
conservation report; manifests are written atomically.  Reruns of the
same config produce bit-identical CSV and the same config hash.

Exit codes: 0 success, 1 usage/validation, 2 physics-domain abort,
3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import yaml

from . import __version__
from . import conformal as conformal_mod
from . import strings as strings_mod
from .errors import (
    ConvergenceError,
    MisalignedScenariosError,
    ParseError,
    PhysicsDomainError,
    StepFailureError,
    ValidationError,
)
from .geometry import Vec3
from .integrate import (
    IntegrationParams,
    integrate_particle,
    integrate_string,
)
from .particle import (
    ForceModel,
    ModelKind,
    interacting_energy,
    interaction_extra_force,
    make_classical_state,
    make_constrained_state,
    make_vacuum_state,
    qa_vector,
    total_energy,
)
from .potentials import (
    LinearField,
    PotentialField,
    SourceKind,
    SourceSpec,
    UniformMagneticField,
    build_potential,
)
from .variational import (
    LagrangianKind,
    LagrangianSpec,
    euler_lagrange_residual,
    path_from_trajectory,
    uniform_proper_path,
)

PARTICLE_HEADER = "step,tau,t,rx,ry,rz,px,py,pz,wbar,energy"
STRING_HEADER = "step,tau,sigma,rx,ry,rz,px,py,pz,h_density"
COMPARE_HEADER = "step,align,distance,momentum_gap,fc_magnitude"
AUDIT_HEADER = "node,s,res_x,res_y,res_z,res_norm"

_MODEL_KINDS = {k.value: k for k in ModelKind}
_FIELD_KINDS = ("uniform", "coulomb-static", "coulomb-comoving", "linear", "uniform-b")
_SCENARIO_KINDS = ("particle", "string", "conformal")


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _vec(raw, name: str) -> Vec3:
    if not isinstance(raw, (list, tuple)) or len(raw) != 3:
        raise ValidationError(f"{name} must be a 3-component list")
    try:
        return Vec3(float(raw[0]), float(raw[1]), float(raw[2]))
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must contain numbers") from None


@dataclass
class ScenarioConfig:
    name: str
    kind: str
    data: dict
    config_hash: str


@dataclass
class RunManifest:
    name: str
    config_hash: str
    tool_version: str
    timestamp: str
    outputs: List[str]
    conservation: dict
    parameters: dict
    exit_status: int = 0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
            "outputs": self.outputs,
            "conservation": self.conservation,
            "parameters": self.parameters,
            "exit_status": self.exit_status,
        }


def _canonical_hash(data: dict) -> str:
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


# --- config parsing -----------------------------------------------------------


def parse_config(path: str, overrides: Optional[dict] = None) -> ScenarioConfig:
    """Load, validate and normalize one scenario file.

    Raises ParseError for unreadable/malformed files and ValidationError
    (naming the offending key) for schema or physics violations.
    """
    if not os.path.exists(path):
        raise ParseError(f"no such scenario file: {path}")
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed YAML in {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ParseError(f"{path} does not contain a mapping")
    data = dict(raw)
    if overrides:
        integration = dict(data.get("integration", {}))
        for key in ("step", "n_steps", "rel_tol"):
            if overrides.get(key) is not None:
                integration[key] = overrides[key]
        data["integration"] = integration
        if overrides.get("out") is not None:
            data.setdefault("output", {})
            data["output"] = dict(data["output"], directory=overrides["out"])

    name = data.get("name")
    if not name or not isinstance(name, str):
        raise ValidationError("config key 'name' must be a nonempty string")
    kind = data.get("kind")
    if kind not in _SCENARIO_KINDS:
        raise ValidationError(
            f"config key 'kind' must be one of {list(_SCENARIO_KINDS)}, got {kind!r}"
        )
    normalized = _normalize(data)
    # the hash identifies the run content; the output destination is excluded
    hashed = {k: v for k, v in normalized.items() if k != "output"}
    return ScenarioConfig(name, kind, normalized, _canonical_hash(hashed))


def _normalize(data: dict) -> dict:
    """Fill defaults and validate; returns the dict that is hashed and echoed."""
    kind = data["kind"]
    out = {
        "name": data["name"],
        "kind": kind,
        "output": {"directory": data.get("output", {}).get("directory", "out")},
    }
    if kind == "particle":
        model = data.get("model")
        if model not in _MODEL_KINDS:
            raise ValidationError(
                f"config key 'model' must be one of {sorted(_MODEL_KINDS)}, got {model!r}"
            )
        out["model"] = model
        out["charge"] = float(data.get("charge", 1.0))
        if data.get("rest_mass") is not None:
            out["rest_mass"] = float(data["rest_mass"])
        out["field"] = _normalize_field(data.get("field"))
        initial = data.get("initial", {})
        r0 = _vec(initial.get("r", [0, 0, 0]), "initial.r")
        u0 = _vec(initial.get("u", [0, 0, 0]), "initial.u")
        if u0.norm2() >= 1.0:
            raise ValidationError("initial.u: superluminal initial velocity")
        out["initial"] = {"r": list(r0), "u": list(u0)}
        out["integration"] = _normalize_integration(data.get("integration"))
    elif kind == "string":
        out["field"] = _normalize_field(data.get("field"))
        grid = data.get("grid", {})
        n = int(grid.get("n", 64))
        if n < 8:
            raise ValidationError("grid.n must be >= 8")
        out["grid"] = {
            "n": n,
            "sigma_min": float(grid.get("sigma_min", 0.0)),
            "sigma_max": float(grid.get("sigma_max", 1.0)),
        }
        if out["grid"]["sigma_max"] <= out["grid"]["sigma_min"]:
            raise ValidationError("grid.sigma_max must exceed grid.sigma_min")
        initial = data.get("initial", {})
        ikind = initial.get("kind", "line")
        if ikind not in ("line", "pluck"):
            raise ValidationError("initial.kind must be 'line' or 'pluck'")
        out["initial"] = {
            "kind": ikind,
            "start": list(_vec(initial.get("start", [0, 0, 0]), "initial.start")),
            "end": list(_vec(initial.get("end", [1, 0, 0]), "initial.end")),
            "amplitude": float(initial.get("amplitude", 0.01)),
            "width": float(initial.get("width", 0.08)),
            "direction": list(_vec(initial.get("direction", [0, 1, 0]), "initial.direction")),
        }
        out["integration"] = _normalize_integration(data.get("integration"))
    else:  # conformal
        problem = data.get("problem", "laplace-harmonic")
        if problem not in ("laplace-harmonic", "manufactured"):
            raise ValidationError("problem must be 'laplace-harmonic' or 'manufactured'")
        grid = data.get("grid", {})
        out["problem"] = problem
        out["grid"] = {
            "n_sigma": int(grid.get("n_sigma", 33)),
            "n_s": int(grid.get("n_s", 33)),
        }
        if min(out["grid"]["n_sigma"], out["grid"]["n_s"]) < 5:
            raise ValidationError("conformal grids need at least 5 nodes per axis")
        out["tol"] = float(data.get("tol", 1e-8))
        out["max_iters"] = int(data.get("max_iters", 40000))
        if out["tol"] <= 0:
            raise ValidationError("tol must be positive")
    return out


def _normalize_field(raw) -> dict:
    if not isinstance(raw, dict):
        raise ValidationError("config key 'field' must be a mapping")
    fkind = raw.get("kind")
    if fkind not in _FIELD_KINDS:
        raise ValidationError(
            f"field.kind must be one of {list(_FIELD_KINDS)}, got {fkind!r}"
        )
    out = {"kind": fkind}
    if fkind == "uniform":
        out["strength"] = float(raw.get("strength", -1.0))
        if out["strength"] >= 0:
            raise ValidationError("field.strength must be negative for a uniform potential")
    elif fkind in ("coulomb-static", "coulomb-comoving"):
        out["strength"] = float(raw.get("strength", 1.0))
        out["softening"] = float(raw.get("softening", 1e-3))
        out["background"] = float(raw.get("background", 0.0))
        out["r_f0"] = list(_vec(raw.get("r_f0", [0, 0, 0]), "field.r_f0"))
        u_f = _vec(raw.get("u_f", [0, 0, 0]), "field.u_f")
        if fkind == "coulomb-static" and u_f.norm2() != 0.0:
            raise ValidationError("field.u_f must be zero for coulomb-static")
        if u_f.norm2() >= 1.0:
            raise ValidationError("field.u_f: superluminal source velocity")
        out["u_f"] = list(u_f)
    elif fkind == "linear":
        out["w0"] = float(raw.get("w0", -1.0))
        out["gradient"] = list(_vec(raw.get("gradient", [0, 0, 0]), "field.gradient"))
    else:  # uniform-b
        out["b"] = list(_vec(raw.get("b", [0, 0, 1]), "field.b"))
        out["wbar0"] = float(raw.get("wbar0", 0.0))
    return out


def _normalize_integration(raw) -> dict:
    raw = raw or {}
    out = {
        "step": float(raw.get("step", 1e-3)),
        "n_steps": int(raw.get("n_steps", 1000)),
        "method": raw.get("method", "rk4"),
        "rel_tol": float(raw.get("rel_tol", 1e-9)),
        "abs_tol": float(raw.get("abs_tol", 1e-12)),
        "audit_every": int(raw.get("audit_every", 10)),
        "time_axis": raw.get("time_axis", "auto"),
    }
    IntegrationParams(**out)  # validates
    return out


# --- builders ------------------------------------------------------------------


def build_field(fdata: dict, charge: float) -> PotentialField:
    fkind = fdata["kind"]
    if fkind == "uniform":
        spec = SourceSpec(SourceKind.UNIFORM, fdata["strength"])
        return build_potential(spec, charge)
    if fkind in ("coulomb-static", "coulomb-comoving"):
        spec = SourceSpec(
            kind=SourceKind.COULOMB_STATIC
            if fkind == "coulomb-static"
            else SourceKind.COULOMB_COMOVING,
            strength=fdata["strength"],
            r_f0=_vec(fdata["r_f0"], "field.r_f0"),
            u_f=_vec(fdata["u_f"], "field.u_f"),
            softening=fdata["softening"],
            background=fdata["background"],
        )
        return build_potential(spec, charge)
    if fkind == "linear":
        return LinearField(fdata["w0"], _vec(fdata["gradient"], "field.gradient"))
    return UniformMagneticField(_vec(fdata["b"], "field.b"), fdata["wbar0"])


def build_particle_model(config: ScenarioConfig):
    data = config.data
    kind = _MODEL_KINDS[data["model"]]
    charge = data["charge"]
    field = build_field(data["field"], charge)
    model = ForceModel(kind, field, charge=charge, rest_mass=data.get("rest_mass"))
    r0 = _vec(data["initial"]["r"], "initial.r")
    u0 = _vec(data["initial"]["u"], "initial.u")
    if kind is ModelKind.CLASSICAL:
        state = make_classical_state(r0, u0, model.rest_mass)
    elif kind is ModelKind.CONSTRAINED:
        state = make_constrained_state(r0, u0, model.rest_mass)
    else:
        wbar0 = field.wbar(r0, 0.0)
        if wbar0 >= 0:
            raise ValidationError("field: wbar must be negative at the initial position")
        state = make_vacuum_state(field, r0, u0)
    params = IntegrationParams(**data["integration"])
    return model, state, params


def _model_energy(model: ForceModel, s) -> float:
    wbar = model.field.wbar(s.r, s.t)
    if model.kind is ModelKind.CLASSICAL:
        return math.sqrt(model.rest_mass**2 + s.p.norm2()) + wbar
    if model.kind is ModelKind.CONSTRAINED:
        return s.extra["lambda_tdot"] * math.sqrt(1.0 - s.u.norm2())
    if model.kind is ModelKind.VACUUM_FREE:
        return total_energy(wbar, s.p)
    return interacting_energy(wbar, s.p, qa_vector(model, s.r, s.t))


# --- runners ---------------------------------------------------------------------


def run_scenario(config: ScenarioConfig, quiet: bool = False) -> RunManifest:
    out_dir = config.data["output"]["directory"]
    os.makedirs(out_dir, exist_ok=True)
    if config.kind == "particle":
        conservation, outputs = _run_particle(config, out_dir)
    elif config.kind == "string":
        conservation, outputs = _run_string(config, out_dir)
    else:
        conservation, outputs = _run_conformal(config, out_dir)
    manifest = RunManifest(
        name=config.name,
        config_hash=config.config_hash,
        tool_version=__version__,
        timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
        outputs=outputs,
        conservation=conservation,
        parameters=config.data,
    )
    mpath = os.path.join(out_dir, f"{config.name}.manifest.json")
    _atomic_write(mpath, json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    if not quiet:
        print(f"wrote {mpath}")
        for name, stat in conservation.items():
            if not isinstance(stat, dict) or "relative_drift" not in stat:
                continue
            if stat.get("samples") == 1:
                print(f"  {name}: {stat['initial']:.6g}")
            else:
                print(f"  {name}: relative drift {stat['relative_drift']:.3e}")
    return manifest


def _run_particle(config: ScenarioConfig, out_dir: str):
    model, state, params = build_particle_model(config)
    traj = integrate_particle(model, state, params)
    rows = [PARTICLE_HEADER]
    long_rows = ["step,axis,series,value"]
    for i, s in enumerate(traj.samples):
        wbar = model.field.wbar(s.r, s.t)
        energy = _model_energy(model, s)
        rows.append(
            ",".join(
                [str(i)]
                + [_fmt(v) for v in (s.tau, s.t, *s.r, *s.p, wbar, energy)]
            )
        )
        axis_val = s.t if traj.time_axis == "lab" else s.tau
        for series, value in (("wbar", wbar), ("energy", energy)):
            long_rows.append(f"{i},{_fmt(axis_val)},{series},{_fmt(value)}")
    csv_path = os.path.join(out_dir, f"{config.name}.csv")
    _atomic_write(csv_path, "\n".join(rows) + "\n")
    long_path = os.path.join(out_dir, f"{config.name}_long.csv")
    _atomic_write(long_path, "\n".join(long_rows) + "\n")
    return traj.report.to_dict(), [csv_path, long_path]


def build_string_state(config: ScenarioConfig):
    data = config.data
    grid = strings_mod.StringGrid.uniform(
        data["grid"]["sigma_min"], data["grid"]["sigma_max"], data["grid"]["n"]
    )
    init = data["initial"]
    start = _vec(init["start"], "initial.start")
    end = _vec(init["end"], "initial.end")
    if init["kind"] == "line":
        state = strings_mod.straight_string(grid, start, end)
    else:
        state = strings_mod.plucked_string(
            grid,
            start,
            end,
            amplitude=init["amplitude"],
            width=init["width"],
            direction=_vec(init["direction"], "initial.direction"),
        )
    field = build_field(data["field"], 1.0)
    params = IntegrationParams(**data["integration"])
    return state, field, params


def _run_string(config: ScenarioConfig, out_dir: str):
    state, field, params = build_string_state(config)
    traj = integrate_string(state, field, params)
    rows = [STRING_HEADER]
    stride = max(1, params.n_steps // 50)
    for i, st in enumerate(traj.samples):
        if i % stride and i != len(traj.samples) - 1:
            continue
        dens = strings_mod.node_energy_density(st, field)
        for j in range(st.grid.n):
            rows.append(
                ",".join(
                    [str(i)]
                    + [
                        _fmt(v)
                        for v in (
                            st.tau,
                            st.grid.sigma[j],
                            *st.r[j],
                            *st.p[j],
                            dens[j],
                        )
                    ]
                )
            )
    csv_path = os.path.join(out_dir, f"{config.name}.csv")
    _atomic_write(csv_path, "\n".join(rows) + "\n")
    return traj.report.to_dict(), [csv_path]


def _run_conformal(config: ScenarioConfig, out_dir: str):
    from .conformal_cases import harmonic_case, manufactured_case

    data = config.data
    n_sigma, n_s = data["grid"]["n_sigma"], data["grid"]["n_s"]
    if data["problem"] == "laplace-harmonic":
        case = harmonic_case(n_sigma, n_s)
    else:
        case = manufactured_case(n_sigma, n_s)
    solved, result = conformal_mod.solve_conformal(
        case.boundary, case.field, tol=data["tol"], max_iters=data["max_iters"],
        forcing=case.forcing,
    )
    err = float(np.max(np.abs(solved.xi - case.exact.xi)))
    report = {
        "iterations": {"initial": float(result.iterations), "max_drift": 0.0,
                       "relative_drift": 0.0, "samples": 1},
        "final_residual": {"initial": result.final_residual, "max_drift": 0.0,
                           "relative_drift": 0.0, "samples": 1},
        "max_error_vs_exact": {"initial": err, "max_drift": 0.0,
                               "relative_drift": 0.0, "samples": 1},
        "max_gauge_defect": {"initial": solved.max_gauge_defect(), "max_drift": 0.0,
                             "relative_drift": 0.0, "samples": 1},
    }
    rows = ["i,j,sigma,s,xi0,xi1,xi2,xi3"]
    for i in range(n_sigma):
        for j in range(n_s):
            rows.append(
                ",".join(
                    [str(i), str(j)]
                    + [_fmt(v) for v in (solved.sigma[i], solved.s[j], *solved.xi[i, j])]
                )
            )
    csv_path = os.path.join(out_dir, f"{config.name}.csv")
    _atomic_write(csv_path, "\n".join(rows) + "\n")
    return report, [csv_path]


# --- compare -----------------------------------------------------------------------


def compare_models(configs: List[ScenarioConfig], alignment: str = "by_t", quiet: bool = False):
    """Integrate >= 2 particle scenarios with shared initial kinematics and diff them."""
    if alignment not in ("by_t", "by_tau"):
        raise ValidationError("alignment must be by_t or by_tau")
    if len(configs) < 2:
        raise ValidationError("compare needs at least two particle configs")
    built = []
    for cfg in configs:
        if cfg.kind != "particle":
            raise ValidationError("compare supports particle scenarios only")
        model, state, params = build_particle_model(cfg)
        built.append((cfg, model, state, params))
    ref = built[0]
    for other in built[1:]:
        if list(other[2].r) != list(ref[2].r) or list(other[2].u) != list(ref[2].u):
            raise MisalignedScenariosError("initial kinematics differ between configs")
        if (
            other[3].step != ref[3].step
            or other[3].n_steps != ref[3].n_steps
        ):
            raise MisalignedScenariosError("integration grids differ between configs")

    trajectories = []
    for cfg, model, state, params in built:
        params = IntegrationParams(
            step=params.step,
            n_steps=params.n_steps,
            method=params.method,
            rel_tol=params.rel_tol,
            abs_tol=params.abs_tol,
            audit_every=params.audit_every,
            time_axis="lab",
        )
        trajectories.append((model, integrate_particle(model, state, params)))

    ref_model, ref_traj = trajectories[0]
    other_model, other_traj = trajectories[1]
    rows = [COMPARE_HEADER]
    axis_a = np.array(
        [s.t if alignment == "by_t" else s.tau for s in ref_traj.samples]
    )
    r_b = np.array([list(s.r) for s in other_traj.samples])
    p_b = np.array([list(s.p) for s in other_traj.samples])
    axis_b = np.array(
        [s.t if alignment == "by_t" else s.tau for s in other_traj.samples]
    )
    for i, s in enumerate(ref_traj.samples):
        if alignment == "by_t":
            rb, pb = r_b[i], p_b[i]
        else:
            rb = np.array([np.interp(axis_a[i], axis_b, r_b[:, k]) for k in range(3)])
            pb = np.array([np.interp(axis_a[i], axis_b, p_b[:, k]) for k in range(3)])
        dist = math.sqrt(sum((a - b) ** 2 for a, b in zip(s.r, rb)))
        pgap = math.sqrt(sum((a - b) ** 2 for a, b in zip(s.p, pb)))
        fc = interaction_extra_force(
            ref_model.charge, s.u, ref_model.field, s.r, s.t
        ).norm()
        rows.append(
            ",".join([str(i), _fmt(axis_a[i]), _fmt(dist), _fmt(pgap), _fmt(fc)])
        )
    return rows, trajectories


# --- audit -------------------------------------------------------------------------


_AUDIT_KINDS = {
    ModelKind.CLASSICAL: LagrangianKind.CLASSICAL_POINT,
    ModelKind.CONSTRAINED: LagrangianKind.CONSTRAINED_POINT,
    ModelKind.VACUUM_FREE: LagrangianKind.VACUUM_FREE_POINT,
    ModelKind.VACUUM_INTERACTING: LagrangianKind.VACUUM_INTERACTING_POINT,
}


def audit_scenario(config: ScenarioConfig, nodes: int = 0, quiet: bool = False):
    """Integrate a particle scenario and measure its discrete action stationarity."""
    if config.kind != "particle":
        raise ValidationError("audit supports particle scenarios only")
    model, state, params = build_particle_model(config)
    traj = integrate_particle(model, state, params)
    if model.kind is ModelKind.CONSTRAINED:
        path = uniform_proper_path(traj, nodes or min(400, params.n_steps))
    else:
        stride = max(1, params.n_steps // nodes) if nodes else 1
        path = path_from_trajectory(traj, stride=stride)
    spec = LagrangianSpec(
        kind=_AUDIT_KINDS[model.kind],
        field=model.field,
        m0=model.rest_mass,
        charge=model.charge,
        u_f=model.source_velocity,
    )
    residuals = euler_lagrange_residual(spec, path)
    norms = np.sqrt(np.einsum("ij,ij->i", residuals, residuals))
    rows = [AUDIT_HEADER]
    for i in range(residuals.shape[0]):
        rows.append(
            ",".join(
                [str(i + 1), _fmt(path.s[i + 1])]
                + [_fmt(v) for v in residuals[i]]
                + [_fmt(norms[i])]
            )
        )
    return rows, float(np.max(norms)), traj


# --- self-check battery ---------------------------------------------------------------


def check_battery(quiet: bool = False) -> List[tuple]:
    """Fast invariant suite: (name, passed, detail) per check."""
    from . import checks

    results = checks.run_all()
    if not quiet:
        for name, ok, detail in results:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return results


# --- entry point ------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def _add_overrides(p):
    p.add_argument("--out", help="output directory override")
    p.add_argument("--steps", type=int, help="override integration.n_steps")
    p.add_argument("--step", type=float, help="override integration.step")
    p.add_argument("--tol", type=float, help="override integration.rel_tol")
    p.add_argument("--quiet", action="store_true")


def main(argv: Optional[List[str]] = None) -> int:
    parser = _Parser(prog="vacuumlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("config")
    _add_overrides(p_run)

    p_cmp = sub.add_parser("compare", help="compare >= 2 particle scenarios")
    p_cmp.add_argument("configs", nargs="+")
    p_cmp.add_argument("--alignment", choices=("by_t", "by_tau"), default="by_t")
    _add_overrides(p_cmp)

    p_aud = sub.add_parser("audit", help="variational residual pass over a scenario")
    p_aud.add_argument("config")
    p_aud.add_argument("--nodes", type=int, default=0, help="path nodes (0 = every step)")
    _add_overrides(p_aud)

    p_chk = sub.add_parser("check", help="run the self-test invariant suite")
    p_chk.add_argument("--quiet", action="store_true")

    args = parser.parse_args(argv)
    overrides = {
        "out": getattr(args, "out", None),
        "n_steps": getattr(args, "steps", None),
        "step": getattr(args, "step", None),
        "rel_tol": getattr(args, "tol", None),
    }

    try:
        if args.command == "run":
            config = parse_config(args.config, overrides)
            run_scenario(config, quiet=args.quiet)
        elif args.command == "compare":
            configs = [parse_config(c, overrides) for c in args.configs]
            rows, _ = compare_models(configs, alignment=args.alignment, quiet=args.quiet)
            out_dir = overrides["out"] or configs[0].data["output"]["directory"]
            os.makedirs(out_dir, exist_ok=True)
            path = os.path.join(out_dir, "compare.csv")
            _atomic_write(path, "\n".join(rows) + "\n")
            if not args.quiet:
                print(f"wrote {path}")
        elif args.command == "audit":
            config = parse_config(args.config, overrides)
            rows, worst, _ = audit_scenario(config, nodes=args.nodes, quiet=args.quiet)
            out_dir = overrides["out"] or config.data["output"]["directory"]
            os.makedirs(out_dir, exist_ok=True)
            path = os.path.join(out_dir, f"{config.name}_audit.csv")
            _atomic_write(path, "\n".join(rows) + "\n")
            if not args.quiet:
                print(f"wrote {path} (max residual {worst:.3e})")
        else:
            results = check_battery(quiet=args.quiet)
            if not all(ok for _, ok, _ in results):
                return 2
        return 0
    except (ParseError, ValidationError, MisalignedScenariosError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (PhysicsDomainError, StepFailureError) as exc:
        sys.stderr.write(f"physics abort: {exc}\n")
        return 2
    except ConvergenceError as exc:
        sys.stderr.write(f"no convergence: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
