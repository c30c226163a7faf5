"""Scenario configuration, setup, runs and output files.

Configurations are flat ``key = value`` text with dotted keys and ``#``
comments, e.g.::

    scenario = freedericksz_2d
    mesh.nx = 64
    electric.E = 1 0

Keys missing from a file take the defaults of the named scenario.
"""
import csv
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .colloid import Sphere, build_phase_field
from .energy import AnchoringModel, DoubleWell, ElectricModel
from .fem import error_norms
from .flow import (
    BoundaryConditions,
    EnergyModel,
    FlowParams,
    LCState,
    defect_set,
    normalize_rows,
    run_flow,
)
from .mesh import apply_shear_map, boundary_nodes, build_cube_mesh, build_square_mesh, refine_red

OUTPUT_DIR_ENV = "ERICKSEN_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


# ---------------------------------------------------------------- schema

_FLOAT, _INT, _STR, _BOOL, _VEC, _OPT_FLOAT, _WORDS = (
    "float", "int", "str", "bool", "vec", "opt_float", "words")

SCHEMA = {
    "scenario": (_STR, "custom"),
    "mesh.dim": (_INT, 3),
    "mesh.nx": (_INT, 8),
    "mesh.ny": (_INT, 8),
    "mesh.nz": (_INT, 8),
    "mesh.bounds": (_VEC, "0 1 0 1 0 1"),
    "mesh.split": (_STR, "kuhn"),
    "mesh.shear": (_BOOL, "false"),
    "mesh.refine": (_INT, 0),
    "model.kappa": (_FLOAT, 1.0),
    "model.double_well": (_BOOL, "true"),
    "dw.scale": (_FLOAT, 1.0 / 0.09),
    "dw.c": (_FLOAT, 63.0),
    "dw.a4": (_FLOAT, 16.0),
    "dw.a3": (_FLOAT, 64.0 / 3.0),
    "dw.a2": (_FLOAT, 57.0),
    "dw.s_star": (_FLOAT, 0.750025),
    "anchoring.kind": (_STR, "none"),
    "anchoring.K_a": (_FLOAT, 0.0),
    "anchoring.eps": (_FLOAT, 0.06),
    "anchoring.g": (_OPT_FLOAT, "none"),
    "colloid.center": (_VEC, "0.5 0.5 0.5"),
    "colloid.radius": (_FLOAT, 0.25),
    "electric.K_ext": (_FLOAT, 0.0),
    "electric.E": (_VEC, "0 0 0"),
    "electric.eps_bar": (_FLOAT, 1.0),
    "electric.eps_a": (_FLOAT, 0.0),
    "electric.gamma_a": (_OPT_FLOAT, "none"),
    "bc.regions": (_WORDS, ""),
    "bc.s": (_OPT_FLOAT, "none"),
    "bc.n": (_STR, "none"),
    "init.s": (_OPT_FLOAT, "none"),
    "init.n": (_VEC, "0 0 1"),
    "init.n_above": (_VEC, "none"),
    "init.split_z": (_FLOAT, 0.5),
    "flow.dt": (_FLOAT, 1.0),
    "flow.rho": (_OPT_FLOAT, "none"),
    "flow.max_iters": (_INT, 1000),
    "flow.tol": (_FLOAT, 1e-6),
    "flow.cg_tol_director": (_FLOAT, 1e-8),
    "flow.cg_tol_s": (_FLOAT, 1e-12),
    "flow.tangent_mode": (_STR, "auto"),
    "output.dir": (_STR, "output"),
    "output.vtk_every": (_INT, 0),
    "output.defect_threshold": (_FLOAT, 0.1),
    "output.defect_exterior_only": (_BOOL, "true"),
}

BC_KINDS = ("none", "ring", "ring_axial", "plane_defect")

PRESETS = {
    "custom": {},
    "plane_defect_eoc": {
        "mesh.nx": "8", "mesh.ny": "8", "mesh.nz": "8",
        "model.kappa": "0.2", "model.double_well": "false",
        "bc.regions": "z0 z1", "bc.n": "plane_defect",
        "init.n": "1 0 0", "init.n_above": "0 1 0", "init.split_z": "0.5",
        "flow.dt": "1.0", "output.defect_threshold": "0.05",
    },
    "freedericksz_2d": {
        "mesh.dim": "2", "mesh.nx": "64", "mesh.ny": "64", "mesh.bounds": "0 1 0 1",
        "model.kappa": "1.0",
        "electric.K_ext": "16", "electric.E": "1 0", "electric.eps_bar": "1",
        "electric.eps_a": "2", "electric.gamma_a": "0.5",
        "bc.regions": "x0 x1", "bc.n": "0 1",
        "init.n": "0.01 1", "flow.dt": "1.0",
    },
    "colloid_weak_3d": {
        "mesh.nx": "32", "mesh.ny": "32", "mesh.nz": "32",
        "anchoring.kind": "weak", "anchoring.K_a": "300", "anchoring.eps": "0.06",
        "bc.regions": "all", "bc.n": "ring",
        "init.n": "0 0 -1", "init.n_above": "0 0 1", "init.split_z": "0.5",
        "flow.max_iters": "3000", "flow.tol": "1e-5",
        "output.defect_threshold": "0.2",
    },
    "colloid_penalty_3d": {
        "mesh.nx": "32", "mesh.ny": "32", "mesh.nz": "32",
        "anchoring.kind": "dirichlet_penalty", "anchoring.K_a": "300",
        "anchoring.eps": "0.06",
        "bc.regions": "all", "bc.n": "ring",
        "init.n": "0 0 -1", "init.n_above": "0 0 1", "init.split_z": "0.5",
        "flow.max_iters": "3000", "flow.tol": "1e-5",
        "output.defect_threshold": "0.2",
    },
    "colloid_penalty_uniform_3d": {
        "mesh.nx": "32", "mesh.ny": "32", "mesh.nz": "32",
        "anchoring.kind": "dirichlet_penalty", "anchoring.K_a": "300",
        "anchoring.eps": "0.06",
        "bc.regions": "all", "bc.n": "0 0 1", "init.n": "0 0 1",
        "flow.max_iters": "3000", "flow.tol": "1e-5",
        "output.defect_threshold": "0.15",
    },
    "colloid_electric_3d": {
        "mesh.nx": "32", "mesh.ny": "32", "mesh.nz": "32",
        "anchoring.kind": "weak", "anchoring.K_a": "300", "anchoring.eps": "0.06",
        "electric.K_ext": "160", "electric.E": "0 1 0", "electric.eps_bar": "1",
        "electric.eps_a": "2", "electric.gamma_a": "0.5",
        "bc.regions": "all", "bc.n": "ring",
        "init.n": "0 0 -1", "init.n_above": "0 0 1", "init.split_z": "0.5",
        "flow.max_iters": "3000", "flow.tol": "1e-5",
        "output.defect_threshold": "0.2",
    },
}


def _convert(key, kind, text):
    text = text.strip()
    try:
        if kind == _FLOAT:
            return float(text)
        if kind == _INT:
            value = float(text)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind == _BOOL:
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError
        if kind == _OPT_FLOAT:
            return None if text.lower() in ("none", "") else float(text)
        if kind == _VEC:
            if text.lower() in ("none", ""):
                return None
            return tuple(float(v) for v in text.replace(",", " ").split())
        if kind == _WORDS:
            return tuple(text.replace(",", " ").split())
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as {kind}") from None


def _format(kind, value):
    if value is None:
        return "none"
    if kind == _BOOL:
        return "true" if value else "false"
    if kind == _VEC:
        return " ".join(repr(float(v)) for v in value)
    if kind == _WORDS:
        return " ".join(value)
    if kind in (_FLOAT, _OPT_FLOAT):
        return repr(float(value))
    return str(value)


def parse_config_text(text):
    """Raw ``{key: string}`` mapping from config text."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


@dataclass
class ScenarioConfig:
    """Typed scenario settings keyed by their dotted names."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def name(self):
        return self.values["scenario"]

    @classmethod
    def from_raw(cls, raw):
        name = raw.get("scenario", "custom").strip()
        if name not in PRESETS:
            raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(PRESETS)}")
        merged = {key: str(default) for key, (_, default) in SCHEMA.items()}
        merged.update(PRESETS[name])
        merged.update(raw)
        merged["scenario"] = name
        values = {key: _convert(key, SCHEMA[key][0], merged[key]) for key in SCHEMA}
        cfg = cls(values)
        cfg.validate()
        return cfg

    @classmethod
    def preset(cls, name, **overrides):
        raw = {"scenario": name}
        raw.update({k.replace("__", "."): str(v) for k, v in overrides.items()})
        return cls.from_raw(raw)

    def replace(self, **changes):
        """Copy with dotted-key overrides given as strings or typed values."""
        raw = {key: _format(SCHEMA[key][0], value) for key, value in self.values.items()}
        for key, value in changes.items():
            key = key.replace("__", ".")
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}")
            raw[key] = value if isinstance(value, str) else _format(SCHEMA[key][0], value)
        return ScenarioConfig.from_raw(raw)

    def validate(self):
        v = self.values
        dim = v["mesh.dim"]
        if dim not in (2, 3):
            raise ConfigError("mesh.dim must be 2 or 3")
        if v["model.kappa"] <= 0:
            raise ConfigError("model.kappa must be positive")
        counts = [v["mesh.nx"], v["mesh.ny"]] + ([v["mesh.nz"]] if dim == 3 else [])
        if min(counts) < 1:
            raise ConfigError("mesh cell counts must be positive")
        if v["mesh.bounds"] is None or len(v["mesh.bounds"]) != 2 * dim:
            raise ConfigError(f"mesh.bounds needs {2 * dim} numbers")
        if v["mesh.split"] not in ("kuhn", "ideal"):
            raise ConfigError("mesh.split must be 'kuhn' or 'ideal'")
        if v["mesh.shear"] and dim != 3:
            raise ConfigError("mesh.shear needs a 3-D mesh")
        if v["mesh.refine"] < 0:
            raise ConfigError("mesh.refine must be non-negative")
        if v["anchoring.kind"] not in ("none", "weak", "dirichlet_penalty"):
            raise ConfigError("anchoring.kind must be none, weak or dirichlet_penalty")
        if v["anchoring.K_a"] < 0:
            raise ConfigError("anchoring.K_a must be non-negative")
        if v["anchoring.kind"] != "none":
            if v["anchoring.eps"] <= 0:
                raise ConfigError("anchoring.eps must be positive")
            if v["colloid.radius"] <= 0:
                raise ConfigError("colloid.radius must be positive")
            c = v["colloid.center"]
            if c is None or len(c) != dim:
                raise ConfigError(f"colloid.center needs {dim} numbers")
            lo, hi = self.box()
            r = v["colloid.radius"]
            if any(ci - r <= a or ci + r >= b for ci, a, b in zip(c, lo, hi)):
                raise ConfigError("colloid must lie strictly inside the domain")
        E = v["electric.E"]
        if E is None or len(E) not in (dim, 3) or (len(E) > dim and any(E[dim:])):
            raise ConfigError(f"electric.E needs {dim} components")
        for key in ("init.n", "init.n_above"):
            vec = v[key]
            if vec is not None and (len(vec) != dim or not any(vec)):
                raise ConfigError(f"{key} needs {dim} components, not all zero")
        if v["bc.n"] not in BC_KINDS:
            vec = _convert("bc.n", _VEC, v["bc.n"])
            if vec is None or len(vec) != dim:
                raise ConfigError(f"bc.n must be one of {', '.join(BC_KINDS)} or {dim} numbers")
            if abs(math.sqrt(sum(x * x for x in vec)) - 1.0) > 1e-12:
                raise ConfigError("bc.n must be a unit vector")
        if v["bc.n"] in ("ring", "ring_axial") and dim != 3:
            raise ConfigError(f"bc.n = {v['bc.n']} needs a 3-D mesh")
        if v["bc.n"] == "plane_defect" and (dim != 3 or v["mesh.nz"] % 2):
            raise ConfigError("bc.n = plane_defect needs a 3-D mesh with even mesh.nz "
                              "so that z = 0.5 is a mesh plane")
        allowed = {"x0", "x1", "y0", "y1", "all"} | ({"z0", "z1"} if dim == 3 else set())
        for region in v["bc.regions"]:
            if region not in allowed:
                raise ConfigError(f"unknown boundary region {region!r}")
        if v["flow.dt"] <= 0:
            raise ConfigError("flow.dt must be positive")
        if v["flow.rho"] is not None and v["flow.rho"] < 0:
            raise ConfigError("flow.rho must be non-negative")
        if v["flow.tangent_mode"] not in ("auto", "coupled", "decoupled"):
            raise ConfigError("flow.tangent_mode must be auto, coupled or decoupled")
        if v["output.defect_threshold"] <= 0:
            raise ConfigError("output.defect_threshold must be positive")

    def box(self):
        b = self.values["mesh.bounds"]
        dim = self.values["mesh.dim"]
        return [b[2 * i] for i in range(dim)], [b[2 * i + 1] for i in range(dim)]

    def to_text(self):
        lines = []
        for key in SCHEMA:
            lines.append(f"{key} = {_format(SCHEMA[key][0], self.values[key])}")
        return "\n".join(lines) + "\n"


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ScenarioConfig.from_raw(parse_config_text(text))


def save_config(cfg, path):
    with open(path, "w") as fh:
        fh.write(cfg.to_text())


# ----------------------------------------------------------------- setup


def ring_director(z):
    """Outer boundary director rotating in the xz-plane from (0,0,-1) at z=0 to (0,0,1) at z=1."""
    z = np.asarray(z, dtype=float)
    return np.column_stack([np.sin(np.pi * z), np.zeros_like(z), -np.cos(np.pi * z)])


def ring_axial_director(x, axis_point=(0.5, 0.5)):
    """Axisymmetric variant: ``(-sin(pi z) e_r, -cos(pi z))`` about a vertical axis.

    At mid-height the director points horizontally towards the axis on every
    side face, so the far field carries one unit of charge around the axis.
    """
    x = np.asarray(x, dtype=float)
    rel = x[:, :2] - np.asarray(axis_point, dtype=float)[:2]
    r = np.linalg.norm(rel, axis=1, keepdims=True)
    e_r = np.divide(rel, r, out=np.zeros_like(rel), where=r > 0)
    sz, cz = np.sin(np.pi * x[:, 2]), np.cos(np.pi * x[:, 2])
    # on the axis only z = 0 or z = 1 can lie on the box boundary, where |cos| = 1
    return normalize_rows(np.column_stack([-sz[:, None] * e_r, -cz]))


def build_mesh(cfg):
    v = cfg.values
    lo, hi = cfg.box()
    bounds = tuple(zip(lo, hi))
    if v["mesh.dim"] == 2:
        mesh = build_square_mesh(v["mesh.nx"], v["mesh.ny"], bounds)
    else:
        mesh = build_cube_mesh(v["mesh.nx"], v["mesh.ny"], v["mesh.nz"], bounds,
                               split=v["mesh.split"])
        if v["mesh.shear"]:
            mesh = apply_shear_map(mesh)
    for _ in range(v["mesh.refine"]):
        mesh = refine_red(mesh)
    return mesh


def build_model(cfg, mesh):
    v = cfg.values
    dw = DoubleWell(scale=v["dw.scale"], c=v["dw.c"], a4=v["dw.a4"], a3=v["dw.a3"],
                    a2=v["dw.a2"], s_star=v["dw.s_star"], enabled=v["model.double_well"])
    phase = None
    anchoring = AnchoringModel()
    if v["anchoring.kind"] != "none":
        shape = Sphere(v["colloid.radius"], v["colloid.center"])
        phase = build_phase_field(mesh, shape, v["anchoring.eps"])
        anchoring = AnchoringModel(v["anchoring.kind"], v["anchoring.K_a"], phase,
                                   g=v["anchoring.g"])
    electric = ElectricModel(v["electric.K_ext"], v["electric.E"], v["electric.eps_bar"],
                             v["electric.eps_a"], v["electric.gamma_a"])
    return EnergyModel(mesh, v["model.kappa"], dw, anchoring, electric), phase


def build_bc(cfg, mesh, s_star):
    v = cfg.values
    regions = v["bc.regions"]
    if not regions:
        return BoundaryConditions()
    nodes = np.unique(np.concatenate([boundary_nodes(mesh, r) for r in regions]))
    s_val = s_star if v["bc.s"] is None else v["bc.s"]
    kind = v["bc.n"]
    if kind == "none":
        return BoundaryConditions(nodes, s_val)
    x = mesh.vertices[nodes]
    if kind == "ring":
        n_val = ring_director(x[:, 2])
    elif kind == "ring_axial":
        center = v["colloid.center"]
        n_val = ring_axial_director(x, center)
    elif kind == "plane_defect":
        z0, z1 = mesh.bounding_box()[0][2], mesh.bounding_box()[1][2]
        mid = 0.5 * (z0 + z1)
        if np.any(np.abs(x[:, 2] - mid) < 1e-12):
            raise ConfigError("plane_defect boundary data would sit on the defect plane")
        n_val = np.where((x[:, 2] < mid)[:, None], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    else:
        vec = np.asarray(_convert("bc.n", _VEC, kind))
        n_val = np.tile(vec, (len(nodes), 1))
    return BoundaryConditions(nodes, s_val, nodes, n_val)


def initial_state(cfg, mesh, s_star):
    v = cfg.values
    nv = mesh.n_vertices
    s0 = np.full(nv, s_star if v["init.s"] is None else v["init.s"])
    below = np.asarray(v["init.n"], dtype=float)
    n0 = np.tile(below / np.linalg.norm(below), (nv, 1))
    if v["init.n_above"] is not None:
        above = np.asarray(v["init.n_above"], dtype=float)
        up = mesh.vertices[:, -1] >= v["init.split_z"]
        n0[up] = above / np.linalg.norm(above)
    return LCState(s0, normalize_rows(n0))


@dataclass
class Problem:
    mesh: object
    model: EnergyModel
    bc: BoundaryConditions
    initial: LCState
    params: FlowParams
    phase: object = None


def build_problem(cfg):
    v = cfg.values
    mesh = build_mesh(cfg)
    model, phase = build_model(cfg, mesh)
    bc = build_bc(cfg, mesh, model.s_star)
    state = initial_state(cfg, mesh, model.s_star)
    params = FlowParams(dt=v["flow.dt"], rho=v["flow.rho"], max_iters=v["flow.max_iters"],
                        tol=v["flow.tol"], cg_tol_director=v["flow.cg_tol_director"],
                        cg_tol_s=v["flow.cg_tol_s"], tangent_mode=v["flow.tangent_mode"])
    return Problem(mesh, model, bc, state, params, phase)


# ---------------------------------------------------------------- output


def write_vtk(mesh, state, path, phase=None):
    """Legacy ASCII VTK unstructured grid with point data ``s``, ``director`` (and ``phi``)."""
    nv, d = mesh.vertices.shape
    pts = np.zeros((nv, 3))
    pts[:, :d] = mesh.vertices
    vec = np.zeros((nv, 3))
    vec[:, :d] = state.n
    k = mesh.cells.shape[1]
    cell_type = 5 if d == 2 else 10
    lines = [
        "# vtk DataFile Version 3.0",
        "liquid crystal state",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
    ]
    lines += [" ".join(repr(float(c)) for c in p) for p in pts]
    lines.append(f"CELLS {mesh.n_cells} {mesh.n_cells * (k + 1)}")
    lines += [f"{k} " + " ".join(str(int(i)) for i in c) for c in mesh.cells]
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines += [str(cell_type)] * mesh.n_cells
    lines.append(f"POINT_DATA {nv}")
    lines += ["SCALARS s double 1", "LOOKUP_TABLE default"]
    lines += [repr(float(x)) for x in state.s]
    lines.append("VECTORS director double")
    lines += [" ".join(repr(float(c)) for c in p) for p in vec]
    if phase is not None:
        lines += ["SCALARS phi double 1", "LOOKUP_TABLE default"]
        lines += [repr(float(x)) for x in phase.phi]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk_point_data(path):
    """Parse point arrays back from a file written by :func:`write_vtk`."""
    with open(path) as fh:
        tokens = fh.read().split("\n")
    out = {}
    i = 0
    npts = None
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("POINTS"):
            npts = int(line.split()[1])
            out["points"] = np.array([[float(x) for x in tokens[i + 1 + j].split()]
                                      for j in range(npts)])
            i += npts
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            out[name] = np.array([float(tokens[i + 2 + j]) for j in range(npts)])
            i += npts + 1
        elif line.startswith("VECTORS"):
            name = line.split()[1]
            out[name] = np.array([[float(x) for x in tokens[i + 1 + j].split()]
                                  for j in range(npts)])
            i += npts
        i += 1
    return out


CSV_HEADER = ["iter", "E1", "E2", "Ea", "Eext", "total", "ds_l2", "dn_l2", "wall_seconds"]


def write_energy_csv(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            e = r.energy
            writer.writerow([r.iter] + [repr(float(x)) for x in
                                        (e.E1, e.E2, e.Ea, e.Eext, e.total, r.ds_l2,
                                         r.dn_l2, r.wall_seconds)])


def resolve_output_dir(cfg_dir, override=None):
    env = os.environ.get(OUTPUT_DIR_ENV)
    if override:
        return override
    if env:
        return env
    return cfg_dir


@dataclass
class ScenarioResult:
    problem: Problem
    flow: object
    defects: object
    output_dir: str
    files: list


def defect_summary(report, threshold):
    return {
        "threshold": threshold,
        "node_count": report.count,
        "centroid": [float(c) for c in report.centroid] if report.count else None,
        "radius_mean": report.radius_mean,
        "radius_median": report.radius_median,
        "radius_max": report.radius_max,
        "components": report.n_components,
        "component_sizes": report.component_sizes,
    }


def run_scenario(cfg, output_dir=None, write=True, progress=None):
    """Build and run a scenario; write VTK, CSV and a defect summary if ``write``."""
    v = cfg.values
    problem = build_problem(cfg)
    out = resolve_output_dir(v["output.dir"], output_dir)
    files = []
    if write:
        os.makedirs(out, exist_ok=True)
        save_config(cfg, os.path.join(out, "config.txt"))
    every = v["output.vtk_every"]

    def callback(k, state, rec):
        if write and every and k % every == 0:
            path = os.path.join(out, f"state_{k:05d}.vtk")
            write_vtk(problem.mesh, state, path, problem.phase)
            files.append(path)
        if progress is not None:
            progress(k, state, rec)

    flow = run_flow(problem.initial, problem.model, problem.bc, problem.params, callback)
    axis_point = v["colloid.center"] if v["anchoring.kind"] != "none" else None
    axis = (0.0, 0.0, 1.0)[: problem.mesh.dim] if problem.mesh.dim == 3 else (0.0, 1.0)
    exclude = None
    if problem.phase is not None and v["output.defect_exterior_only"]:
        exclude = problem.phase.phi < 0.5
    defects = defect_set(flow.state.s, v["output.defect_threshold"], problem.mesh,
                         axis_point=axis_point, axis=axis, exclude=exclude)
    if write:
        path = os.path.join(out, "final.vtk")
        write_vtk(problem.mesh, flow.state, path, problem.phase)
        files.append(path)
        path = os.path.join(out, "energy.csv")
        write_energy_csv(flow.log, path)
        files.append(path)
        summary = {
            "scenario": cfg.name,
            "iterations": flow.iterations,
            "converged": flow.converged,
            "energy": flow.final_energy.as_dict(),
            "s_min": float(flow.state.s.min()),
            "s_max": float(flow.state.s.max()),
            "defects": defect_summary(defects, v["output.defect_threshold"]),
        }
        path = os.path.join(out, "summary.json")
        with open(path, "w") as fh:
            json.dump(summary, fh, indent=2)
        files.append(path)
    return ScenarioResult(problem, flow, defects, out, files)


# ------------------------------------------------------------------- EOC

REFERENCE_ERRORS = {
    3: (5.5087e-02, 5.5090e-01, 2.6693e-01, 5.7355e-02, 4.6602e-01),
    4: (2.9158e-02, 3.9858e-01, 2.0545e-01, 2.9840e-02, 3.2646e-01),
    5: (1.4981e-02, 2.7986e-01, 1.4642e-01, 1.5207e-02, 2.2661e-01),
    6: (7.5964e-03, 1.9726e-01, 1.0398e-01, 7.6800e-03, 1.5878e-01),
}
REFERENCE_ORDERS = (0.9797, 0.5046, 0.4938, 0.9855, 0.5132)
EOC_COLUMNS = ("s_L2", "s_H1", "n_L2", "u_L2", "u_H1")


def plane_defect_exact(s_star, z_mid=0.5):
    """Exact plane-defect solution: callables ``(s, grad s, n, grad n, u, grad u)``."""
    slope = s_star / z_mid
    lower = np.array([1.0, 0.0, 0.0])
    upper = np.array([0.0, 1.0, 0.0])

    def s(x):
        return slope * np.abs(x[..., 2] - z_mid)

    def grad_s(x):
        g = np.zeros_like(x)
        g[..., 2] = slope * np.sign(x[..., 2] - z_mid)
        return g

    def n(x):
        return np.where((x[..., 2] > z_mid)[..., None], upper, lower)

    def grad_n(x):
        return np.zeros(x.shape[:-1] + (3, 3))

    def u(x):
        return s(x)[..., None] * n(x)

    def grad_u(x):
        return n(x)[..., :, None] * grad_s(x)[..., None, :]

    return s, grad_s, n, grad_n, u, grad_u


@dataclass
class EOCLevel:
    level: int
    h: float
    errors: dict
    iterations: int
    converged: bool
    seconds: float


@dataclass
class EOCReport:
    levels: list
    orders: dict

    def table(self, reference=True):
        head = "level        h" + "".join(f"{c:>13}" for c in EOC_COLUMNS)
        rows = [head]
        for lv in self.levels:
            rows.append(f"{lv.level:5d} {lv.h:8.5f}" +
                        "".join(f"{lv.errors[c]:13.4e}" for c in EOC_COLUMNS))
            if reference and lv.level in REFERENCE_ERRORS:
                rows.append(f"{'ref':>5} {'':8}" + "".join(f"{x:13.4e}" for x in REFERENCE_ERRORS[lv.level]))
        rows.append(f"{'EOC':>5} {'':8}" + "".join(f"{self.orders[c]:13.4f}" for c in EOC_COLUMNS))
        if reference:
            rows.append(f"{'ref':>5} {'':8}" + "".join(f"{x:13.4f}" for x in REFERENCE_ORDERS))
        return "\n".join(rows)


def fit_order(h, err):
    """Least-squares slope of ``log(err)`` against ``log(h)``."""
    h = np.log(np.asarray(h, dtype=float))
    e = np.log(np.asarray(err, dtype=float))
    return float(np.polyfit(h, e, 1)[0])


def eoc_run(levels=(3, 4, 5), kappa=0.2, dt=1.0, tol=1e-6, max_iters=2000, progress=None):
    """Plane-defect convergence study on ``(2^l)^3`` Kuhn meshes of the unit cube."""
    levels = sorted(int(lv) for lv in levels)
    if not levels or levels[0] < 1:
        raise ConfigError("EOC levels must be positive integers")
    results = []
    for lv in levels:
        n = 2 ** lv
        cfg = ScenarioConfig.preset(
            "plane_defect_eoc", mesh__nx=n, mesh__ny=n, mesh__nz=n, model__kappa=kappa,
            flow__dt=dt, flow__tol=tol, flow__max_iters=max_iters)
        problem = build_problem(cfg)
        t0 = time.perf_counter()
        flow = run_flow(problem.initial, problem.model, problem.bc, problem.params)
        seconds = time.perf_counter() - t0
        s, gs, nn, gn, u, gu = plane_defect_exact(problem.model.s_star)
        m = problem.mesh
        st = flow.state
        es = error_norms(m, st.s, s, gs)
        en = error_norms(m, st.n, nn, gn)
        eu = error_norms(m, st.u, u, gu)
        errors = {
            "s_L2": es[0], "s_H1": math.hypot(*es), "s_H1_semi": es[1],
            "n_L2": en[0],
            "u_L2": eu[0], "u_H1": math.hypot(*eu), "u_H1_semi": eu[1],
        }
        rec = EOCLevel(lv, 1.0 / n, errors, flow.iterations, flow.converged, seconds)
        results.append(rec)
        if progress is not None:
            progress(rec)
    orders = {}
    if len(results) >= 2:
        hs = [r.h for r in results]
        for key in results[0].errors:
            orders[key] = fit_order(hs, [r.errors[key] for r in results])
    else:
        orders = {key: float("nan") for key in results[0].errors}
    return EOCReport(results, orders)
