"""Command-line front end: JSON problem files in, JSON reports and meshes out.

Exit codes: 0 every check passed, 1 some check failed, 2 the input (or a
precondition such as strict hyperbolicity) was rejected.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Sequence

import jsonschema
import numpy as np

from . import claws, geometry, hydro, ribaucour, transforms
from .claws import CommutingFlow, ConservationLaw
from .expr import ONE, ZERO, Grid, ParseError, differentiate, evaluate, parse, to_string
from .report import TOL_FD, TOL_SYMBOLIC, Residual, VerificationError, grid_points, mixed_error, summarize

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2

_EXPR = {"type": "string", "minLength": 1}
_EXPRS = {"type": "array", "items": _EXPR, "minItems": 1}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "n", "coords", "mode", "grid"],
    "properties": {
        "schema": {"const": 1},
        "name": {"type": "string"},
        "n": {"type": "integer", "minimum": 1},
        "coords": {"type": "array", "items": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"}, "minItems": 1},
        "mode": {"enum": ["diagonal", "general", "surface"]},
        "lambda": _EXPRS,
        "lambda_table": {
            "type": "object",
            "additionalProperties": False,
            "required": ["numeric", "values"],
            "properties": {"numeric": {"const": True}, "values": {"type": "array"}},
        },
        "lame": _EXPRS,
        "flux": _EXPRS,
        "surface": {"type": "array", "items": _EXPR, "minItems": 3, "maxItems": 3},
        "radius": _EXPR,
        "conservation_laws": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["h", "g"],
                "properties": {"name": {"type": "string"}, "h": _EXPR, "g": _EXPR},
            },
        },
        "commuting_flows": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "mu": _EXPRS,
                    "flux": _EXPRS,
                    "q": {"type": "object", "additionalProperties": _EXPR},
                },
            },
        },
        "representation": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["u", "f"],
                "properties": {"name": {"type": "string"}, "u": _EXPR, "f": _EXPR},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["min", "max", "points"],
            "properties": {
                "min": {"type": "array", "items": {"type": "number"}},
                "max": {"type": "array", "items": {"type": "number"}},
                "points": {"type": "array", "items": {"type": "integer", "minimum": 3}},
            },
        },
    },
}


class ValidationFailure(Exception):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(eq=False)
class Problem:
    raw: dict
    name: str
    n: int
    coords: tuple[str, ...]
    mode: str
    grid: Grid
    system: Any = None
    laws: list[ConservationLaw] = field(default_factory=list)
    flows: list[CommutingFlow] = field(default_factory=list)
    representation: list[ConservationLaw] = field(default_factory=list)
    surface: ribaucour.SurfaceImmersion | None = None
    radius: Any = None
    lambda_table: np.ndarray | None = None

    def congruence(self) -> geometry.Congruence:
        if not self.representation:
            raise ValidationFailure("$.representation", "geometry needs a conservative representation")
        return geometry.Congruence.from_laws(self.representation, self.coords)

    def lookup(self, items: list, key: str | None, what: str):
        if not items:
            raise ValidationFailure(f"$.{what}", "no entries to choose from")
        if key is None:
            return items[0]
        if key.isdigit():
            k = int(key)
            if k >= len(items):
                raise ValidationFailure(f"$.{what}", f"index {k} out of range ({len(items)} entries)")
            return items[k]
        for item in items:
            if item.name == key:
                return item
        raise ValidationFailure(f"$.{what}", f"no entry named {key!r}")


def _expr(source: str, coords, path: str):
    try:
        return parse(source, coords)
    except ParseError as err:
        raise ValidationFailure(path, str(err)) from err


def load_problem(data: dict) -> Problem:
    """Validate a decoded problem file and build its objects (raises ValidationFailure)."""
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as err:
        path = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
        raise ValidationFailure(path, err.message) from err
    n = data["n"]
    coords = tuple(data["coords"])
    mode = data["mode"]
    if len(coords) != n:
        raise ValidationFailure("$.coords", f"expected {n} coordinate names")
    g = data["grid"]
    for key in ("min", "max", "points"):
        if len(g[key]) != n:
            raise ValidationFailure(f"$.grid.{key}", f"expected {n} entries")
    try:
        grid = Grid(tuple(g["min"]), tuple(g["max"]), tuple(g["points"]))
    except ValueError as err:
        raise ValidationFailure("$.grid", str(err)) from err
    p = Problem(data, data.get("name", ""), n, coords, mode, grid)

    def exprs(key):
        return [_expr(s, coords, f"$.{key}[{i}]") for i, s in enumerate(data[key])]

    def need(key, length=None):
        if key not in data:
            raise ValidationFailure(f"$.{key}", f"required in {mode} mode")
        if length is not None and len(data[key]) != length:
            raise ValidationFailure(f"$.{key}", f"expected {length} entries")

    if mode == "diagonal":
        if "lambda_table" in data:
            values = np.array(data["lambda_table"]["values"], dtype=float)
            if values.shape != grid.shape + (n,):
                raise ValidationFailure("$.lambda_table.values", f"expected shape {grid.shape + (n,)}")
            p.lambda_table = values
        else:
            need("lambda", n)
            lame = None
            if "lame" in data:
                need("lame", n)
                lame = exprs("lame")
            p.system = hydro.DiagonalSystem(tuple(exprs("lambda")), coords, None if lame is None else tuple(lame))
    elif mode == "general":
        need("flux", n)
        p.system = hydro.GeneralSystem.from_flux(exprs("flux"), coords)
    else:
        if n != 2:
            raise ValidationFailure("$.n", "surface mode needs n = 2")
        need("surface")
        p.surface = ribaucour.SurfaceImmersion(tuple(exprs("surface")), coords)
        if "radius" in data:
            p.radius = _expr(data["radius"], coords, "$.radius")

    for i, law in enumerate(data.get("conservation_laws", [])):
        base = f"$.conservation_laws[{i}]"
        p.laws.append(
            ConservationLaw(
                _expr(law["h"], coords, base + ".h"), _expr(law["g"], coords, base + ".g"), law.get("name", f"law{i}")
            )
        )
    for i, rep in enumerate(data.get("representation", [])):
        base = f"$.representation[{i}]"
        p.representation.append(
            ConservationLaw(
                _expr(rep["u"], coords, base + ".u"), _expr(rep["f"], coords, base + ".f"), rep.get("name", f"u{i + 1}")
            )
        )
    for i, fl in enumerate(data.get("commuting_flows", [])):
        base = f"$.commuting_flows[{i}]"
        mu = fl.get("mu")
        flux = fl.get("flux")
        if mu is None and flux is None:
            raise ValidationFailure(base, "flow needs mu or flux")
        for key, val in (("mu", mu), ("flux", flux)):
            if val is not None and len(val) != n:
                raise ValidationFailure(f"{base}.{key}", f"expected {n} entries")
        p.flows.append(
            CommutingFlow(
                None if mu is None else tuple(_expr(s, coords, f"{base}.mu[{k}]") for k, s in enumerate(mu)),
                {k: _expr(v, coords, f"{base}.q.{k}") for k, v in fl.get("q", {}).items()},
                None if flux is None else tuple(_expr(s, coords, f"{base}.flux[{k}]") for k, s in enumerate(flux)),
                fl.get("name", f"flow{i}"),
            )
        )
    return p


def preflight(p: Problem) -> None:
    """Strict hyperbolicity (diagonal) or a well-posed eigenframe (general) on the grid."""
    if p.mode == "diagonal" and p.system is not None:
        hydro.check_hyperbolicity(p.system, p.grid)
    elif p.mode == "general":
        pts = grid_points(p.grid)[1]
        hydro._sorted_eig(p.system.matrix_at(pts), pts)
    elif p.mode == "surface":
        p.surface.check_regular(p.grid)


# ---------------------------------------------------------------------------
# reports


class Reporter:
    def __init__(self, command: str, tol_symbolic: float, tol_fd: float):
        self.command = command
        self.tolerances = {"symbolic": tol_symbolic, "fd": tol_fd}
        self.checks: list[dict] = []
        self.timing: dict[str, float] = {}
        self.info: dict[str, Any] = {}

    def run(self, tasks: Sequence[tuple[str, Callable[[], list]]]) -> None:
        """Run independent tasks (bounded by CONGLAB_THREADS) and record them in order."""

        def timed(task):
            name, fn = task
            t0 = time.perf_counter()
            out = fn()
            return name, out, time.perf_counter() - t0

        workers = _threads()
        if workers > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(timed, tasks))
        else:
            results = [timed(t) for t in tasks]
        for name, out, elapsed in results:
            self.timing[name] = elapsed
            for r in out:
                d = r.to_dict() if isinstance(r, Residual) else dict(r)
                d["group"] = name
                self.checks.append(d)

    @property
    def passed(self) -> bool:
        return all(c.get("passed", True) for c in self.checks)

    def document(self) -> dict:
        return {
            "command": self.command,
            "tolerances": self.tolerances,
            "checks": self.checks,
            "info": self.info,
            "passed": self.passed,
            "failed": [c["name"] for c in self.checks if not c.get("passed", True)],
            "timing": self.timing,
        }


def _threads() -> int:
    raw = os.environ.get("CONGLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _clean(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def dump_json(doc: dict) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n"


def _emit(doc: dict, path: str | None) -> None:
    text = dump_json(doc)
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _error_doc(command: str, err: Exception, path: str | None = None) -> dict:
    doc = {"command": command, "error": type(err).__name__, "message": str(err), "passed": False}
    if path:
        doc["path"] = path
    if isinstance(err, VerificationError):
        doc["points"] = err.points
    return doc


# ---------------------------------------------------------------------------
# check


def _first_order(name: str, h, g, velocities: np.ndarray, coords, pts, tol: float) -> Residual:
    """``d_i g = v^i d_i h`` with tabulated velocities; NaN velocities are skipped."""
    errs = []
    for i in range(velocities.shape[-1]):
        dh = hydro.eval_on(differentiate(h, i), coords, pts)
        dg = hydro.eval_on(differentiate(g, i), coords, pts)
        v = velocities[..., i]
        errs.append(mixed_error(dg, np.where(np.isnan(v), dg, v * dh)))
    return summarize(name, np.stack(errs), pts, tol)


def _table_law_check(p: Problem, law: ConservationLaw, tol: float) -> Residual:
    coords, pts = grid_points(p.grid)
    return _first_order(f"{law.name}: first order (tabulated velocities)", law.h, law.g, p.lambda_table, coords, pts, tol)


def check_tasks(p: Problem, tol_s: float, tol_fd: float) -> list[tuple[str, Callable[[], list]]]:
    tasks: list[tuple[str, Callable[[], list]]] = []
    laws = p.laws + [l for l in p.representation if all(l.name != k.name for k in p.laws)]
    if p.mode == "diagonal" and p.lambda_table is not None:
        for law in laws:
            tasks.append((f"law {law.name}", lambda law=law: [_table_law_check(p, law, tol_s)]))
        return tasks
    if p.mode == "diagonal":
        sysd = p.system
        tasks.append(("semihamiltonian", lambda: [hydro.semihamiltonian_residual(sysd, p.grid, tol_s)]))
        for law in laws:
            tasks.append((f"law {law.name}", lambda law=law: claws.verify_law_diagonal(sysd, law, p.grid, tol_s).residuals()))
        for flow in p.flows:
            tasks.append((f"flow {flow.name}", lambda flow=flow: claws.verify_commuting(sysd, flow, p.grid, tol=tol_s).residuals()))
            if flow.q:
                tasks.append((f"flow {flow.name} fluxes", lambda flow=flow: _flow_flux_checks(p, flow, tol_s)))
        return tasks
    if p.mode == "general":
        frame = hydro.eigen_frame(p.system, p.grid)
        tasks.append(("diagonalizability", lambda: [_diag_info(frame)]))
        for law in laws:
            tasks.append((f"law {law.name}", lambda law=law: claws.verify_law_general(p.system, frame, law, tol_fd).residuals()))
        for flow in p.flows:
            tasks.append((f"flow {flow.name}", lambda flow=flow: claws.verify_commuting(p.system, flow, frame=frame, tol=tol_fd).residuals()))
        return tasks
    # surface
    system = ribaucour.induced_system(p.surface, p.grid)
    frame = hydro.eigen_frame(system, p.grid)
    for law in laws:
        tasks.append((f"law {law.name}", lambda law=law: claws.verify_law_general(system, frame, law, tol_fd).residuals()))
    return tasks


def _flow_flux_checks(p: Problem, flow: CommutingFlow, tol: float) -> list:
    coords, pts = grid_points(p.grid)
    mu = np.stack([hydro.eval_on(m, coords, pts) for m in flow.mu], axis=-1)
    by_name = {l.name: l for l in p.laws + p.representation}
    out = []
    for name, q in sorted(flow.q.items()):
        if name not in by_name:
            out.append({"name": f"{flow.name}: flux of {name}", "passed": False, "message": "unknown density"})
            continue
        out.append(_first_order(f"{flow.name}: flux of {name}", by_name[name].h, q, mu, coords, pts, tol))
    return out


def _diag_info(frame) -> dict:
    rep = hydro.diagonalizability_test(frame)
    return {
        "name": "diagonalizable",
        "passed": True,
        "informational": True,
        "diagonalizable": rep.diagonalizable,
        "max_c_distinct": rep.max_c,
        "vacuous": rep.vacuous,
    }


def cmd_check(args) -> int:
    return _with_problem(args, "check", lambda p, rep: rep.run(check_tasks(p, args.tol_symbolic, args.tol_fd)))


def _with_problem(args, command: str, body: Callable[[Problem, Reporter], Any]) -> int:
    try:
        data = json.loads(Path(args.file).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        _emit(_error_doc(command, err, "$"), args.report)
        return EXIT_INVALID
    rep = Reporter(command, args.tol_symbolic, args.tol_fd)
    try:
        p = load_problem(data)
        preflight(p)
        body(p, rep)
    except ValidationFailure as err:
        _emit(_error_doc(command, err, err.path), args.report)
        return EXIT_INVALID
    except (VerificationError, ValueError, LookupError) as err:
        _emit(_error_doc(command, err), args.report)
        return EXIT_INVALID
    _emit(rep.document(), args.report)
    return EXIT_OK if rep.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# transform


def _diag_problem(p: Problem) -> hydro.DiagonalSystem:
    if p.mode != "diagonal" or p.system is None:
        raise ValidationFailure("$.mode", "transforms need a diagonal system with symbolic velocities")
    return p.system


def _index(value: int | None, n: int, flag: str) -> int:
    if value is None:
        raise ValidationFailure(flag, "required")
    if not 1 <= value <= n:
        raise ValidationFailure(flag, f"{value} out of range 1..{n}")
    return value - 1


def _law_dict(law: ConservationLaw) -> dict:
    return {"name": law.name, "h": to_string(law.h), "g": to_string(law.g)}


def _output_problem(p: Problem, lam=None, lame=None, laws=(), rep=(), table=None) -> dict:
    out = {
        "schema": 1,
        "name": f"{p.name} (transformed)" if p.name else "transformed",
        "n": p.n,
        "coords": list(p.coords),
        "mode": "diagonal",
        "grid": p.raw["grid"],
    }
    if lam is not None:
        out["lambda"] = [to_string(e) for e in lam]
    if lame is not None:
        out["lame"] = [to_string(e) for e in lame]
    if table is not None:
        values = np.where(np.isnan(table), None, table).tolist()
        out["lambda_table"] = {"numeric": True, "values": values}
    if laws:
        out["conservation_laws"] = [_law_dict(l) for l in laws]
    if rep:
        out["representation"] = [{"name": l.name, "u": to_string(l.h), "f": to_string(l.g)} for l in rep]
    return out


def cmd_transform(args) -> int:
    def body(p: Problem, rep: Reporter):
        sysd = _diag_problem(p)
        alpha = None if args.kind == "compose" else _index(args.alpha, p.n, "--alpha")
        points = p.grid.random_points(100, seed=0, margin=0.05)
        sources = p.laws + [l for l in p.representation if all(l.name != k.name for k in p.laws)]
        output = None
        if args.kind in ("levy", "adjoint"):
            if args.kind == "levy":
                gen = p.lookup(p.laws, args.law, "conservation_laws")
                T = transforms.levy(sysd, gen, alpha, p.grid)
                movable = [l for l in sources if l.name != gen.name]
            else:
                gen = p.lookup(p.flows, args.flow, "commuting_flows")
                T = transforms.adjoint_levy(sysd, gen, alpha, p.grid)
                movable = [l for l in sources if l.name in gen.q]
                rep.info["dropped_laws"] = sorted(l.name for l in sources if l.name not in gen.q)
            new_sys = T.transformed_system()
            rep.run(
                [
                    ("identities", lambda: T.identity_residuals(points, movable, args.tol_symbolic)),
                    ("semihamiltonian", lambda: [hydro.semihamiltonian_residual(new_sys, p.grid, args.tol_symbolic)]),
                ]
            )
            rep.info["lambda"] = [to_string(e) for e in T.Lambda]
            moved_laws = [T.law_map(l) for l in p.laws if l in movable]
            moved_rep = [T.law_map(l) for l in p.representation if l in movable]
            output = _output_problem(p, T.Lambda, T.H, moved_laws, moved_rep)
        elif args.kind == "laplace":
            beta = _index(args.beta, p.n, "--beta")
            if beta == alpha:
                raise ValidationFailure("--beta", "must differ from --alpha")
            chosen = [p.lookup(p.laws, args.law, "conservation_laws")] if args.law is not None else sources
            T = transforms.laplace(sysd, alpha, beta, chosen, p.grid)
            table = T.velocities_at(p.grid)
            rep.run([("identities", lambda: T.identity_residuals(points, chosen, args.tol_symbolic))])
            rep.info["densities"] = [to_string(l.h) for l in T.laws]
            rep.info["undefined_velocities"] = [i + 1 for i in range(p.n) if np.all(np.isnan(table[..., i]))]
            output = _output_problem(p, laws=T.laws, table=table)
        else:
            if args.laws is None:
                raise ValidationFailure("--laws", "compose needs n generating laws")
            keys = args.laws.split(",")
            if len(keys) != p.n:
                raise ValidationFailure("--laws", f"expected {p.n} laws")
            gens = [p.lookup(p.laws, k, "conservation_laws") for k in keys]
            target = p.lookup(p.laws + p.representation, args.target, "conservation_laws")
            moved, new_sys = transforms.compose_sequential(sysd, gens, target)

            def compare():
                U, F = transforms.levy_composition(sysd, gens, target, points)
                coords = tuple(points[..., k] for k in range(p.n))
                return [
                    summarize("determinant density vs sequential", mixed_error(U, evaluate(moved.h, coords)), points, 1e-8),
                    summarize("determinant flux vs sequential", mixed_error(F, evaluate(moved.g, coords)), points, 1e-8),
                ]

            rep.run([("composition", compare)])
            output = _output_problem(p, new_sys.lam, None, [moved])
        if args.out:
            Path(args.out).write_text(dump_json(output), encoding="utf-8")
            rep.info["output"] = str(args.out)

    return _with_problem(args, "transform", body)


# ---------------------------------------------------------------------------
# geometry


def _two_point_sheets(c: geometry.Congruence):
    return [c.point_at(ZERO), c.point_at(ONE)]


def cmd_geometry(args) -> int:
    def body(p: Problem, rep: Reporter):
        if p.mode != "diagonal" or p.system is None:
            raise ValidationFailure("$.mode", "geometry needs a diagonal system with symbolic velocities")
        c = p.congruence()
        what = args.what
        suffix = Path(args.out).suffix.lstrip(".").lower() if args.out else ""
        fmt = args.format or (suffix if suffix in ("obj", "csv") else None)
        fmt = fmt or ("obj" if c.ambient == 3 and what in ("conjugate", "harmonic") else "csv")
        surface = None
        if what == "congruence":
            surface = geometry.sample_congruence_points(_two_point_sheets(c), p.grid)
        elif what == "focal":
            fs = geometry.focal_points(c, p.system, p.grid)
            rep.run([("focal", lambda: [fs.on_line, *fs.tangency])])
            rep.info["degenerate_sheets"] = [i + 1 for i in fs.degenerate]
            sheets = np.moveaxis(fs.points, -2, 0)
            surface = geometry.Surface(fs.params, sheets, sheets=c.n)
        elif what == "conjugate":
            law = p.lookup(p.laws or p.representation, args.law, "conservation_laws")
            surface = geometry.conjugate_hypersurface(c, law, p.grid, p.system, tol=args.tol_conjugacy)
            tasks = [("conjugate", lambda: surface.reports)]
            if args.shifts:
                shifts = [float(s) for s in args.shifts.split(",")]
                tasks.append(("parallel family", lambda: [geometry.parallel_family_check(c, law, shifts, p.grid)]))
            rep.run(tasks)
        elif what == "harmonic":
            if c.n != 2:
                raise ValidationFailure("$.n", "harmonic surfaces need n = 2")
            flow = p.lookup(p.flows, args.flow, "commuting_flows")
            if flow.mu is None or any(k not in flow.q for k in c.names):
                raise ValidationFailure("$.commuting_flows", "harmonic surfaces need mu and fluxes q for every density")
            surface = geometry.harmonic_surface(c, p.system, flow, p.grid, tol_conjugacy=args.tol_conjugacy)
            rep.run([("harmonic", lambda: surface.reports)])
        elif what == "levy-congruence":
            law = p.lookup(p.laws, args.law, "conservation_laws")
            alpha = _index(args.alpha, p.n, "--alpha")
            res = geometry.levy_congruence(c, law, alpha, p.grid, p.system)
            rep.run([("levy congruence", lambda: res.reports)])
            rep.info["degenerate"] = res.degenerate
            surface = geometry.sample_congruence_points(_two_point_sheets(res.congruence), p.grid)
        elif what == "adjoint-planes":
            flow = p.lookup(p.flows, args.flow, "commuting_flows")
            alpha = _index(args.alpha, p.n, "--alpha")
            res = geometry.adjoint_plane_family(c, flow, alpha, p.system, p.grid)
            rep.run([("adjoint planes", lambda: res.reports)])
            rep.info["degenerate"] = res.degenerate
            surface = geometry.sample_congruence_points(_two_point_sheets(res.congruence), p.grid)
        if args.out and surface is not None:
            geometry.export_mesh(surface, args.out, fmt, p.coords)
            rep.info["mesh"] = {"path": str(args.out), "format": fmt}

    return _with_problem(args, "geometry", body)


# ---------------------------------------------------------------------------
# ribaucour


def cmd_ribaucour(args) -> int:
    def body(p: Problem, rep: Reporter):
        if p.mode != "surface":
            raise ValidationFailure("$.mode", "ribaucour needs a surface problem")
        if p.radius is None:
            raise ValidationFailure("$.radius", "required for sphere congruences")
        sc = ribaucour.SphereCongruence(p.surface, p.radius)
        ribaucour.induced_system(p.surface, p.grid)
        tasks = []
        if args.check in ("geometric", "both"):
            tasks.append(("geometric", lambda: [ribaucour.ribaucour_check(sc, p.grid).angle]))
        if args.check in ("theorem", "both"):
            law = p.lookup(p.laws, args.law, "conservation_laws")
            tasks.append(("theorem", lambda: ribaucour.ribaucour_theorem_check(sc, law, p.grid, args.tol_fd).residuals()))
        rep.run(tasks)

    return _with_problem(args, "ribaucour", body)


# ---------------------------------------------------------------------------
# verify-all


def bundled_problems() -> list[Path]:
    root = resources.files("conglab") / "problems"
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".json"))


def cmd_verify_all(args) -> int:
    files = [Path(f) for f in args.files] or [f for f in bundled_problems() if not f.name.startswith("bad_")]
    summary = {"command": "verify-all", "files": {}, "timing": {}}
    worst = EXIT_OK
    for f in files:
        sub = argparse.Namespace(file=str(f), report=os.devnull, tol_symbolic=args.tol_symbolic, tol_fd=args.tol_fd)
        data = json.loads(f.read_text(encoding="utf-8"))
        t0 = time.perf_counter()
        if data.get("mode") == "surface" and "radius" in data:
            sub.check = "both" if data.get("conservation_laws") else "geometric"
            sub.law = None
            code = cmd_ribaucour(sub)
        else:
            code = cmd_check(sub)
        summary["timing"][f.name] = time.perf_counter() - t0
        summary["files"][f.name] = {"exit": code, "passed": code == EXIT_OK}
        worst = max(worst, code)
    summary["passed"] = worst == EXIT_OK
    _emit(summary, args.report)
    return worst


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conglab", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-symbolic", type=float, default=TOL_SYMBOLIC)
    common.add_argument("--tol-fd", type=float, default=TOL_FD)
    common.add_argument("--report", help="write the JSON report here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="verify system, laws and flows")
    p.add_argument("file")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("transform", parents=[common], help="apply a transformation")
    p.add_argument("file")
    p.add_argument("--kind", required=True, choices=["levy", "adjoint", "laplace", "compose"])
    p.add_argument("--alpha", type=int, help="1-based direction")
    p.add_argument("--beta", type=int, help="1-based second direction (laplace)")
    p.add_argument("--law", help="law index (0-based) or name")
    p.add_argument("--flow", help="flow index (0-based) or name")
    p.add_argument("--laws", help="comma-separated generating laws (compose)")
    p.add_argument("--target", help="law transformed by compose (default: first)")
    p.add_argument("--out", help="write the transformed problem file here")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("geometry", parents=[common], help="build congruence geometry and meshes")
    p.add_argument("file")
    p.add_argument(
        "--what",
        required=True,
        choices=["congruence", "focal", "conjugate", "harmonic", "levy-congruence", "adjoint-planes"],
    )
    p.add_argument("--out")
    p.add_argument("--format", choices=["obj", "csv"])
    p.add_argument("--law")
    p.add_argument("--flow")
    p.add_argument("--alpha", type=int)
    p.add_argument("--shifts", help="comma-separated flux shifts for the parallel-family check")
    p.add_argument("--tol-conjugacy", type=float, default=1e-4)
    p.set_defaults(func=cmd_geometry)

    p = sub.add_parser("ribaucour", parents=[common], help="Ribaucour sphere-congruence checks")
    p.add_argument("file")
    p.add_argument("--check", choices=["geometric", "theorem", "both"], default="both")
    p.add_argument("--law")
    p.set_defaults(func=cmd_ribaucour)

    p = sub.add_parser("verify-all", parents=[common], help="check several problem files (default: bundled)")
    p.add_argument("files", nargs="*")
    p.set_defaults(func=cmd_verify_all)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
