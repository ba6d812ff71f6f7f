"""Command line driver: benchmark presets, run configs, outputs.

The run configuration is a flat plain-text ``key = value`` file; command
line flags override file values. Two presets are shipped: a shock tube
on the unit square sampled along the horizontal mid line, and the same
shock tube on a curved U-bend channel sampled along the channel center
line.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import afc, assembly, geometry, timeint
from .bc import BoundarySpec
from .euler import GasModel, InadmissibleStateError, Primitive, conservative_from_primitive

__all__ = [
    "RunConfig",
    "benchmark_preset",
    "parse_config",
    "serialize_config",
    "build_case",
    "set_initial_condition",
    "sample_line",
    "write_outputs",
    "run_case",
    "exact_riemann",
    "riemann_star_state",
    "main",
]

FLOAT_FMT = "%.17g"

SOD_LEFT = Primitive(rho=1.0, v=(0.0, 0.0), p=1.0)
SOD_RIGHT = Primitive(rho=0.125, v=(0.0, 0.0), p=0.1)


# ----------------------------------------------------------------------------
# configuration

@dataclass
class RunConfig:
    geometry: str = "unit-square"          # preset name or patch file path
    degree: int = 2
    n1: int = 66
    n2: int = 66
    gamma: float = 1.4
    dt: float = 0.0005
    t_final: float = 0.231
    scheme: str = "fct"
    control_vars: tuple = ("density", "pressure")
    ic: str = "sod-x"
    bc_west: str = "slip_wall"
    bc_east: str = "slip_wall"
    bc_south: str = "slip_wall"
    bc_north: str = "slip_wall"
    farfield: tuple | None = None          # (rho, vx, vy, p)
    out_dir: str = "out"
    sample_kind: str = "physical"          # physical | parametric
    sample_start: tuple = (0.0, 0.5)
    sample_end: tuple = (1.0, 0.5)
    n_samples: int = 512
    field_grid: tuple = (128, 128)
    ubend_width: float = 1.0
    ubend_leg: float = 2.0
    ubend_radius: float = 0.5

    def __post_init__(self):
        if self.scheme not in timeint.SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        for var in self.control_vars:
            if var not in afc.CONTROL_VARIABLES:
                raise ValueError(f"unknown control variable {var!r}")
        if self.sample_kind not in ("physical", "parametric"):
            raise ValueError(f"unknown sample kind {self.sample_kind!r}")
        for v in (self.degree, self.n1, self.n2, self.n_samples):
            if v <= 0:
                raise ValueError("config integers must be positive")
        if self.dt <= 0 or self.t_final < 0 or self.gamma <= 1:
            raise ValueError("invalid dt / t_final / gamma")


def benchmark_preset(name: str) -> RunConfig:
    if name == "sod-square":
        return RunConfig()
    if name == "sod-ubend":
        return RunConfig(
            geometry="ubend",
            n1=194,
            n2=34,
            dt=0.001,
            ic="sod-bend",
            bc_west="transmissive",
            bc_east="transmissive",
            sample_kind="parametric",
            sample_start=(0.0, 0.5),
            sample_end=(1.0, 0.5),
            field_grid=(256, 48),
        )
    raise ValueError(f"unknown benchmark {name!r}")


def _fmt(value) -> str:
    if isinstance(value, float):
        return FLOAT_FMT % value
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    lines = ["# igafct run configuration"]
    for name in cfg.__dataclass_fields__:
        value = getattr(cfg, name)
        if value is None:
            continue
        lines.append(f"{name} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def _parse_tuple(text: str, conv):
    return tuple(conv(v) for v in text.split(","))


def parse_config_dict(text: str) -> dict:
    """Typed keyword arguments for the keys present in a config text."""
    raw: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"malformed config line: {line!r}")
        raw[key.strip()] = value.strip()
    kwargs = {}
    fields = RunConfig.__dataclass_fields__
    for key, value in raw.items():
        if key not in fields:
            raise ValueError(f"unknown config key {key!r}")
        ftype = fields[key].type
        if key in ("control_vars",):
            kwargs[key] = _parse_tuple(value, str)
        elif key in ("sample_start", "sample_end", "farfield"):
            kwargs[key] = _parse_tuple(value, float)
        elif key == "field_grid":
            kwargs[key] = _parse_tuple(value, int)
        elif ftype == "int":
            kwargs[key] = int(value)
        elif ftype == "float":
            kwargs[key] = float(value)
        else:
            kwargs[key] = value
    return kwargs


def parse_config(text: str) -> RunConfig:
    return RunConfig(**parse_config_dict(text))


# ----------------------------------------------------------------------------
# case construction

def _build_geometry(cfg: RunConfig) -> geometry.GeometryMap:
    if cfg.geometry == "unit-square":
        return geometry.make_unit_square((cfg.n1, cfg.n2), cfg.degree)
    if cfg.geometry == "ubend":
        return geometry.make_ubend(
            cfg.ubend_width, cfg.ubend_leg, cfg.ubend_radius, (cfg.n1, cfg.n2), cfg.degree
        )
    return geometry.load_patch(cfg.geometry)


def _ic_function(cfg: RunConfig):
    left = np.array([SOD_LEFT.rho, *SOD_LEFT.v, SOD_LEFT.p])
    right = np.array([SOD_RIGHT.rho, *SOD_RIGHT.v, SOD_RIGHT.p])

    if cfg.ic == "sod-x":
        def ic(points):
            side = points[:, 0] >= 0.5
            vals = np.where(side[:, None], right, left)
            return vals[:, 0], vals[:, 1:-1], vals[:, -1]
        return ic
    if cfg.ic == "sod-bend":
        rc = cfg.ubend_radius + 0.5 * cfg.ubend_width
        def ic(points):
            side = points[:, 1] >= rc
            vals = np.where(side[:, None], right, left)
            return vals[:, 0], vals[:, 1:-1], vals[:, -1]
        return ic
    if cfg.ic == "uniform":
        def ic(points):
            m = points.shape[0]
            return (
                np.full(m, left[0]),
                np.zeros((m, points.shape[1])),
                np.full(m, left[-1]),
            )
        return ic
    raise ValueError(f"unknown initial condition {cfg.ic!r}")


def set_initial_condition(geo: geometry.GeometryMap, ic, gas: GasModel) -> afc.SolutionField:
    """Collocate a primitive-valued function at the Greville images.

    The coefficients are point samples rather than a projection, which
    keeps piecewise-constant data free of over- and undershoots.
    """
    points = geo.greville_images()
    rho, v, p = ic(points)
    if np.any(rho <= 0.0) or np.any(p <= 0.0):
        raise InadmissibleStateError("initial condition is not admissible everywhere")
    return afc.SolutionField(conservative_from_primitive(rho, v, p, gas), t=0.0)


def _boundary_spec(cfg: RunConfig, dim: int) -> BoundarySpec:
    sides = assembly.boundary_sides(dim)
    kinds = {s: getattr(cfg, f"bc_{s}") for s in sides}
    farfield = None
    if cfg.farfield is not None:
        f = cfg.farfield
        farfield = Primitive(rho=f[0], v=tuple(f[1:-1]), p=f[-1])
    return BoundarySpec(kinds, farfield)


def build_case(cfg: RunConfig):
    """Geometry, assembled operators, boundary spec, gas and initial field."""
    geo = _build_geometry(cfg)
    ops = assembly.build_operators(geo)
    gas = GasModel(cfg.gamma)
    bspec = _boundary_spec(cfg, geo.dim)
    field0 = set_initial_condition(geo, _ic_function(cfg), gas)
    return geo, ops, bspec, gas, field0


# ----------------------------------------------------------------------------
# sampling

def _is_identity_map(geo: geometry.GeometryMap) -> bool:
    probes = np.array([[0.21, 0.37], [0.73, 0.58], [0.5, 0.5]])[:, : geo.dim]
    return all(np.allclose(geo.map_point(xi), xi, atol=1e-13) for xi in probes)


def inverse_map(geo: geometry.GeometryMap, x: np.ndarray, guess: np.ndarray,
                tol: float = 1e-12, max_iter: int = 50):
    """Newton solve of ``map(xi) = x``; ``None`` when the point is outside."""
    xi = np.clip(np.asarray(guess, dtype=float), 0.0, 1.0)
    for _ in range(max_iter):
        r = geo.map_point(xi) - x
        if np.linalg.norm(r) <= tol:
            return xi
        J, _ = geo.jacobian(xi)
        xi = np.clip(xi - np.linalg.solve(J, r), 0.0, 1.0)
    if np.linalg.norm(geo.map_point(xi) - x) <= 1e-9:
        return xi
    return None


def sample_line(field: afc.SolutionField, geo: geometry.GeometryMap, gas: GasModel,
                start, end, n_samples: int, kind: str = "physical") -> dict:
    """Sample the spline solution along a line.

    ``kind='physical'`` places samples on the straight segment between
    two physical points and inverts the geometry map per sample (exact
    shortcut when the patch is the identity). ``kind='parametric'``
    samples a straight segment in the reference domain. Points outside
    the patch yield NaN columns. Returns column arrays keyed
    ``s, x, y, rho, v, p, E``; ``s`` is the arc length along the sampled
    curve.
    """
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    ts = np.linspace(0.0, 1.0, n_samples)
    d = geo.dim
    if kind == "parametric":
        params = start[None, :] + ts[:, None] * (end - start)[None, :]
        points = geo.map_points(params)
        valid = np.ones(n_samples, dtype=bool)
    else:
        points = start[None, :] + ts[:, None] * (end - start)[None, :]
        if _is_identity_map(geo):
            params = points.copy()
            valid = np.all((params >= 0.0) & (params <= 1.0), axis=1)
        else:
            grev = geo.basis.greville_grid()
            images = geo.greville_images()
            params = np.zeros_like(points)
            valid = np.zeros(n_samples, dtype=bool)
            for k, x in enumerate(points):
                nearest = int(np.argmin(np.sum((images - x) ** 2, axis=1)))
                xi = inverse_map(geo, x, grev[nearest])
                if xi is not None:
                    params[k] = xi
                    valid[k] = True

    nvar = field.U.shape[1]
    U_s = np.full((n_samples, nvar), np.nan)
    for k in range(n_samples):
        if valid[k]:
            active, vals = geo.basis.eval_at(params[k])
            U_s[k] = vals @ field.U[active]
    rho = U_s[:, 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        v = U_s[:, 1:-1] / rho[:, None]
        p = (gas.gamma - 1.0) * (U_s[:, -1] - 0.5 * rho * np.sum(v * v, axis=1))
        E = U_s[:, -1] / rho
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    return {
        "s": s,
        "x": points[:, 0],
        "y": points[:, 1] if d == 2 else np.zeros(n_samples),
        "rho": rho,
        "v": v,
        "p": p,
        "E": E,
        "valid": valid,
    }


# ----------------------------------------------------------------------------
# outputs

def _write_csv(path, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(FLOAT_FMT % v if isinstance(v, float) else str(v) for v in row))
            fh.write("\n")


def write_outputs(field, diagnostics, cfg: RunConfig, geo, gas: GasModel, failure=None) -> dict:
    """Write line sample, field dump, diagnostics and the resolved config.

    Returns the paths written. All floating point values carry 17
    significant digits so reruns can be compared bitwise.
    """
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    paths = {}

    line = sample_line(
        field, geo, gas, cfg.sample_start, cfg.sample_end, cfg.n_samples, cfg.sample_kind
    )
    rows = []
    for k in range(cfg.n_samples):
        vx = line["v"][k, 0]
        vy = line["v"][k, 1] if line["v"].shape[1] == 2 else 0.0
        rows.append(
            (float(line["s"][k]), float(line["x"][k]), float(line["y"][k]),
             float(line["rho"][k]), float(vx), float(vy),
             float(line["p"][k]), float(line["E"][k]))
        )
    paths["line"] = os.path.join(out, "line_sample.csv")
    _write_csv(paths["line"], "s,x,y,rho,vx,vy,p,E", rows)

    nx, ny = cfg.field_grid
    xi0 = np.linspace(0.0, 1.0, nx)
    xi1 = np.linspace(0.0, 1.0, ny)
    paths["field"] = os.path.join(out, "field.csv")
    with open(paths["field"], "w") as fh:
        fh.write(f"{nx},{ny}\n")
        for a in xi0:
            for b in xi1:
                active, vals = geo.basis.eval_at((a, b))
                U = vals @ field.U[active]
                x = vals @ geo.control[active]
                rho = U[0]
                v = U[1:-1] / rho
                p = (gas.gamma - 1.0) * (U[-1] - 0.5 * rho * float(v @ v))
                vy = v[1] if v.size == 2 else 0.0
                vals_out = (x[0], x[1] if x.size == 2 else 0.0, rho, v[0], vy, p, U[-1] / rho)
                fh.write(",".join(FLOAT_FMT % float(u) for u in vals_out) + "\n")

    paths["diagnostics"] = os.path.join(out, "diagnostics.csv")
    rows = [
        (r.step, float(r.t), float(r.min_rho), float(r.min_p), float(r.mass),
         float(r.energy), float(r.min_alpha), float(r.mean_alpha), float(r.ms_per_step))
        for r in diagnostics
    ]
    _write_csv(paths["diagnostics"], "step,t,min_rho,min_p,mass,energy,min_alpha,mean_alpha,ms_per_step", rows)

    paths["config"] = os.path.join(out, "resolved_config.txt")
    with open(paths["config"], "w") as fh:
        fh.write(serialize_config(cfg))

    if failure is not None:
        paths["failure"] = os.path.join(out, "failure.txt")
        with open(paths["failure"], "w") as fh:
            fh.write(failure + "\n")
    return paths


def run_case(cfg: RunConfig, hook=None):
    """Build, march and write a full case; returns (result, paths, extras)."""
    geo, ops, bspec, gas, field0 = build_case(cfg)
    loop = timeint.TimeLoopConfig(dt=cfg.dt, t_final=cfg.t_final, hook=hook)
    cfl0 = timeint.cfl_estimate(field0.U, ops, gas, cfg.dt)
    result = timeint.run(field0, cfg.scheme, ops, bspec, gas, loop, cfg.control_vars)
    paths = write_outputs(result.field, result.diagnostics, cfg, geo, gas, result.failure)
    extras = {"geo": geo, "ops": ops, "bspec": bspec, "gas": gas, "cfl0": cfl0}
    return result, paths, extras


# ----------------------------------------------------------------------------
# exact Riemann solution (verification oracle)

def _pressure_fn(p, rho_k, p_k, c_k, gas):
    """Toro-style pressure function of one side and its derivative."""
    g = gas.gamma
    if p > p_k:  # shock branch
        A = 2.0 / ((g + 1.0) * rho_k)
        B = (g - 1.0) / (g + 1.0) * p_k
        root = np.sqrt(A / (B + p))
        return (p - p_k) * root, root * (1.0 - 0.5 * (p - p_k) / (B + p))
    # rarefaction branch
    pr = p / p_k
    f = 2.0 * c_k / (g - 1.0) * (pr ** ((g - 1.0) / (2.0 * g)) - 1.0)
    df = pr ** (-(g + 1.0) / (2.0 * g)) / (rho_k * c_k)
    return f, df


def riemann_star_state(left: Primitive, right: Primitive, gas: GasModel,
                       tol: float = 1e-12, max_iter: int = 100):
    """Star-region pressure and velocity by Newton iteration."""
    g = gas.gamma
    rho_l, u_l, p_l = left.rho, left.v[0], left.p
    rho_r, u_r, p_r = right.rho, right.v[0], right.p
    c_l = np.sqrt(g * p_l / rho_l)
    c_r = np.sqrt(g * p_r / rho_r)
    if 2.0 * (c_l + c_r) / (g - 1.0) <= u_r - u_l:
        raise ValueError("vacuum forms between the two states")
    p = max(1e-8, 0.5 * (p_l + p_r) - 0.125 * (u_r - u_l) * (rho_l + rho_r) * (c_l + c_r))
    for _ in range(max_iter):
        f_l, df_l = _pressure_fn(p, rho_l, p_l, c_l, gas)
        f_r, df_r = _pressure_fn(p, rho_r, p_r, c_r, gas)
        delta = (f_l + f_r + u_r - u_l) / (df_l + df_r)
        p_new = max(p - delta, 1e-14)
        if abs(p_new - p) <= tol * max(p, p_new):
            p = p_new
            break
        p = p_new
    f_l, _ = _pressure_fn(p, rho_l, p_l, c_l, gas)
    f_r, _ = _pressure_fn(p, rho_r, p_r, c_r, gas)
    u = 0.5 * (u_l + u_r) + 0.5 * (f_r - f_l)
    return p, u


def exact_riemann(left: Primitive, right: Primitive, gas: GasModel, xi):
    """Self-similar solution of the 1D Riemann problem at speeds ``xi = x/t``.

    Returns ``(rho, u, p)`` arrays. Used as the verification oracle for
    the shock-tube benchmarks.
    """
    g = gas.gamma
    gm1 = g - 1.0
    gp1 = g + 1.0
    p_star, u_star = riemann_star_state(left, right, gas)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    rho = np.empty_like(xi)
    u = np.empty_like(xi)
    p = np.empty_like(xi)

    rho_l, u_l, p_l = left.rho, left.v[0], left.p
    rho_r, u_r, p_r = right.rho, right.v[0], right.p
    c_l = np.sqrt(g * p_l / rho_l)
    c_r = np.sqrt(g * p_r / rho_r)

    left_side = xi < u_star
    # left wave
    if p_star > p_l:  # shock
        s_l = u_l - c_l * np.sqrt(gp1 / (2 * g) * p_star / p_l + gm1 / (2 * g))
        rho_star_l = rho_l * ((p_star / p_l + gm1 / gp1) / (gm1 / gp1 * p_star / p_l + 1.0))
        pre = left_side & (xi < s_l)
        post = left_side & ~pre
        rho[pre], u[pre], p[pre] = rho_l, u_l, p_l
        rho[post], u[post], p[post] = rho_star_l, u_star, p_star
    else:  # rarefaction
        c_star_l = c_l * (p_star / p_l) ** (gm1 / (2 * g))
        head, tail = u_l - c_l, u_star - c_star_l
        rho_star_l = rho_l * (p_star / p_l) ** (1.0 / g)
        pre = left_side & (xi < head)
        fan = left_side & (xi >= head) & (xi <= tail)
        post = left_side & (xi > tail)
        rho[pre], u[pre], p[pre] = rho_l, u_l, p_l
        factor = 2.0 / gp1 + gm1 / (gp1 * c_l) * (u_l - xi[fan])
        rho[fan] = rho_l * factor ** (2.0 / gm1)
        u[fan] = 2.0 / gp1 * (c_l + 0.5 * gm1 * u_l + xi[fan])
        p[fan] = p_l * factor ** (2.0 * g / gm1)
        rho[post], u[post], p[post] = rho_star_l, u_star, p_star

    right_side = ~left_side
    if p_star > p_r:  # shock
        s_r = u_r + c_r * np.sqrt(gp1 / (2 * g) * p_star / p_r + gm1 / (2 * g))
        rho_star_r = rho_r * ((p_star / p_r + gm1 / gp1) / (gm1 / gp1 * p_star / p_r + 1.0))
        post = right_side & (xi > s_r)
        star = right_side & ~post
        rho[post], u[post], p[post] = rho_r, u_r, p_r
        rho[star], u[star], p[star] = rho_star_r, u_star, p_star
    else:  # rarefaction
        c_star_r = c_r * (p_star / p_r) ** (gm1 / (2 * g))
        head, tail = u_r + c_r, u_star + c_star_r
        rho_star_r = rho_r * (p_star / p_r) ** (1.0 / g)
        post = right_side & (xi > head)
        fan = right_side & (xi >= tail) & (xi <= head)
        star = right_side & (xi < tail)
        rho[post], u[post], p[post] = rho_r, u_r, p_r
        factor = 2.0 / gp1 - gm1 / (gp1 * c_r) * (u_r - xi[fan])
        rho[fan] = rho_r * factor ** (2.0 / gm1)
        u[fan] = 2.0 / gp1 * (-c_r + 0.5 * gm1 * u_r + xi[fan])
        p[fan] = p_r * factor ** (2.0 * g / gm1)
        rho[star], u[star], p[star] = rho_star_r, u_star, p_star
    return rho, u, p


# ----------------------------------------------------------------------------
# CLI

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="igafct",
        description="B-Spline Galerkin solver for the compressible Euler equations "
        "with flux-corrected transport stabilization.",
    )
    parser.add_argument("--config", help="path to a key=value run configuration file")
    parser.add_argument("--benchmark", choices=["sod-square", "sod-ubend"],
                        help="load a benchmark preset before applying overrides")
    parser.add_argument("--scheme", choices=["galerkin", "low-order", "fct"])
    parser.add_argument("--degree", type=int)
    parser.add_argument("--n", type=int, help="basis functions per direction")
    parser.add_argument("--dt", type=float)
    parser.add_argument("--tfinal", type=float)
    parser.add_argument("--control-vars", help="comma separated: density,pressure")
    parser.add_argument("--out", help="output directory")
    return parser


def resolve_config(argv) -> RunConfig:
    args = _build_parser().parse_args(argv)
    if args.benchmark:
        cfg = benchmark_preset(args.benchmark)
    elif args.config:
        cfg = None
    else:
        cfg = benchmark_preset("sod-square")
    if args.config:
        with open(args.config) as fh:
            file_kwargs = parse_config_dict(fh.read())
        cfg = RunConfig(**file_kwargs) if cfg is None else replace(cfg, **file_kwargs)
    overrides = {}
    if args.scheme:
        overrides["scheme"] = args.scheme.replace("-", "_")
    if args.degree:
        overrides["degree"] = args.degree
    if args.n:
        overrides["n1"] = args.n
        overrides["n2"] = args.n
    if args.dt:
        overrides["dt"] = args.dt
    if args.tfinal is not None:
        overrides["t_final"] = args.tfinal
    if args.control_vars:
        overrides["control_vars"] = tuple(v.strip() for v in args.control_vars.split(","))
    if args.out:
        overrides["out_dir"] = args.out
    return replace(cfg, **overrides)


def main(argv=None) -> int:
    cfg = resolve_config(sys.argv[1:] if argv is None else argv)
    print(f"geometry={cfg.geometry} n=({cfg.n1},{cfg.n2}) degree={cfg.degree} "
          f"scheme={cfg.scheme} dt={cfg.dt} T={cfg.t_final}")
    result, paths, extras = run_case(cfg)
    print(f"initial CFL estimate: {extras['cfl0']:.3f}")
    if result.diagnostics:
        last = result.diagnostics[-1]
        print(f"finished {last.step} steps, t={last.t:.6f}, "
              f"min rho={last.min_rho:.6f}, min p={last.min_p:.6f}")
    for key, path in paths.items():
        print(f"wrote {key}: {path}")
    if result.failed:
        print(f"RUN FAILED: {result.failure}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
