"""Command-line front end: sweeps, figure recipes, CSV output and caching.

Tables are written as CSV with 17 significant digits per float, so a table
read back with :func:`read_table` equals the one written. Each output file
``name.csv`` gets a ``name.csv.json`` sidecar with the code version, a hash
of the run specification, tolerances and any desk-scale substitutions.

A configuration file holds ``key = value`` lines using the long flag names
without dashes (``gamma = 0.7``, ``h-range = 0:2:41``); ``#`` starts a
comment. Flags given on the command line override the file.

Exit codes: 0 on success, 2 on invalid input, 3 on a numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .errors import NumericalError, ValidationError, XYDiscordError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

TOLERANCES = {
    "quadrature_abs": 1e-10,
    "lanczos_residual": 1e-12,
    "discord_refine": 1e-10,
    "psd_clip": 1e-10,
    "psd_reject": 1e-8,
}

DESK_SCALE = [
    "symmetry-broken ground states from ED (L <= 20) or bulk clustering instead of DMRG at L = 400",
    "infinitesimal longitudinal field realised as the parity-sector cat state",
]


# ------------------------------------------------------------------ tables


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        s = "%.17g" % float(v)
        if s.lstrip("-").isdigit():
            s += ".0"
        return s
    return str(v)


def parse_value(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def emit_table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def parse_table(text: str):
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    return header, [[parse_value(s) for s in row] for row in reader]


def read_table(path):
    with open(path, newline="") as fh:
        return parse_table(fh.read())


def spec_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def write_output(out, header, rows, meta: dict, stream=None):
    text = emit_table(header, rows)
    if out in (None, "-"):
        (stream or sys.stdout).write(text)
        return
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    with open(out, "w", newline="") as fh:
        fh.write(text)
    sidecar = {
        "version": __version__,
        "spec_hash": spec_hash(meta.get("spec", {})),
        "tolerances": TOLERANCES,
        "desk_scale_substitutions": DESK_SCALE,
    }
    sidecar.update(meta)
    with open(out + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


# ------------------------------------------------------------------- cache


class Cache:
    """Point results stored as JSON files named by a hash of their inputs."""

    def __init__(self, directory: str | None):
        self.directory = directory
        if directory:
            os.makedirs(directory, exist_ok=True)

    @staticmethod
    def key(operation: str, inputs: dict) -> str:
        return spec_hash([__version__, operation, inputs])

    def get(self, operation, inputs):
        if not self.directory:
            return None
        path = os.path.join(self.directory, self.key(operation, inputs) + ".json")
        if not os.path.exists(path):
            return None
        with open(path) as fh:
            return json.load(fh)

    def put(self, operation, inputs, value):
        if not self.directory:
            return
        path = os.path.join(self.directory, self.key(operation, inputs) + ".json")
        tmp = path + f".{os.getpid()}.tmp"
        with open(tmp, "w") as fh:
            json.dump(value, fh)
        os.replace(tmp, path)


# ----------------------------------------------------------------- parsing


def parse_range(text: str, log: bool | None = None) -> np.ndarray:
    """``a`` or ``a:b:n`` (linear) or ``a:b:n:log`` (geometric)."""
    parts = str(text).split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) in (3, 4):
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
            geometric = len(parts) == 4 and parts[3] == "log"
            if len(parts) == 4 and parts[3] not in ("log", "lin"):
                raise ValueError(parts[3])
            if n < 1:
                return np.array([])
            if geometric:
                if a <= 0 or b <= 0:
                    raise ValidationError("log ranges need positive ends")
                return np.geomspace(a, b, n)
            return np.linspace(a, b, n)
    except ValueError as exc:
        raise ValidationError(f"cannot parse range {text!r}") from exc
    raise ValidationError(f"cannot parse range {text!r}")


def parse_int_list(text) -> list[int]:
    out = []
    try:
        for part in str(text).split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part:
                a, b = part.split("-")
                out += list(range(int(a), int(b) + 1))
            else:
                out.append(int(part))
    except ValueError as exc:
        raise ValidationError(f"cannot parse integer list {text!r}") from exc
    return out


def parse_hx(text):
    if text in (None, "adaptive"):
        return "adaptive"
    try:
        v = float(text)
    except ValueError as exc:
        raise ValidationError(f"hx must be a number or 'adaptive', got {text!r}") from exc
    return v


def load_config(path) -> dict:
    cfg = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{n}: expected key = value")
            k, v = (s.strip() for s in line.split("=", 1))
            cfg[k.replace("-", "_")] = v
    return cfg


# ------------------------------------------------------------- sweep specs


@dataclass(frozen=True)
class SweepSpec:
    gamma: tuple
    h: tuple
    T: tuple
    r: tuple
    state: str = "symmetric"
    L: int | None = None
    hx: float | str = "adaptive"
    boundary: str = "periodic"
    tol: float = 1e-10

    def __post_init__(self):
        for name in ("gamma", "h", "T", "r"):
            if len(getattr(self, name)) == 0:
                raise ValidationError(f"{name} range is empty")
        if self.state not in ("symmetric", "broken", "thermal"):
            raise ValidationError(f"unknown state {self.state!r}")
        if self.state == "broken":
            if self.L is not None and self.L > 20:
                raise ValidationError("broken-symmetry runs need L <= 20")
            if any(t != 0 for t in self.T):
                raise ValidationError("broken-symmetry runs are at T = 0")
        if self.state == "thermal" and any(t <= 0 for t in self.T):
            raise ValidationError("thermal runs need T > 0")
        if any(g <= 0 or g > 1 for g in self.gamma):
            raise ValidationError("gamma must lie in (0, 1]")
        if any(t < 0 for t in self.T):
            raise ValidationError("temperatures must be >= 0")
        if any(r < 1 for r in self.r):
            raise ValidationError("distances must be >= 1")
        if self.L is not None:
            if self.L % 2 or self.L < 4:
                raise ValidationError("L must be even and >= 4")
            limit = self.L // 2 if self.boundary == "periodic" else self.L - 1
            if max(self.r) > limit:
                raise ValidationError(f"r must not exceed {limit} for L={self.L}")

    def points(self):
        return [
            {"gamma": float(g), "h": float(h), "T": float(t)}
            for g in self.gamma for h in self.h for t in self.T
        ]

    def canonical(self) -> dict:
        d = asdict(self)
        d["hx"] = str(self.hx)
        return d


SWEEP_HEADER = ["gamma", "h", "T", "L", "r", "state", "I", "C", "Q", "theta", "phi", "error"]


def _point_rows(spec: SweepSpec, point: dict):
    from .ed import EdConfig, ground_state
    from .fermion_core import ModelParams, broken_correlators, correlators
    from .pipeline import ed_triples, triples_from_correlators

    g, h, T = point["gamma"], point["h"], point["T"]
    rs = list(spec.r)
    if spec.state == "broken":
        if spec.L is not None:
            st = ground_state(EdConfig(spec.L, g, h, spec.boundary, spec.hx))
            trips = ed_triples(st, rs)
        else:
            trips = triples_from_correlators(broken_correlators(ModelParams(g, h), max(rs)), rs)
    else:
        cs = correlators(ModelParams(g, h, T, spec.L), max(rs), tol=spec.tol)
        trips = triples_from_correlators(cs, rs)
    return [[t.mutual_info, t.classical, t.discord, t.theta, t.phi] for t in trips]


def _run_point(args):
    spec, point, cache_dir = args
    cache = Cache(cache_dir)
    inputs = {"spec": spec.canonical(), "point": point}
    hit = cache.get("sweep", inputs)
    if hit is not None:
        return hit
    try:
        vals = _point_rows(spec, point)
        result = {"values": vals, "error": None}
    except XYDiscordError as exc:
        result = {"values": None, "error": f"{type(exc).__name__}: {exc}"}
    cache.put("sweep", inputs, result)
    return result


def run_sweep(spec: SweepSpec, workers: int = 1, cache_dir: str | None = None):
    """Evaluate every grid point; returns ``(header, rows)`` in grid order.

    A point that fails numerically yields rows with empty observables and
    the message in the ``error`` column; the sweep carries on.
    """
    points = spec.points()
    tasks = [(spec, p, cache_dir) for p in points]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, tasks, chunksize=1))
    else:
        results = [_run_point(t) for t in tasks]
    rows = []
    for p, res in zip(points, results):
        for k, r in enumerate(spec.r):
            base = [p["gamma"], p["h"], p["T"], spec.L if spec.L is not None else "bulk", r, spec.state]
            if res["error"] is None:
                rows.append(base + list(res["values"][k]) + [None])
            else:
                rows.append(base + [None] * 5 + [res["error"]])
    return SWEEP_HEADER, rows


# ------------------------------------------------------------ subcommands


def _spec_from_args(a, T_default=0.0) -> SweepSpec:
    gammas = parse_range(a.gamma)
    hs = parse_range(a.h_range) if a.h_range else parse_range(a.h)
    Ts = parse_range(a.temp_range) if a.temp_range else parse_range(a.temp if a.temp is not None else T_default)
    Ls = parse_int_list(a.L) if a.L else []
    return SweepSpec(
        tuple(gammas), tuple(hs), tuple(Ts), tuple(parse_int_list(a.r)), a.state,
        Ls[0] if Ls else None, parse_hx(a.hx), a.boundary, float(a.tol),
    )


def cmd_sweep(a):
    spec = _spec_from_args(a)
    header, rows = run_sweep(spec, int(a.workers), a.cache_dir)
    write_output(a.out, header, rows, {"operation": "sweep", "spec": spec.canonical()})


def cmd_discord(a):
    if a.h_range or a.temp_range:
        raise ValidationError("discord evaluates one point; use sweep for ranges")
    cmd_sweep(a)


def cmd_correlators(a):
    from .ed import EdConfig, correlators_ed, ground_state
    from .fermion_core import ModelParams, broken_correlators, correlators

    spec = _spec_from_args(a)
    rmax = max(spec.r)
    rows = []
    for p in spec.points():
        if spec.state == "broken" and spec.L is not None:
            cs = correlators_ed(ground_state(EdConfig(spec.L, p["gamma"], p["h"], spec.boundary, spec.hx)), rmax)
        elif spec.state == "broken":
            cs = broken_correlators(ModelParams(p["gamma"], p["h"]), rmax)
        else:
            cs = correlators(ModelParams(p["gamma"], p["h"], p["T"], spec.L), rmax, tol=spec.tol)
        for r in spec.r:
            i = r - 1
            rows.append([p["gamma"], p["h"], p["T"], r, cs.g_z, cs.g_x, cs.g_xx[i], cs.g_yy[i],
                         cs.g_zz[i], cs.g_xz[i], cs.g_zx[i], cs.provenance])
    header = ["gamma", "h", "T", "r", "g_z", "g_x", "g_xx", "g_yy", "g_zz", "g_xz", "g_zx", "provenance"]
    write_output(a.out, header, rows, {"operation": "correlators", "spec": spec.canonical()})


def cmd_rho(a):
    from .density import make_density, rho_pair
    from .ed import EdConfig, ground_state, pair_sites, reduced_density
    from .fermion_core import ModelParams, broken_correlators, correlators

    spec = _spec_from_args(a)
    if len(spec.points()) != 1:
        raise ValidationError("rho evaluates one point")
    p = spec.points()[0]
    rows = []
    for r in spec.r:
        if spec.state == "broken" and spec.L is not None:
            st = ground_state(EdConfig(spec.L, p["gamma"], p["h"], spec.boundary, spec.hx))
            rho = make_density(reduced_density(st, pair_sites(st.config, r)), "ED")
        elif spec.state == "broken":
            rho = rho_pair(broken_correlators(ModelParams(p["gamma"], p["h"]), r), r)
        else:
            rho = rho_pair(correlators(ModelParams(p["gamma"], p["h"], p["T"], spec.L), r, tol=spec.tol), r)
        m = rho.matrix.real
        for i in range(4):
            rows.append([r, rho.tag, i] + [float(x) for x in m[i]])
    write_output(a.out, ["r", "tag", "row", "c0", "c1", "c2", "c3"], rows,
                 {"operation": "rho", "spec": spec.canonical()})


def cmd_fidelity(a):
    from .fermion_core import ModelParams, fidelity

    Ls = parse_int_list(a.L) if a.L else []
    if not Ls:
        raise ValidationError("fidelity needs --L")
    hs = parse_range(a.h_range) if a.h_range else parse_range(a.h)
    if hs.size == 0:
        raise ValidationError("h range is empty")
    rows = []
    for L in Ls:
        for g in parse_range(a.gamma):
            for h in hs:
                try:
                    rows.append([g, h, L, a.dh, fidelity(ModelParams(g, h, 0.0, L), a.dh), None])
                except NumericalError as exc:
                    rows.append([g, h, L, a.dh, None, f"{type(exc).__name__}: {exc}"])
    write_output(a.out, ["gamma", "h", "L", "dh", "F", "error"], rows,
                 {"operation": "fidelity", "spec": vars_clean(a)})


def cmd_displacement(a):
    from .analysis import displacement

    g = float(parse_range(a.gamma)[0])
    h = float(parse_range(a.h)[0])
    Ts = parse_range(a.temp_range or "0.001:1:13:log")
    radii = parse_int_list(a.r)
    T, curve, table = displacement(g, h, Ts, radii)
    rows = [[t, c] + list(q) for t, c, q in zip(T, curve, table)]
    write_output(a.out, ["T", "dQbar"] + [f"Q{r}" for r in radii], rows,
                 {"operation": "displacement", "spec": vars_clean(a)})


def cmd_scaling(a):
    from . import analysis as an

    g = float(parse_range(a.gamma)[0])
    Ls = parse_int_list(a.L) if a.L else None
    meta = {"operation": f"scaling {a.kind}", "spec": vars_clean(a)}
    if a.kind == "fss":
        hs = parse_range(a.h_range or "0.7:1.1:21")
        ds = an.ed_fss_dataset(g, Ls or [8, 10, 12, 14, 16], hs, a.boundary)
        fits = {om: an.fss_collapse(ds, om, a.nu) for om in sorted({a.omega, 0.0, 1.0})}
        meta["fits"] = {str(om): {"residual": f.residual, "exponents": f.exponents, "h_m": f.shifts}
                        for om, f in fits.items()}
        rows = [[L, x, y] for L, x, y, _ in ds.records()]
        write_output(a.out, ["L", "h", "dQ1_dh"], rows, meta)
    elif a.kind == "factorization":
        hs = parse_range(a.h_range or "0.62:0.82:11")
        ds = an.ed_factorization_dataset(g, Ls or [8, 10, 12, 14], hs, a.boundary)
        res = an.factorization_scaling(ds, a.alpha)
        meta["fit"] = {"alpha": res.exponents["alpha"], "residual": res.residual, "h_f_L": res.shifts}
        rows = []
        ref = dict(zip(ds.reference[0], ds.reference[1]))
        for L, hh, vv in zip(ds.sizes, ds.h, ds.values):
            for x, v in zip(hh, vv):
                rows.append([L, x, v, v - ref[x]])
        write_output(a.out, ["L", "h", "Q1", "dQ1"], rows, meta)
    else:
        Ts = parse_range(a.temp_range or "0.001:0.1:9:log")
        res = an.thermal_scaling(g, 1, Ts)
        lf = res.diagnostics["log_fit"]
        meta["fit"] = {"x": res.exponents["x"], "r2": lf.r2, "x_halfwidth": lf.slope_halfwidth,
                       "residual": res.residual, "residual_x_compare": res.diagnostics["residual_compare"],
                       "power_form_slope": getattr(res.diagnostics["power_fit"], "slope", None)}
        ds = res.diagnostics["dataset"]
        rows = [[T, x, v] for T, x, v, _ in ds.records()]
        rows += [["critical", T, d] for T, d in zip(Ts, res.diagnostics["critical_derivative"])]
        write_output(a.out, ["T", "h", "dQ1_dh"], rows, meta)


def vars_clean(a) -> dict:
    return {k: v for k, v in vars(a).items() if k not in ("func", "config")}


# ----------------------------------------------------------------- recipes


def cmd_reproduce(a):
    from . import analysis as an

    fig = a.figure
    gamma = 0.7
    hf = math.sqrt(1 - gamma * gamma)
    out_dir = a.out or "."
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{fig}.csv")
    meta = {"operation": f"reproduce {fig}", "spec": {"figure": fig, "version": __version__}}
    if fig == "fig1":
        hs = np.round(np.linspace(0.0, 2.0, 41), 12)
        rows = []
        for state in ("symmetric", "broken"):
            spec = SweepSpec((gamma,), tuple(hs), (0.0,), (1, 2, 3, 4, 5), state)
            _, part = run_sweep(spec, int(a.workers), a.cache_dir)
            rows += part
        meta["note"] = "broken-symmetry bulk functions by clustering; points too close to h=1 report an error"
        write_output(path, SWEEP_HEADER, rows, meta)
    elif fig == "fig2":
        hs = np.round(np.arange(0.70, 1.1001, 0.02), 12)
        ds = an.ed_fss_dataset(gamma, [8, 10, 12, 14, 16], hs, a.boundary)
        fits = {om: an.fss_collapse(ds, om, 1.0) for om in (0.472, 0.0, 1.0)}
        meta["fits"] = {str(om): {"residual": f.residual, "drift": f.exponents["drift"], "h_m": f.shifts}
                        for om, f in fits.items()}
        rows = [[L, x, y, L ** -0.472 * y, L * (x - fits[0.472].shifts[L])] for L, x, y, _ in ds.records()]
        write_output(path, ["L", "h", "dQ1_dh", "scaled_y", "scaled_x"], rows, meta)
    elif fig == "fig3":
        hs = np.round(np.linspace(hf - 0.1, hf + 0.1, 11), 12)
        ds = an.ed_factorization_dataset(gamma, [8, 10, 12, 14], hs, a.boundary)
        res = an.factorization_scaling(ds)
        meta["fit"] = {"alpha": res.exponents["alpha"], "residual": res.residual, "h_f_L": res.shifts}
        ref = ds.reference[1]
        rows = []
        for L, hh, vv in zip(ds.sizes, ds.h, ds.values):
            for x, v, q in zip(hh, vv, ref):
                rows.append([L, x, v, v - q, math.exp(-res.exponents["alpha"] * L) * (x - res.shifts[L])])
        write_output(path, ["L", "h", "Q1", "dQ1", "scaled_x"], rows, meta)
    elif fig == "fig4":
        rows = []
        meta["fits"] = {}
        for g in (0.7, 1.0):
            res = an.thermal_scaling(g)
            lf = res.diagnostics["log_fit"]
            meta["fits"][str(g)] = {"x": lf.slope, "k": lf.intercept, "r2": lf.r2,
                                    "x_halfwidth": lf.slope_halfwidth, "collapse_residual": res.residual}
            for T, d in zip(res.diagnostics["T"], res.diagnostics["critical_derivative"]):
                rows.append([g, T, d])
        write_output(path, ["gamma", "T", "dQ1_dh_at_hc"], rows, meta)
    elif fig == "fig5a":
        hs = np.round(np.linspace(0.5, 1.5, 11), 12)
        Ts = np.round(np.linspace(0.05, 0.5, 10), 12)
        m = an.qc_ratio_map(gamma, hs, Ts)
        meta["critical_max_dT_ratio"] = m.critical_max
        rows = [[h, T, m.ratio[i, j], m.d_ratio_dT[i, j]] for i, h in enumerate(hs) for j, T in enumerate(Ts)]
        write_output(path, ["h", "T", "Q1_over_C1", "dT_ratio"], rows, meta)
    elif fig == "fig5b":
        Ts = np.geomspace(1e-3, 1.0, 13)
        rows = []
        for h in (hf, 1.0):
            T, curve, table = an.displacement(gamma, h, Ts)
            rows += [[h, t, c] + list(q) for t, c, q in zip(T, curve, table)]
        meta["dQbar_T0_at_hf"] = rows[0][2]
        write_output(path, ["h", "T", "dQbar", "Q1", "Q2", "Q3", "Q4", "Q5"], rows, meta)
    print(path)


# ------------------------------------------------------------------ parser


def _common(p):
    p.add_argument("--gamma", default="0.7", help="anisotropy, a value or a:b:n range")
    p.add_argument("--h", default="0.5", help="transverse field")
    p.add_argument("--h-range", dest="h_range", default=None, help="a:b:n field grid")
    p.add_argument("--temp", default=None, help="temperature (default 0)")
    p.add_argument("--temp-range", dest="temp_range", default=None, help="a:b:n[:log] temperature grid")
    p.add_argument("--L", default=None, help="chain length(s); omit for the thermodynamic limit")
    p.add_argument("--r", default="1", help="distances, e.g. 1,2 or 1-5")
    p.add_argument("--hx", default="adaptive", help="longitudinal field for ED broken states")
    p.add_argument("--state", choices=("symmetric", "broken", "thermal"), default="symmetric")
    p.add_argument("--boundary", choices=("periodic", "open"), default="periodic")
    p.add_argument("--out", default=None, help="output CSV path (stdout if omitted)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--cache-dir", dest="cache_dir", default=None)
    p.add_argument("--tol", type=float, default=1e-10, help="quadrature tolerance")
    p.add_argument("--config", default=None, help="key = value file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xydiscord", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, hlp in (
        ("correlators", cmd_correlators, "spin correlators at one or more points"),
        ("rho", cmd_rho, "two-site density matrix"),
        ("discord", cmd_discord, "I, C and Q at one point"),
        ("sweep", cmd_sweep, "I, C and Q over parameter grids"),
        ("fidelity", cmd_fidelity, "ground-state fidelity on rings"),
        ("displacement", cmd_displacement, "average discord displacement versus T"),
    ):
        p = sub.add_parser(name, help=hlp)
        _common(p)
        if name == "fidelity":
            p.add_argument("--dh", type=float, default=1e-3)
        if name == "displacement":
            p.set_defaults(r="1-5")
        p.set_defaults(func=func)
    p = sub.add_parser("scaling", help="scaling collapses")
    p.add_argument("kind", choices=("fss", "factorization", "thermal"))
    _common(p)
    p.add_argument("--omega", type=float, default=0.472)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=None)
    p.set_defaults(func=cmd_scaling)
    p = sub.add_parser("reproduce", help="figure data recipes")
    p.add_argument("figure", choices=("fig1", "fig2", "fig3", "fig4", "fig5a", "fig5b"))
    _common(p)
    p.set_defaults(func=cmd_reproduce)
    return parser


def _apply_config(parser, argv):
    """Re-parse with config values as defaults so explicit flags win."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    cfg = load_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    unknown = set(cfg) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    typed = {}
    for action in sub._actions:
        if action.dest in cfg:
            v = cfg[action.dest]
            typed[action.dest] = action.type(v) if action.type else v
    sub.set_defaults(**typed)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
