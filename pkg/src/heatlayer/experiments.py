"""Experiment configuration, presets and the sweep runner behind the CLI.

Configs are INI files::

    [run]
    methods = asymptotic, gauss-jacobi(16), hybrid(16)
    eps = 1e-12

    [sweep]                 # or: dt = 0.01
    dt_min = 1e-6
    dt_max = 1e-1
    per_decade = 5

    [case parabola-a20]
    geometry = parabola
    geometry.a = 20
    density = constant
    target = 0, 0
    layer = single          # optional, default single
    t_final =               # optional, default dt
    delta = 1e-10           # optional tail length for graded/hybrid/dyadic

Rows are ordered by case (file order), method (first appearance), order
and dt descending.
"""

from concurrent.futures import ProcessPoolExecutor
import configparser
import csv
from dataclasses import dataclass, field
import io
import math
import time
import warnings

import numpy as np

from . import geometry as geo
from .oracle import OracleDisagreement, reference_model_integral, reference_potential
from .potentials import Method, PotentialRequest, ResolutionWarning, evaluate
from . import quadrature as quad


class ConfigError(ValueError):
    """Invalid experiment configuration (message carries the line number)."""


COLUMNS = ("case", "method", "order", "dt", "value", "oracle", "abs_error",
           "rel_error", "flag")

GEOMETRIES = {
    "segment": (geo.Segment, {"a": float, "b": float, "y0": float, "interior": int}),
    "parabola": (geo.Parabola, {"a": float, "half_range": float, "interior": int}),
    "ellipse": (geo.MovingEllipse, {"semi_x": float, "semi_y": float, "speed": float,
                                    "cx": float, "cy": float, "interior": int}),
    "circle": (geo.Circle, {"radius": float, "rate": float, "cx": float, "cy": float,
                            "interior": int}),
}

DENSITIES = {
    "constant": (geo.ConstantDensity, {"value": float}),
    "cosine": (geo.CosineDensity, {"k": float}),
    "bump": (geo.GaussianBumpDensity, {"d": float}),
    "ellipse-mu": (geo.EllipseDensity, {}),
}


@dataclass(frozen=True)
class CaseSpec:
    name: str
    geometry: str
    geometry_params: tuple
    density: str
    density_params: tuple
    target: tuple
    layer: str = "single"
    kind: str = "local"
    t_final: float = None
    delta: float = None

    def build_curve(self):
        cls, _ = GEOMETRIES[self.geometry]
        return cls(**dict(self.geometry_params))

    def build_density(self):
        cls, _ = DENSITIES[self.density]
        return cls(**dict(self.density_params))


@dataclass(frozen=True)
class ExperimentConfig:
    cases: tuple
    methods: tuple
    dts: tuple
    eps: float = 1e-12
    oracle_tol: float = 1e-12
    spatial_m: int = 16


@dataclass
class ConvergenceRecord:
    case: str
    method: str
    order: int
    dt: float
    value: float
    oracle: float
    abs_error: float
    rel_error: float
    flag: str = ""
    wall_time: float = None
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# parsing


def split_methods(text):
    """Split on commas that are not inside parentheses."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur).strip())
    return [m for m in out if m]


def dt_grid(dt_min, dt_max, per_decade):
    """Geometric grid, descending, including both ends."""
    if not 0 < dt_min <= dt_max:
        raise ValueError("need 0 < dt_min <= dt_max")
    if per_decade < 1:
        raise ValueError("per_decade must be >= 1")
    decades = math.log10(dt_max / dt_min)
    count = int(round(decades * per_decade)) + 1
    if count == 1:
        return (float(dt_max),)
    exps = np.linspace(math.log10(dt_max), math.log10(dt_min), count)
    return tuple(float(10.0 ** e) for e in exps)


class _Lines:
    """Map (section, key) to line numbers of the source text."""

    def __init__(self, text):
        self.where = {}
        section = None
        for no, line in enumerate(text.splitlines(), 1):
            s = line.strip()
            if s.startswith("[") and s.endswith("]"):
                section = s[1:-1].strip()
                self.where[(section, None)] = no
            elif section and "=" in s and not s.startswith(("#", ";")):
                key = s.split("=", 1)[0].strip().lower()
                self.where[(section, key)] = no

    def at(self, section, key=None):
        no = self.where.get((section, key)) or self.where.get((section, None))
        return f"line {no}" if no else "config"


def _convert(lines, section, key, raw, conv):
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{lines.at(section, key)}: [{section}] {key} = {raw!r}: {exc}") from None


def parse_config(text, overrides=()):
    """Parse INI text into an ExperimentConfig.

    ``overrides`` are ``section.key=value`` strings applied on top.
    """
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from None
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.rsplit(".", 1) if lhs.count(".") >= 1 else (lhs, "")
        # allow "case name.geometry.a=..." style keys
        for sec in cp.sections():
            if lhs.startswith(sec + "."):
                section, key = sec, lhs[len(sec) + 1:]
                break
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key.strip(), value.strip())
    lines = _Lines(text)

    if not cp.has_section("run"):
        raise ConfigError("missing [run] section")
    run = cp["run"]
    methods_raw = run.get("methods", "").strip()
    methods = split_methods(methods_raw)
    if not methods:
        raise ConfigError(f"{lines.at('run', 'methods')}: [run] methods is empty")
    m = _convert(lines, "run", "spatial_m", run.get("spatial_m", "16"), int)
    parsed = []
    for meth in methods:
        parsed.append(_convert(lines, "run", "methods", meth, lambda s: Method.parse(s, m=m)))
    eps = _convert(lines, "run", "eps", run.get("eps", "1e-12"), float)
    if not 1e-14 <= eps < 1e-1:
        raise ConfigError(f"{lines.at('run', 'eps')}: eps must lie in [1e-14, 1e-1)")
    tol = _convert(lines, "run", "oracle_tol", run.get("oracle_tol", "1e-12"), float)

    if not cp.has_section("sweep"):
        raise ConfigError("missing [sweep] section")
    sw = cp["sweep"]
    if "dt" in sw:
        dts = tuple(_convert(lines, "sweep", "dt", v, float)
                    for v in sw["dt"].split(",") if v.strip())
        if any(not d > 0 for d in dts):
            raise ConfigError(f"{lines.at('sweep', 'dt')}: dt must be positive")
        dts = tuple(sorted(dts, reverse=True))
    else:
        try:
            lo = _convert(lines, "sweep", "dt_min", sw["dt_min"], float)
            hi = _convert(lines, "sweep", "dt_max", sw["dt_max"], float)
        except KeyError:
            raise ConfigError(f"{lines.at('sweep')}: [sweep] needs dt or dt_min/dt_max") from None
        per = _convert(lines, "sweep", "per_decade", sw.get("per_decade", "5"), int)
        dts = _convert(lines, "sweep", "dt_min", (lo, hi, per), lambda a: dt_grid(*a))

    cases = []
    for sec in cp.sections():
        if not sec.startswith("case"):
            continue
        name = sec[4:].strip() or f"case{len(cases) + 1}"
        cases.append(_parse_case(cp[sec], sec, name, lines))
    if not cases:
        raise ConfigError("no [case ...] sections")
    return ExperimentConfig(cases=tuple(cases), methods=tuple(parsed), dts=dts, eps=eps,
                            oracle_tol=tol, spatial_m=m)


def _params(sec, secname, prefix, schema, lines):
    out = []
    for key in sec:
        if key.startswith(prefix + "."):
            pname = key[len(prefix) + 1:]
            if pname not in schema:
                raise ConfigError(f"{lines.at(secname, key)}: unknown {prefix} parameter {pname!r}")
            out.append((pname, _convert(lines, secname, key, sec[key], schema[pname])))
    return tuple(sorted(out))


def _parse_case(sec, secname, name, lines):
    g = sec.get("geometry", "").strip()
    if g not in GEOMETRIES:
        raise ConfigError(f"{lines.at(secname, 'geometry')}: unknown geometry {g!r}")
    d = sec.get("density", "").strip()
    if d not in DENSITIES:
        raise ConfigError(f"{lines.at(secname, 'density')}: unknown density {d!r}")
    gp = _params(sec, secname, "geometry", GEOMETRIES[g][1], lines)
    dp = _params(sec, secname, "density", DENSITIES[d][1], lines)

    def point(s):
        vals = [float(v) for v in s.split(",")]
        if len(vals) != 2:
            raise ValueError("target needs two coordinates")
        return tuple(vals)

    target = _convert(lines, secname, "target", sec.get("target", "0, 0"), point)
    layer = sec.get("layer", "single").strip()
    if layer not in ("single", "double"):
        raise ConfigError(f"{lines.at(secname, 'layer')}: layer must be single or double")
    kind = sec.get("kind", "local").strip()
    if kind not in ("local", "bridge"):
        raise ConfigError(f"{lines.at(secname, 'kind')}: kind must be local or bridge")
    tf = sec.get("t_final", "").strip()
    tf = _convert(lines, secname, "t_final", tf, float) if tf else None
    delta = sec.get("delta", "").strip()
    delta = _convert(lines, secname, "delta", delta, float) if delta else None
    spec = CaseSpec(name=name, geometry=g, geometry_params=gp, density=d,
                    density_params=dp, target=target, layer=layer, kind=kind,
                    t_final=tf, delta=delta)
    try:
        spec.build_curve()
        spec.build_density()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{lines.at(secname)}: [{secname}] {exc}") from None
    return spec


# ---------------------------------------------------------------------------
# presets

_FIG_SWEEP = """
[sweep]
dt_min = 1e-6
dt_max = 1e-1
per_decade = 5
"""

PRESETS = {
    "fig1": """
[run]
methods = asymptotic, gauss-jacobi(4), gauss-jacobi(8), gauss-jacobi(16), hybrid(4), hybrid(8), hybrid(16)
eps = 1e-12
""" + _FIG_SWEEP + """
[case parabola-a2]
geometry = parabola
geometry.a = 2
density = constant
target = 0, 0
delta = 1e-9

[case parabola-a20]
geometry = parabola
geometry.a = 20
density = constant
target = 0, 0
delta = 1e-10
""",
    "fig2": """
[run]
methods = asymptotic, gauss-jacobi(4), gauss-jacobi(8), gauss-jacobi(16), hybrid(4), hybrid(8), hybrid(16)
eps = 1e-12
""" + _FIG_SWEEP + """
[case segment-k10]
geometry = segment
density = cosine
density.k = 10
target = 0, 0
delta = 1e-11

[case segment-k100]
geometry = segment
density = cosine
density.k = 100
target = 0, 0
delta = 1e-12
""",
    "fig3": """
[run]
methods = asymptotic, gauss-jacobi(4), gauss-jacobi(8), gauss-jacobi(16), hybrid(4), hybrid(8), hybrid(16)
eps = 1e-12
""" + _FIG_SWEEP + """
[case ellipse]
geometry = ellipse
density = ellipse-mu
target = 21.5, 0
layer = double
t_final = 1.0
delta = 1e-11
""",
    "stiffness": """
[run]
methods = product-integration(4)
eps = 1e-12

[sweep]
dt = 6.25e-06, 1.25e-05, 2.5e-05, 5e-05, 0.0001, 0.0002, 0.0004, 0.0008, 0.0016

[case bump-d1e-4]
geometry = segment
geometry.a = -1
geometry.b = 1
density = bump
density.d = 1e-4
target = 0, 0
""",
}

# fixed-dt studies of the time rules on the model integral int t^(-1/2)
MODEL_PRESETS = {
    "model-graded": ("graded", tuple(range(2, 17))),
    "model-dyadic": ("adaptive-dyadic", tuple(range(2, 13))),
}


def preset_config(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    return parse_config(PRESETS[name])


def model_integral_records(kind, orders, dt=1e-2, delta=1e-9):
    """Error of a time rule on int_delta^dt t^(-1/2) dt for each order n."""
    exact = reference_model_integral(delta, dt)
    rows = []
    for n in orders:
        rule = quad.graded_rule(n, delta, dt) if kind == "graded" else quad.dyadic_rule(n, delta, dt)
        value = math.fsum(rule.weights / np.sqrt(rule.lags))
        err = abs(value - exact)
        rows.append(ConvergenceRecord(case="model-integral", method=f"{kind}({n},{delta!r})",
                                      order=n, dt=dt, value=value, oracle=exact,
                                      abs_error=err, rel_error=err / exact,
                                      flag=f"nodes={len(rule)}"))
    return rows


# ---------------------------------------------------------------------------
# running


def _request(case, method, dt, eps):
    if case.delta is not None and method.delta is None and method.kind in (
            "graded", "hybrid", "adaptive-dyadic"):
        method = Method(method.kind, n=method.n, delta=case.delta, m=method.m)
    return PotentialRequest(case.layer, case.target, dt, method, case.build_curve(),
                            case.build_density(), eps=eps, t_final=case.t_final,
                            kind=case.kind)


def _run_oracle(task):
    case, dt, eps, tol = task
    req = _request(case, Method("hybrid"), dt, eps)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ResolutionWarning)
        try:
            res = reference_potential(req, tol=tol)
            value, flag = res.value, ""
        except OracleDisagreement as exc:
            value, flag = math.nan, f"oracle-disagreement({exc.route_a!r},{exc.route_b!r})"
    resolution = any(issubclass(w.category, ResolutionWarning) for w in caught)
    return value, flag, resolution


def _run_method(task):
    case, method, dt, eps = task
    req = _request(case, method, dt, eps)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ResolutionWarning)
        t0 = time.perf_counter()
        value = evaluate(req)
        wall = time.perf_counter() - t0
    resolution = any(issubclass(w.category, ResolutionWarning) for w in caught)
    return value, wall, resolution


def _map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


def run_sweep(config, jobs=1, with_oracle=True, flag_rel=None):
    """Evaluate every (case, method, dt); returns ordered ConvergenceRecords.

    ``flag_rel`` marks rows whose relative error reaches that level.
    """
    oracle_tasks = [(c, dt, config.eps, config.oracle_tol)
                    for c in config.cases for dt in config.dts]
    oracles = {}
    if with_oracle:
        for (c, dt, _, _), res in zip(oracle_tasks, _map(_run_oracle, oracle_tasks, jobs)):
            oracles[(c.name, dt)] = res
    method_order = {}
    for m in config.methods:
        method_order.setdefault(m.kind, len(method_order))
    tasks = [(c, m, dt, config.eps) for c in config.cases for m in config.methods
             for dt in config.dts]
    results = _map(_run_method, tasks, jobs)
    case_order = {c.name: i for i, c in enumerate(config.cases)}
    rows = []
    for (c, m, dt, _), (value, wall, res_warn) in zip(tasks, results):
        flags = []
        oval = math.nan
        if with_oracle:
            oval, oflag, ores = oracles[(c.name, dt)]
            if oflag:
                flags.append(oflag)
            if ores:
                flags.append("oracle-resolution")
        if res_warn:
            flags.append("resolution")
        err = abs(value - oval)
        rel = err / abs(oval) if oval not in (0.0,) and not math.isnan(oval) else err
        if flag_rel is not None and not math.isnan(rel) and rel >= flag_rel:
            flags.append(f"rel>={flag_rel:g}")
        label = m.label
        if c.delta is not None and m.delta is None and m.kind in ("graded", "hybrid", "adaptive-dyadic"):
            label = Method(m.kind, n=m.n, delta=c.delta).label
        rows.append(ConvergenceRecord(case=c.name, method=label, order=m.n, dt=dt,
                                      value=value, oracle=oval, abs_error=err,
                                      rel_error=rel, flag=";".join(flags), wall_time=wall,
                                      meta={"kind_rank": method_order[m.kind],
                                            "case_rank": case_order[c.name]}))
    rows.sort(key=lambda r: (r.meta["case_rank"], r.meta["kind_rank"], r.order, -r.dt))
    return rows


def _fmt(x):
    return "nan" if isinstance(x, float) and math.isnan(x) else f"{x:.16e}"


def records_to_csv(rows, timing=False):
    """CSV text with a fixed header; floats in 17-digit scientific notation."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = list(COLUMNS) + (["wall_time"] if timing else [])
    w.writerow(cols)
    for r in rows:
        line = [r.case, r.method, str(r.order), _fmt(r.dt), _fmt(r.value), _fmt(r.oracle),
                _fmt(r.abs_error), _fmt(r.rel_error), r.flag]
        if timing:
            line.append(_fmt(r.wall_time if r.wall_time is not None else math.nan))
        w.writerow(line)
    return buf.getvalue()
