"""Configuration-driven experiment scenarios with CSV output.

A scenario reproduces one panel family: single-pulse dynamics overlays,
error-scaling sweeps against pulse duration, or stroboscopic multi-pulse
comparisons.  Configs are flat ``key = value`` text files (see README);
results are written as comma-separated tables with a ``#``-prefixed
metadata preamble carrying the full configuration, the code version, and
any fitted slopes.  Runs are deterministic: identical configs produce
byte-identical CSV files regardless of the worker count.

Durations in ``T_values`` are the dimensionless products ``T * gamma``
used in all parameter sets; the pulse duration in time units is obtained
by dividing by ``gamma``.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import linalg, model as model_mod, observables
from .adiabatic import (
    apply_first_order_map,
    fractional_pulse_state,
    multi_pulse_map,
)
from .errors import ConvergenceError, DomainError, ValidationError
from .evolution import evolve_exact, evolve_multi_pulse_exact
from .model import ClassicalMixture, SpinChainModel, config_label, mixture_to_density
from .pulse import make_pulse

SCENARIO_NAMES = (
    "pulse_dynamics",
    "scaling_full",
    "scaling_mid",
    "scaling_reduced",
    "multi_pulse_populations",
    "multi_pulse_density",
    "multi_pulse_coherence",
)

# Error-scaling sweeps read signals far below the default integrator
# tolerance, so they tighten it unless the config overrides.
SCALING_RTOL = 1e-12
SCALING_ATOL = 1e-14
DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    n_sites: int = 2
    n_list: tuple = ()
    delta: float = 0.0
    v0: float = 0.0
    v0_list: tuple = ()
    alpha: float = 3.0
    gamma: float = 1.0
    pulse_shape: str = "sin2"
    pulse_amplitude: float | None = None
    T_values: tuple = ()
    n_pulses: int = 10
    s_grid: tuple = ()
    initial: ClassicalMixture | None = None
    output_path: str = "results"
    worker_count: int = 1
    rtol: float | None = None
    atol: float | None = None

    def effective_n_list(self):
        return self.n_list if self.n_list else (self.n_sites,)

    def effective_v0_list(self):
        return self.v0_list if self.v0_list else (self.v0,)

    def effective_s_grid(self):
        if self.s_grid:
            return self.s_grid
        return tuple(np.linspace(0.0, 1.0, 101))

    def tolerances(self, scaling=False):
        rtol = self.rtol if self.rtol is not None else (
            SCALING_RTOL if scaling else DEFAULT_RTOL
        )
        atol = self.atol if self.atol is not None else (
            SCALING_ATOL if scaling else DEFAULT_ATOL
        )
        return rtol, atol


def validate_config(cfg):
    """Raise ``ValidationError`` on any inconsistency; return ``cfg``."""
    if cfg.scenario not in SCENARIO_NAMES:
        raise ValidationError(
            f"unknown scenario {cfg.scenario!r}; choose from {SCENARIO_NAMES}"
        )
    if not cfg.T_values:
        raise ValidationError("T_values must not be empty")
    if any(t <= 0 for t in cfg.T_values):
        raise ValidationError("T_values must be positive")
    if any(b <= a for a, b in zip(cfg.T_values, cfg.T_values[1:])):
        raise ValidationError("T_values must increase strictly")
    if cfg.worker_count < 1:
        raise ValidationError("worker_count must be at least 1")
    if cfg.n_pulses < 0:
        raise ValidationError("n_pulses must be nonnegative")

    scaling = cfg.scenario.startswith("scaling")
    if scaling:
        if len(cfg.T_values) < 3:
            raise ValidationError("scaling scenarios need at least 3 T_values")
        if cfg.initial is not None:
            raise ValidationError(
                "scaling scenarios fix the all-zeros initial state; "
                "remove the initial key"
            )
        for n in cfg.effective_n_list():
            SpinChainModel(n, cfg.delta, cfg.v0, cfg.alpha, cfg.gamma)
    else:
        SpinChainModel(cfg.n_sites, cfg.delta, cfg.v0, cfg.alpha, cfg.gamma)
        if cfg.initial is not None and cfg.initial.n_sites != cfg.n_sites:
            raise ValidationError("initial mixture length does not match n_sites")

    if cfg.scenario == "pulse_dynamics":
        grid = cfg.effective_s_grid()
        if any(s < 0.0 or s > 1.0 for s in grid):
            raise ValidationError("s_grid entries must lie in [0, 1]")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationError("s_grid must increase strictly")
        if len(cfg.T_values) != 1:
            raise ValidationError("pulse_dynamics uses exactly one T value")
    if cfg.scenario in ("multi_pulse_density", "multi_pulse_coherence"):
        if len(cfg.T_values) != 1:
            raise ValidationError(f"{cfg.scenario} uses exactly one T value")
        if cfg.scenario == "multi_pulse_coherence" and cfg.n_pulses < 1:
            raise ValidationError("multi_pulse_coherence needs n_pulses >= 1")
    # make_pulse validates the shape name and parameters
    make_pulse(cfg.pulse_shape, 1.0, cfg.pulse_amplitude)
    return cfg


@dataclass(frozen=True)
class ResultTable:
    """A rectangular numeric table with provenance metadata."""

    columns: list
    rows: np.ndarray
    metadata: dict

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != len(self.columns):
            raise ValidationError(
                f"rows shape {rows.shape} does not match {len(self.columns)} columns"
            )
        if not np.all(np.isfinite(rows)):
            raise ValidationError("result table contains non-finite entries")
        object.__setattr__(self, "rows", rows)

    def column(self, name):
        return self.rows[:, self.columns.index(name)]

    def to_csv(self, path):
        lines = [f"# {k} = {v}" for k, v in self.metadata.items()]
        lines.append(",".join(self.columns))
        for row in self.rows:
            lines.append(",".join("%.12e" % x for x in row))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def fit_power_law(xs, ys):
    """Least-squares power-law fit in log space.

    Returns ``(slope, intercept, residual)`` where the intercept is the
    natural-log prefactor and the residual is the RMS of log residuals.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1 or len(xs) < 3:
        raise DomainError("power-law fit needs matching 1-d data with >= 3 points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise DomainError("power-law fit needs strictly positive data")
    lx = np.log(xs)
    ly = np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))


def _base_metadata(cfg):
    meta = {
        "generator": f"spinpulse {__version__}",
        "scenario": cfg.scenario,
        "n_sites": cfg.n_sites,
        "delta": repr(cfg.delta),
        "v0": repr(cfg.v0),
        "alpha": repr(cfg.alpha),
        "gamma": repr(cfg.gamma),
        "pulse_shape": cfg.pulse_shape,
        "pulse_amplitude": (
            "default" if cfg.pulse_amplitude is None else repr(cfg.pulse_amplitude)
        ),
        "T_values": ",".join(repr(t) for t in cfg.T_values),
        "n_pulses": cfg.n_pulses,
        "worker_count": cfg.worker_count,
        "entropy_log_base": "e",
    }
    if cfg.n_list:
        meta["n_list"] = ",".join(str(n) for n in cfg.n_list)
    if cfg.v0_list:
        meta["v0_list"] = ",".join(repr(v) for v in cfg.v0_list)
    if cfg.initial is not None:
        meta["initial"] = ",".join(
            f"{config_label(p)}:{w!r}" for p, w in sorted(cfg.initial.weights.items())
        )
    return meta


def _initial_density(n_sites, mixture=None):
    if mixture is None:
        return mixture_to_density(ClassicalMixture({(0,) * n_sites: 1.0}))
    return mixture_to_density(mixture)


def _initial_items(cfg):
    if cfg.initial is None:
        return None
    return tuple(sorted(cfg.initial.weights.items()))


def _mixture_from_items(items, n_sites):
    if items is None:
        return None
    return ClassicalMixture(dict(items))


def _map_tasks(fn, tasks, workers):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


# ---------------------------------------------------------------------------
# scenario: pulse_dynamics


def _run_pulse_dynamics(cfg):
    n = cfg.n_sites
    model = SpinChainModel(n, cfg.delta, cfg.v0, cfg.alpha, cfg.gamma)
    t_gamma = cfg.T_values[0]
    pulse = make_pulse(cfg.pulse_shape, t_gamma / cfg.gamma, cfg.pulse_amplitude)
    rho0 = _initial_density(n, cfg.initial)
    grid = list(cfg.effective_s_grid())
    rtol, atol = cfg.tolerances()

    traj = evolve_exact(model, pulse, rho0, grid, rtol=rtol, atol=atol)
    labels = [config_label(p) for p in model_mod.all_configs(n)]
    columns = (
        ["s"]
        + [f"p_{lbl}_exact" for lbl in labels]
        + ["cx_exact", "cy_exact"]
        + [f"p_{lbl}_map" for lbl in labels]
        + ["cx_map", "cy_map"]
    )
    rows = []
    for s, state in zip(traj.times, traj.states):
        mapped = apply_first_order_map(
            model, pulse, float(s), rho0, pulse.duration, mode="exponential"
        )
        row = [float(s)]
        for source in (state, mapped):
            pops = observables.populations(source)
            row.extend(pops[p] for p in model_mod.all_configs(n))
            row.append(observables.coherence_expect(source, "x"))
            row.append(observables.coherence_expect(source, "y"))
        rows.append(row)
    meta = _base_metadata(cfg)
    meta["rtol"] = repr(rtol)
    meta["atol"] = repr(atol)
    return ResultTable(columns, np.array(rows), meta)


# ---------------------------------------------------------------------------
# scenarios: scaling_full / scaling_mid / scaling_reduced


def _scaling_point(task):
    (
        n,
        t_gamma,
        s_star,
        delta,
        v0,
        alpha,
        gamma,
        shape,
        amplitude,
        reduced,
        rtol,
        atol,
    ) = task
    model = SpinChainModel(n, delta, v0, alpha, gamma)
    pulse = make_pulse(shape, t_gamma / gamma, amplitude)
    rho0 = _initial_density(n)
    try:
        exact = evolve_exact(
            model, pulse, rho0, [s_star], rtol=rtol, atol=atol
        ).state_at(s_star)
    except ConvergenceError as err:
        return ("failed", f"N={n} T_gamma={t_gamma}: {err}")
    mapped = apply_first_order_map(
        model, pulse, s_star, rho0, pulse.duration, mode="exponential"
    )
    if reduced:
        exact = linalg.partial_trace(exact, 1, n)
        mapped = linalg.partial_trace(mapped, 1, n)
    return ("ok", observables.trace_distance(exact, mapped))


def _run_scaling(cfg, s_star, reduced):
    n_list = cfg.effective_n_list()
    rtol, atol = cfg.tolerances(scaling=True)
    tasks = [
        (
            n,
            t,
            s_star,
            cfg.delta,
            cfg.v0,
            cfg.alpha,
            cfg.gamma,
            cfg.pulse_shape,
            cfg.pulse_amplitude,
            reduced,
            rtol,
            atol,
        )
        for n in n_list
        for t in cfg.T_values
    ]
    results = _map_tasks(_scaling_point, tasks, cfg.worker_count)

    meta = _base_metadata(cfg)
    meta["s_star"] = repr(s_star)
    meta["rtol"] = repr(rtol)
    meta["atol"] = repr(atol)
    prefix = "D_site1_N" if reduced else "D_N"
    columns = ["T_gamma"] + [f"{prefix}{n}" for n in n_list]

    distances = {}
    failures = []
    for task, (status, payload) in zip(tasks, results):
        if status == "ok":
            distances[(task[0], task[1])] = payload
        else:
            failures.append(payload)
    rows = []
    for t in cfg.T_values:
        if all((n, t) in distances for n in n_list):
            rows.append([t] + [distances[(n, t)] for n in n_list])
    for i, message in enumerate(failures):
        meta[f"failed_point_{i}"] = message

    for n in n_list:
        ts = [t for t in cfg.T_values if (n, t) in distances]
        ds = [distances[(n, t)] for t in ts]
        if len(ts) >= 3:
            slope, intercept, residual = fit_power_law(ts, ds)
            meta[f"fit_slope_N{n}"] = repr(slope)
            meta[f"fit_intercept_N{n}"] = repr(intercept)
            meta[f"fit_residual_N{n}"] = repr(residual)
    return ResultTable(columns, np.array(rows), meta)


# ---------------------------------------------------------------------------
# scenario: multi_pulse_populations


def _population_block(task):
    (
        t_gamma,
        n,
        delta,
        v0,
        alpha,
        gamma,
        shape,
        amplitude,
        n_pulses,
        rtol,
        atol,
        initial_items,
    ) = task
    model = SpinChainModel(n, delta, v0, alpha, gamma)
    pulse = make_pulse(shape, t_gamma / gamma, amplitude)
    rho0 = _initial_density(n, _mixture_from_items(initial_items, n))
    traj = evolve_multi_pulse_exact(
        model, pulse, rho0, n_pulses, (1.0,), rtol=rtol, atol=atol
    )
    configs = model_mod.all_configs(n)
    rows = []
    for m in range(n_pulses + 1):
        exact_state = traj.state_at(float(m))
        mapped = multi_pulse_map(model, pulse, rho0, m, pulse.duration)
        pops_exact = observables.populations(exact_state)
        pops_map = observables.populations(mapped)
        rows.append(
            [t_gamma, m]
            + [pops_exact[p] for p in configs]
            + [pops_map[p] for p in configs]
        )
    return rows


def _run_multi_pulse_populations(cfg):
    n = cfg.n_sites
    rtol, atol = cfg.tolerances()
    tasks = [
        (
            t,
            n,
            cfg.delta,
            cfg.v0,
            cfg.alpha,
            cfg.gamma,
            cfg.pulse_shape,
            cfg.pulse_amplitude,
            cfg.n_pulses,
            rtol,
            atol,
            _initial_items(cfg),
        )
        for t in cfg.T_values
    ]
    blocks = _map_tasks(_population_block, tasks, cfg.worker_count)
    labels = [config_label(p) for p in model_mod.all_configs(n)]
    columns = (
        ["T_gamma", "m"]
        + [f"p_{lbl}_exact" for lbl in labels]
        + [f"p_{lbl}_map" for lbl in labels]
    )
    rows = [row for block in blocks for row in block]
    meta = _base_metadata(cfg)
    meta["rtol"] = repr(rtol)
    meta["atol"] = repr(atol)
    return ResultTable(columns, np.array(rows), meta)


# ---------------------------------------------------------------------------
# scenarios: multi_pulse_density / multi_pulse_coherence


def _density_block(task):
    (
        v0,
        t_gamma,
        n,
        delta,
        alpha,
        gamma,
        shape,
        amplitude,
        n_pulses,
        rtol,
        atol,
        initial_items,
    ) = task
    model = SpinChainModel(n, delta, v0, alpha, gamma)
    pulse = make_pulse(shape, t_gamma / gamma, amplitude)
    rho0 = _initial_density(n, _mixture_from_items(initial_items, n))
    traj = evolve_multi_pulse_exact(
        model, pulse, rho0, n_pulses, (1.0,), rtol=rtol, atol=atol
    )
    records = []
    for m in range(n_pulses + 1):
        exact_state = traj.state_at(float(m))
        mapped = multi_pulse_map(model, pulse, rho0, m, pulse.duration)
        records.append(
            [
                v0,
                m,
                observables.excitation_density(exact_state),
                observables.excitation_density(mapped),
            ]
        )
    return records


def _coherence_block(task):
    (
        v0,
        t_gamma,
        n,
        delta,
        alpha,
        gamma,
        shape,
        amplitude,
        n_pulses,
        rtol,
        atol,
        initial_items,
    ) = task
    model = SpinChainModel(n, delta, v0, alpha, gamma)
    pulse = make_pulse(shape, t_gamma / gamma, amplitude)
    rho0 = _initial_density(n, _mixture_from_items(initial_items, n))
    traj = evolve_multi_pulse_exact(
        model, pulse, rho0, n_pulses, (0.5, 1.0), rtol=rtol, atol=atol
    )
    records = []
    for m in range(n_pulses):
        exact_state = traj.state_at(m + 0.5)
        approx = fractional_pulse_state(model, pulse, rho0, m, 0.5, pulse.duration)
        records.append(
            [
                v0,
                m,
                observables.entropy_of_coherence(exact_state),
                observables.entropy_of_coherence(approx),
            ]
        )
    return records


def _run_multi_pulse_sweep(cfg, block_fn, value_columns):
    rtol, atol = cfg.tolerances()
    tasks = [
        (
            v0,
            cfg.T_values[0],
            cfg.n_sites,
            cfg.delta,
            cfg.alpha,
            cfg.gamma,
            cfg.pulse_shape,
            cfg.pulse_amplitude,
            cfg.n_pulses,
            rtol,
            atol,
            _initial_items(cfg),
        )
        for v0 in cfg.effective_v0_list()
    ]
    blocks = _map_tasks(block_fn, tasks, cfg.worker_count)
    rows = [row for block in blocks for row in block]
    meta = _base_metadata(cfg)
    meta["rtol"] = repr(rtol)
    meta["atol"] = repr(atol)
    return ResultTable(["v0", "m"] + value_columns, np.array(rows), meta)


SCENARIOS = {
    "pulse_dynamics": _run_pulse_dynamics,
    "scaling_full": lambda cfg: _run_scaling(cfg, 1.0, reduced=False),
    "scaling_mid": lambda cfg: _run_scaling(cfg, 0.5, reduced=False),
    "scaling_reduced": lambda cfg: _run_scaling(cfg, 1.0, reduced=True),
    "multi_pulse_populations": _run_multi_pulse_populations,
    "multi_pulse_density": lambda cfg: _run_multi_pulse_sweep(
        cfg, _density_block, ["density_exact", "density_map"]
    ),
    "multi_pulse_coherence": lambda cfg: _run_multi_pulse_sweep(
        cfg, _coherence_block, ["s_coh_exact", "s_coh_map"]
    ),
}


def run_scenario(cfg):
    """Validate the config and produce its result table."""
    validate_config(cfg)
    return SCENARIOS[cfg.scenario](cfg)


# ---------------------------------------------------------------------------
# config file parsing

_LIST_KEYS = {"T_values", "s_grid", "v0_list"}
_INT_LIST_KEYS = {"n_list"}
_FLOAT_KEYS = {"delta", "v0", "alpha", "gamma", "pulse_amplitude", "rtol", "atol"}
_INT_KEYS = {"n_sites", "n_pulses", "worker_count"}
_STR_KEYS = {"scenario", "pulse_shape", "output_path"}


def parse_config_text(text):
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in raw:
            raise ValidationError(f"config line {lineno}: duplicate key {key!r}")
        raw[key] = value.strip()
    return raw


def _parse_float_list(value):
    value = value.strip()
    if value.startswith("linspace:"):
        try:
            _, a, b, num = value.split(":")
            return tuple(np.linspace(float(a), float(b), int(num)))
        except ValueError as err:
            raise ValidationError(f"bad linspace spec {value!r}") from err
    try:
        return tuple(float(part) for part in value.split(",") if part.strip())
    except ValueError as err:
        raise ValidationError(f"bad numeric list {value!r}") from err


def _parse_initial(value):
    weights = {}
    for part in value.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            bits, weight = part.split(":")
            config = tuple(int(ch) for ch in bits.strip())
            weights[config] = float(weight)
        except ValueError as err:
            raise ValidationError(f"bad initial entry {part!r}") from err
    return ClassicalMixture(weights)


def build_config(raw, overrides=None):
    """Typed config from raw string pairs; overrides win over file keys."""
    merged = dict(raw)
    if overrides:
        for key, value in overrides.items():
            if value is not None:
                merged[key] = value
    if "scenario" not in merged:
        raise ValidationError("config is missing the scenario key")

    kwargs = {}
    for key, value in merged.items():
        if key in _STR_KEYS:
            kwargs[key] = str(value)
        elif key in _FLOAT_KEYS:
            try:
                kwargs[key] = float(value)
            except ValueError as err:
                raise ValidationError(f"bad value for {key}: {value!r}") from err
        elif key in _INT_KEYS:
            try:
                kwargs[key] = int(value)
            except ValueError as err:
                raise ValidationError(f"bad value for {key}: {value!r}") from err
        elif key in _LIST_KEYS:
            kwargs[key] = _parse_float_list(str(value))
        elif key in _INT_LIST_KEYS:
            kwargs[key] = tuple(
                int(part) for part in str(value).split(",") if part.strip()
            )
        elif key == "initial":
            kwargs[key] = (
                value if isinstance(value, ClassicalMixture) else _parse_initial(value)
            )
        else:
            raise ValidationError(f"unknown config key {key!r}")
    cfg = ExperimentConfig(**kwargs)
    return validate_config(cfg)


def load_config(path, overrides=None):
    """Read, merge, and validate a config file."""
    text = Path(path).read_text(encoding="utf-8")
    return build_config(parse_config_text(text), overrides)
