"""Seeded parameter sweeps, named experiment presets and CSV output."""

import csv
import dataclasses
import json
import logging
import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, TextIO, get_args

import numpy as np

from .beamforming import design_element_wise
from .channel import build_channels
from .config import ScenarioConfig, ScenarioError
from .localization import (
    LocationEstimate,
    estimate_location,
    sample_location_noise,
    search_grid,
)
from .metrics import (
    optimal_p,
    scenario_asymptotic_params,
    stationary_p,
    sustainability_boundary,
)
from .ris import RisConfiguration
from .strategies import (
    DEFAULT_FACTOR_STEP,
    Strategy,
    StrategyOutcome,
    prepare_link,
    run_strategies,
)

logger = logging.getLogger("ewris")

SweepParameter = Literal[
    "transmit_power_dBm", "N_R", "D", "location_error_m", "ce_error", "p_fraction"
]
SWEEP_PARAMETERS: tuple[str, ...] = get_args(SweepParameter)
CSV_COLUMNS = (
    "parameter",
    "strategy",
    "mean_se",
    "std_se",
    "mean_ee",
    "harvested_w",
    "sustain_rate",
)
ANALYSIS_COLUMNS = (
    "technology",
    "n_elements",
    "p_opt",
    "p_stationary",
    "p_max",
    "p_opt_feasible",
)
MAP_COLUMNS = ("x", "z", "mode", "phase")

CONTINUOUS = math.inf


def _parse_value(parameter: str, value: Any) -> float:
    if parameter == "D" and (value is None or value in ("continuous", "inf")):
        return CONTINUOUS
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"values: {value!r} is not a number") from None
    if parameter in ("N_R", "D") and not (
        math.isinf(number) or float(number).is_integer()
    ):
        raise ScenarioError(f"values: {parameter} takes integers, got {value!r}")
    return number


@dataclass
class SweepSpec:
    """One swept parameter evaluated for several strategies.

    Attributes:
        parameter: Swept quantity, one of ``SWEEP_PARAMETERS``.
        values: Parameter values; ``math.inf`` stands for continuous phases
            when sweeping ``D``.
        strategies: Strategies evaluated at every point.
        trials: Monte Carlo trials per point.
        seed: Master seed.
        workers: Threads evaluating trials; 1 runs serially.
        factor_step: Grid step of the PS/TS factor search.
    """

    parameter: SweepParameter
    values: tuple[float, ...]
    strategies: tuple[Strategy, ...] = (Strategy.EW,)
    trials: int = 1
    seed: int = 0
    workers: int = 1
    factor_step: float = DEFAULT_FACTOR_STEP

    def __post_init__(self) -> None:
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(
                f"Unknown sweep parameter {self.parameter!r}; "
                f"expected one of {', '.join(SWEEP_PARAMETERS)}"
            )
        self.values = tuple(_parse_value(self.parameter, v) for v in self.values)
        if not self.values:
            raise ValueError("A sweep needs at least one value")
        try:
            self.strategies = tuple(Strategy(s) for s in self.strategies)
        except ValueError as e:
            raise ValueError(f"Unknown strategy: {e}") from None
        if not self.strategies:
            raise ValueError("A sweep needs at least one strategy")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if not 0 < self.factor_step <= 0.5:
            raise ValueError(f"factor_step must be in (0, 0.5], got {self.factor_step}")


def sweep_from_dict(data: dict[str, Any]) -> SweepSpec:
    """Build a :class:`SweepSpec` from a JSON object.

    Raises:
        ScenarioError: On unknown keys or invalid values.
    """
    if not isinstance(data, dict):
        raise ScenarioError("sweep: expected an object")
    names = {f.name for f in dataclasses.fields(SweepSpec)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ScenarioError(f"sweep: unknown key(s) {', '.join(unknown)}")
    try:
        return SweepSpec(**data)
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"sweep: {e}") from e


def load_sweep(path: str | Path) -> SweepSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: invalid JSON ({e})") from e
    return sweep_from_dict(data)


def apply_parameter(
    cfg: ScenarioConfig, parameter: str, value: float
) -> ScenarioConfig:
    """Scenario with one swept quantity set to ``value``."""
    if parameter == "transmit_power_dBm":
        return dataclasses.replace(cfg, transmit_power_dbm=float(value))
    if parameter == "N_R":
        return cfg.with_ris_size(int(value))
    if parameter == "D":
        resolution = None if math.isinf(value) else int(value)
        chi = cfg.chi
        if chi is not None:
            old = 2 if cfg.resolution_bits is None else 2**cfg.resolution_bits
            new = 2 if resolution is None else 2**resolution
            chi = chi * old / new
        return dataclasses.replace(cfg, resolution_bits=resolution, chi=chi)
    if parameter == "location_error_m":
        return dataclasses.replace(cfg, localization_std_m=float(value))
    if parameter == "ce_error":
        return dataclasses.replace(cfg, ce_error_std=float(value))
    if parameter == "p_fraction":
        if not 0 <= value <= 1:
            raise ValueError(f"p_fraction must be in [0, 1], got {value}")
        scale = 2 if cfg.resolution_bits is None else 2**cfg.resolution_bits
        return dataclasses.replace(cfg, chi=float(value) * math.pi / scale)
    raise ValueError(f"Unknown sweep parameter {parameter!r}")


def trial_rng(seed: int, point: int, trial: int, stream: int) -> np.random.Generator:
    """Generator of one random stream.

    The stream is keyed by ``SeedSequence(seed, spawn_key=(point, trial,
    stream))``; stream 0 holds the channel impairments and stream ``1 + s``
    belongs to the ``s``-th strategy.
    """
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(point, trial, stream))
    )


@dataclass(frozen=True)
class SweepRow:
    parameter: float
    strategy: str
    mean_se: float
    std_se: float
    mean_ee: float
    harvested_w: float
    sustain_rate: float


@dataclass
class SweepResult:
    """Aggregated sweep output, one row per (value, strategy)."""

    parameter: str
    rows: list[SweepRow] = field(default_factory=list)

    def for_strategy(self, strategy: str | Strategy) -> list[SweepRow]:
        label = strategy.value if isinstance(strategy, Strategy) else strategy
        return [row for row in self.rows if row.strategy == label]


def _aggregate(
    value: float,
    label: str,
    outcomes: Sequence[StrategyOutcome],
) -> SweepRow:
    se = np.array([o.spectrum_efficiency for o in outcomes])
    return SweepRow(
        parameter=value,
        strategy=label,
        mean_se=float(se.mean()),
        std_se=float(se.std(ddof=0)),
        mean_ee=float(np.mean([o.energy_efficiency for o in outcomes])),
        harvested_w=float(np.mean([o.harvested for o in outcomes])),
        sustain_rate=float(np.mean([o.sustainable for o in outcomes])),
    )


def run_sweep(
    spec: SweepSpec, cfg: ScenarioConfig, label: str = ""
) -> SweepResult:
    """Evaluate every strategy at every point over ``spec.trials`` paired trials.

    Results do not depend on ``spec.workers``: every trial owns its random
    streams and the reduction runs in point, trial order.
    """
    configs = [apply_parameter(cfg, spec.parameter, v) for v in spec.values]
    tasks = [(i, t) for i in range(len(configs)) for t in range(spec.trials)]

    def run_trial(task: tuple[int, int]) -> list[StrategyOutcome]:
        point, trial = task
        ctx = prepare_link(configs[point], trial_rng(spec.seed, point, trial, 0))
        rngs = [
            trial_rng(spec.seed, point, trial, 1 + s)
            for s in range(len(spec.strategies))
        ]
        return run_strategies(ctx, spec.strategies, rngs, spec.factor_step)

    logger.info(
        f"Sweeping {spec.parameter} over {len(configs)} point(s), "
        f"{spec.trials} trial(s) each"
    )
    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(run_trial, tasks))
    else:
        results = [run_trial(task) for task in tasks]

    result = SweepResult(parameter=spec.parameter)
    suffix = f"@{label}" if label else ""
    for i, value in enumerate(spec.values):
        per_point = results[i * spec.trials : (i + 1) * spec.trials]
        for s, strategy in enumerate(spec.strategies):
            result.rows.append(
                _aggregate(value, strategy.value + suffix, [r[s] for r in per_point])
            )
    return result


def _format(value: float | int | bool | str | None) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) and math.isinf(value):
        return "continuous"
    return format(value, ".12g")


def write_table(handle: TextIO, header: Sequence[str], rows: Iterable) -> None:
    """Write CSV rows to an open text stream, numbers at 12 significant digits."""
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format(v) for v in row])


def _write_rows(path: str | Path, header: Sequence[str], rows: Iterable) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        write_table(handle, header, rows)
    return path


def emit_csv(result: SweepResult, path: str | Path) -> Path:
    """Write the sweep as CSV with the fixed column order of ``CSV_COLUMNS``."""
    return _write_rows(
        path,
        CSV_COLUMNS,
        (
            (
                row.parameter,
                row.strategy,
                row.mean_se,
                row.std_se,
                row.mean_ee,
                row.harvested_w,
                row.sustain_rate,
            )
            for row in result.rows
        ),
    )


@dataclass(frozen=True)
class AnalysisRow:
    technology: str
    n_elements: int
    p_opt: float | None
    p_stationary: float | None
    p_max: float | None
    p_opt_feasible: bool


def analyze_popt(
    cfg: ScenarioConfig,
    n_elements: Sequence[int],
    technology: str,
) -> list[AnalysisRow]:
    """Optimal proportion and sustainability bound versus the RIS size."""
    model = dataclasses.replace(cfg.power_model, technology=technology)
    base = dataclasses.replace(cfg, power_model=model)
    rows = []
    for n in n_elements:
        params = scenario_asymptotic_params(base.with_ris_size(int(n)))
        region = sustainability_boundary(params)
        rows.append(
            AnalysisRow(
                technology=technology,
                n_elements=int(n),
                p_opt=optimal_p(params),
                p_stationary=stationary_p(params),
                p_max=region.p_max,
                p_opt_feasible=region.p_opt_feasible,
            )
        )
    return rows


def analysis_records(rows: Sequence[AnalysisRow]) -> list[tuple]:
    return [
        (r.technology, r.n_elements, r.p_opt, r.p_stationary, r.p_max, r.p_opt_feasible)
        for r in rows
    ]


def emit_analysis_csv(rows: Sequence[AnalysisRow], path: str | Path) -> Path:
    return _write_rows(path, ANALYSIS_COLUMNS, analysis_records(rows))


def element_map(
    cfg: ScenarioConfig, configuration: RisConfiguration, k: int = 0
) -> list[tuple[float, float, str, float]]:
    """Per-element rows (x, z, mode, phase) along the panel's two in-plane axes.

    Reflective elements report their reflection phase, absorptive ones the
    phase of their harvesting switch.
    """
    coordinates = cfg.in_plane_coordinates(k)
    switch_phase = np.mod(np.angle(configuration.switch), 2 * np.pi)
    mask = configuration.reflective_mask
    return [
        (
            float(x),
            float(z),
            "reflect" if reflect else "absorb",
            float(phase if reflect else switch),
        )
        for (x, z), reflect, phase, switch in zip(
            coordinates, mask, configuration.phases, switch_phase
        )
    ]


def emit_element_map(
    rows: Sequence[tuple[float, float, str, float]], path: str | Path
) -> Path:
    return _write_rows(path, MAP_COLUMNS, rows)


def noiseless_design(cfg: ScenarioConfig, k: int = 0) -> RisConfiguration:
    """Element-wise configuration with perfect location and channel knowledge."""
    ctx = prepare_link(
        dataclasses.replace(cfg, localization_std_m=0.0, ce_error_std=0.0),
        trial_rng(0, 0, 0, 0),
    )
    return design_element_wise(
        ctx.cfg, k, ctx.precoder, ctx.ue_hat, h=ctx.channels.h[k]
    ).configuration


PresetKind = Literal["sweep", "map", "analysis"]


@dataclass(frozen=True)
class Preset:
    """A named experiment.

    Attributes:
        name: Preset name.
        description: One-line summary.
        kind: ``sweep`` writes a sweep CSV, ``map`` adds an element map,
            ``analysis`` writes asymptotic rows.
        sweep: Sweep for ``sweep`` and ``map`` presets.
        variants: (label, scenario overrides) pairs; each runs the sweep once.
        n_elements: RIS sizes of an ``analysis`` preset.
    """

    name: str
    description: str
    kind: PresetKind
    sweep: SweepSpec | None = None
    variants: tuple[tuple[str, dict[str, Any]], ...] = (("", {}),)
    n_elements: tuple[int, ...] = ()


_POWER_GRID = (10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
_BENCHMARKS = ("ew", "ps", "ts", "es")
_PRESET_TRIALS = 20


def _presets() -> dict[str, Preset]:
    return {
        "map-1bit": Preset(
            "map-1bit",
            "Element map of the 1-bit element-wise design",
            "map",
            SweepSpec("D", (1,), ("ew",)),
            (("", {"resolution_bits": 1}),),
        ),
        "map-2bit": Preset(
            "map-2bit",
            "Element map of the 2-bit element-wise design",
            "map",
            SweepSpec("D", (2,), ("ew",)),
            (("", {"resolution_bits": 2}),),
        ),
        "power-sweep": Preset(
            "power-sweep",
            "Spectrum efficiency versus transmit power, 1-bit",
            "sweep",
            SweepSpec("transmit_power_dBm", _POWER_GRID, _BENCHMARKS, _PRESET_TRIALS),
            (("", {"resolution_bits": 1}),),
        ),
        "size-sweep": Preset(
            "size-sweep",
            "Spectrum efficiency versus the number of RIS elements, 1-bit",
            "sweep",
            SweepSpec("N_R", (256, 576, 1024, 1600, 2500), _BENCHMARKS, _PRESET_TRIALS),
            (("", {"resolution_bits": 1}),),
        ),
        "resolution-sweep": Preset(
            "resolution-sweep",
            "Spectrum efficiency versus phase resolution",
            "sweep",
            SweepSpec("D", (1, 2, 3, 4, CONTINUOUS), _BENCHMARKS, _PRESET_TRIALS),
        ),
        "energy-efficiency": Preset(
            "energy-efficiency",
            "Energy efficiency versus transmit power, with an externally powered RIS",
            "sweep",
            SweepSpec(
                "transmit_power_dBm",
                (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0),
                (*_BENCHMARKS, "ext"),
                _PRESET_TRIALS,
            ),
        ),
        "proportion": Preset(
            "proportion",
            "Optimal reflective proportion and sustainability bound versus N_R",
            "analysis",
            n_elements=tuple(n * n for n in range(10, 201, 10)),
        ),
        "location-error": Preset(
            "location-error",
            "Spectrum efficiency versus location error",
            "sweep",
            SweepSpec(
                "location_error_m",
                tuple(round(0.02 * i, 10) for i in range(11)),
                ("ew", "random"),
                _PRESET_TRIALS,
            ),
        ),
        "ao-benchmark": Preset(
            "ao-benchmark",
            "Location-aided design against the perfect-CSI alternating optimization",
            "sweep",
            SweepSpec("transmit_power_dBm", _POWER_GRID, ("ew", "ao"), _PRESET_TRIALS),
            (("D1", {"resolution_bits": 1}), ("continuous", {"resolution_bits": None})),
        ),
        "ce-error": Preset(
            "ce-error",
            "Spectrum efficiency versus channel-estimation error",
            "sweep",
            SweepSpec(
                "ce_error",
                tuple(round(0.1 * i, 10) for i in range(11)),
                ("ew", "random"),
                _PRESET_TRIALS,
            ),
        ),
    }


PRESET_NAMES: tuple[str, ...] = tuple(_presets())

# Figure-numbered aliases for the presets.
PRESET_ALIASES: dict[str, str] = {
    "fig4": "map-1bit",
    "fig4b": "map-2bit",
    "fig5": "power-sweep",
    "fig6": "size-sweep",
    "fig7": "resolution-sweep",
    "fig9": "energy-efficiency",
    "fig10": "proportion",
    "fig11": "location-error",
    "fig12": "ao-benchmark",
    "fig13": "ce-error",
}


def preset(name: str) -> Preset:
    """Look up a preset by name or by its figure alias (``fig5`` and so on).

    Raises:
        ValueError: For an unknown name; the message lists the known ones.
    """
    presets = _presets()
    name = PRESET_ALIASES.get(name, name)
    if name not in presets:
        raise ValueError(
            f"Unknown preset {name!r}; expected one of {', '.join(presets)}"
        )
    return presets[name]


def _override(cfg: ScenarioConfig, overrides: dict[str, Any]) -> ScenarioConfig:
    if "resolution_bits" in overrides and cfg.chi is not None:
        overrides = {**overrides, "chi": None}
    return dataclasses.replace(cfg, **overrides)


def run_preset(
    name: str,
    cfg: ScenarioConfig,
    out: str | Path,
    *,
    seed: int | None = None,
    trials: int | None = None,
    workers: int = 1,
    technologies: Sequence[str] = ("pin", "varactor"),
) -> list[Path]:
    """Run a preset and write its CSV file(s).

    Returns:
        Paths written; element-map presets add ``<stem>_map.csv`` next to
        ``out``.
    """
    spec = preset(name)
    out = Path(out)
    if spec.kind == "analysis":
        rows = [
            row
            for technology in technologies
            for row in analyze_popt(cfg, spec.n_elements, technology)
        ]
        return [emit_analysis_csv(rows, out)]

    assert spec.sweep is not None
    sweep = dataclasses.replace(
        spec.sweep,
        seed=spec.sweep.seed if seed is None else seed,
        trials=spec.sweep.trials if trials is None else trials,
        workers=workers,
    )
    result = SweepResult(parameter=sweep.parameter)
    for label, overrides in spec.variants:
        variant = run_sweep(sweep, _override(cfg, overrides), label)
        result.rows.extend(variant.rows)
    written = [emit_csv(result, out)]

    if spec.kind == "map":
        mapped = _override(cfg, spec.variants[0][1])
        rows = element_map(mapped, noiseless_design(mapped))
        written.append(emit_element_map(rows, out.with_name(f"{out.stem}_map.csv")))
    return written


def locate(
    cfg: ScenarioConfig,
    extent: float,
    step: float,
    seed: int = 0,
) -> tuple[LocationEstimate, float]:
    """One uplink localization around a noisy prior of the UE position.

    Returns:
        The estimate and its distance to the true UE position (m).
    """
    rng = trial_rng(seed, 0, 0, 0)
    prior = cfg.ue_position + sample_location_noise(cfg.localization_std_m, rng)
    channels = build_channels(cfg, rng=rng)
    grid = search_grid(prior, extent, step)
    logger.info(f"Searching {len(grid)} UE hypotheses")
    estimate = estimate_location(cfg, channels, grid, spacing=step, extent=extent)
    error = float(np.linalg.norm(estimate.position - cfg.ue_position))
    return estimate, error
