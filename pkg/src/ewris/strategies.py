"""Harvest-and-reflect strategies evaluated on one channel realization.

Every strategy produces a :class:`StrategyOutcome` holding the per-RIS
configurations, their power budgets and the resulting efficiencies. The
element-wise design is the reference; the others are benchmarks.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
import numpy.typing as npt

from .beamforming import (
    Precoder,
    RisDesign,
    ZoneLayout,
    assemble_configuration,
    assign_zones,
    bs_ris_distances,
    build_zone_layout,
    design_element_wise,
    eh_switch_design,
    incident_amplitudes,
    mrt_precoder,
    predicted_compensation,
)
from .channel import ChannelSet, apply_ce_error, build_channels, predicted_channels
from .config import ScenarioConfig
from .localization import sample_location_noise
from .metrics import energy_efficiency, scenario_chi, snr, spectrum_efficiency
from .ris import (
    PowerBudget,
    RisConfiguration,
    amplification_power,
    available_power,
    feasible_amplification,
    harvested_power,
    quantize_phase,
)

logger = logging.getLogger("ewris")

DEFAULT_FACTOR_STEP = 0.01
# A power-splitting element drives one phase shifter per branch.
PS_SHIFTERS = 2


class Strategy(str, Enum):
    """Identifiers used in sweep files and CSV output."""

    EW = "ew"
    PS = "ps"
    TS = "ts"
    ES = "es"
    RANDOM = "random"
    EXTERNAL = "ext"
    AO = "ao"


@dataclass(frozen=True, eq=False)
class LinkContext:
    """Everything the strategies need about one slot.

    Attributes:
        cfg: Scenario.
        channels: True channels.
        f_hat: BS estimate of the direct channel.
        ue_hat: Location estimate shared by the RISs.
        precoder: MRT precoder built from ``f_hat``.
        predicted: Line-of-sight channels predicted at ``ue_hat``.
    """

    cfg: ScenarioConfig
    channels: ChannelSet
    f_hat: npt.NDArray[np.complex128]
    ue_hat: npt.NDArray[np.float64]
    precoder: Precoder
    predicted: ChannelSet

    @cached_property
    def layouts(self) -> list[ZoneLayout] | None:
        """Zone layouts of every RIS, ``None`` with continuous phases."""
        return zone_layouts(self)

    @cached_property
    def baseline(self) -> tuple[npt.NDArray[np.float64], ...]:
        """Benchmark phases of every RIS, see :func:`baseline_phases`."""
        return tuple(_zone_baseline(self, k) for k in range(len(self.cfg.panels)))


def prepare_link(cfg: ScenarioConfig, rng: np.random.Generator) -> LinkContext:
    """Draw the impairments of one slot: location noise, NLoS scattering, CE error."""
    loc_noise = sample_location_noise(cfg.localization_std_m, rng)
    channels = build_channels(cfg, rng=rng)
    f_hat = apply_ce_error(channels.f, cfg.ce_error_std, rng)
    ue_hat = cfg.ue_position + loc_noise
    return LinkContext(
        cfg=cfg,
        channels=channels,
        f_hat=f_hat,
        ue_hat=ue_hat,
        precoder=mrt_precoder(f_hat),
        predicted=predicted_channels(cfg, ue_hat),
    )


@dataclass(frozen=True, eq=False)
class StrategyOutcome:
    """Result of one strategy on one slot.

    Attributes:
        strategy: Strategy identifier.
        factor: Operating factor in [0, 1] (split, time or element fraction),
            ``None`` when the strategy has none.
        spectrum_efficiency: bit/s/Hz.
        energy_efficiency: bit/s/Hz/W.
        harvested: Total harvested power over the RISs (W).
        sustainable: Every RIS covers its circuits with a strict surplus.
        snr: Received SNR.
        configurations: Per-RIS configuration.
        budgets: Per-RIS power budget.
        converged: AO only; whether the ascent met its tolerance.
        iterations: AO only; iterations performed.
        history: AO only; spectrum efficiency after each iteration.
    """

    strategy: Strategy
    factor: float | None
    spectrum_efficiency: float
    energy_efficiency: float
    harvested: float
    sustainable: bool
    snr: float
    configurations: tuple[RisConfiguration, ...]
    budgets: tuple[PowerBudget, ...]
    converged: bool | None = None
    iterations: int | None = None
    history: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.factor is not None and not 0 <= self.factor <= 1:
            raise ValueError(f"factor must be in [0, 1], got {self.factor}")
        if self.spectrum_efficiency < 0 or self.energy_efficiency < 0:
            raise ValueError("Efficiencies must be non-negative")

    @property
    def proportion(self) -> float:
        """Mean fraction of reflective elements over the RISs."""
        return float(np.mean([c.proportion for c in self.configurations]))


def _outcome(
    ctx: LinkContext,
    strategy: Strategy,
    factor: float | None,
    configurations: Sequence[RisConfiguration],
    budgets: Sequence[PowerBudget],
    *,
    w: npt.NDArray[np.complex128] | None = None,
    transmit_power: float | None = None,
    external_power: float = 0.0,
    rate_fraction: float = 1.0,
    **extra,
) -> StrategyOutcome:
    cfg = ctx.cfg
    w = ctx.precoder.w if w is None else w
    p_t = cfg.transmit_power_w if transmit_power is None else transmit_power
    gamma = snr(ctx.channels, w, configurations, p_t, cfg.ue_noise_w, cfg.ris_noise_w)
    se = rate_fraction * spectrum_efficiency(gamma)
    return StrategyOutcome(
        strategy=strategy,
        factor=factor,
        spectrum_efficiency=se,
        energy_efficiency=energy_efficiency(se, p_t, external_power),
        harvested=float(sum(b.harvested for b in budgets)),
        sustainable=all(b.sustainable for b in budgets),
        snr=gamma,
        configurations=tuple(configurations),
        budgets=tuple(budgets),
        **extra,
    )


def _fraction_to_chi(cfg: ScenarioConfig, fraction: float) -> float:
    scale = 2 if cfg.resolution_bits is None else 2**cfg.resolution_bits
    return fraction * np.pi / scale


def _chi_to_fraction(cfg: ScenarioConfig, chi: float) -> float:
    scale = 2 if cfg.resolution_bits is None else 2**cfg.resolution_bits
    return min(1.0, chi * scale / np.pi)


def zone_layouts(ctx: LinkContext) -> list[ZoneLayout] | None:
    """Zone layouts of every RIS, reusable across half angles."""
    if ctx.cfg.resolution_bits is None:
        return None
    return [
        build_zone_layout(ctx.cfg, k, ctx.precoder, ctx.ue_hat)
        for k in range(len(ctx.cfg.panels))
    ]


def element_wise_designs(
    ctx: LinkContext,
    chi: float | None = None,
    layouts: Sequence[ZoneLayout] | None = None,
) -> list[RisDesign]:
    """Element-wise design of every RIS, reusing the slot's zone layouts."""
    if layouts is None:
        layouts = ctx.layouts
    return [
        design_element_wise(
            ctx.cfg,
            k,
            ctx.precoder,
            ctx.ue_hat,
            chi=chi,
            layout=None if layouts is None else layouts[k],
            h=ctx.channels.h[k],
        )
        for k in range(len(ctx.cfg.panels))
    ]


def element_wise(
    ctx: LinkContext,
    chi: float | None = None,
    layouts: Sequence[ZoneLayout] | None = None,
    designs: Sequence[RisDesign] | None = None,
) -> StrategyOutcome:
    """The location-aided element-wise design."""
    if designs is None:
        designs = element_wise_designs(ctx, chi, layouts)
    chis = [
        scenario_chi(ctx.cfg, k) if d.chi is None else d.chi
        for k, d in enumerate(designs)
    ]
    return _outcome(
        ctx,
        Strategy.EW,
        float(np.mean([_chi_to_fraction(ctx.cfg, c) for c in chis])),
        [d.configuration for d in designs],
        [d.budget for d in designs],
    )


def _zone_baseline(ctx: LinkContext, k: int) -> npt.NDArray[np.float64]:
    cfg = ctx.cfg
    theta = predicted_compensation(cfg, k, ctx.precoder, ctx.ue_hat, ctx.predicted)
    phases = np.asarray(quantize_phase(theta, cfg.resolution_bits), dtype=float)
    if ctx.layouts is None:
        return phases
    levels = 2**cfg.resolution_bits
    assignment = assign_zones(ctx.layouts[k], np.pi / levels)
    return np.where(assignment.reflect_region, assignment.phases, phases)


def baseline_phases(ctx: LinkContext, k: int) -> npt.NDArray[np.float64]:
    """Phases the benchmark strategies give the elements of RIS ``k``.

    With a finite resolution every element takes the zone phase of the band it
    falls in when the bands span the whole zone spacing. Elements beyond the
    usable zones, and every element with continuous phases, take the predicted
    compensation projected to the phase grid.
    """
    return ctx.baseline[k]


def _incident_rms(
    ctx: LinkContext, k: int, transmit_power: float | None = None
) -> float:
    p_t = ctx.cfg.transmit_power_w if transmit_power is None else transmit_power
    incident = incident_amplitudes(ctx.channels.h[k], ctx.precoder.w, p_t)
    return float(np.sqrt(np.mean(incident**2)))


def _switch(ctx: LinkContext, k: int) -> npt.NDArray[np.complex128]:
    return eh_switch_design(
        bs_ris_distances(ctx.cfg, k), ctx.precoder.phases, ctx.cfg.wavelength
    )


def _harvest(ctx: LinkContext, k: int, switch, absorptive) -> float:
    cfg = ctx.cfg
    return harvested_power(
        switch,
        absorptive,
        ctx.channels.h[k],
        ctx.precoder.w,
        cfg.transmit_power_w,
        cfg.ris_noise_w,
        cfg.power_model.eta1,
    )


def _check_factor(name: str, value: float) -> None:
    if not 0 <= value <= 1:
        raise ValueError(f"{name} must be in [0, 1], got {value}")


def power_splitting(ctx: LinkContext, split: float) -> StrategyOutcome:
    """Every element harvests a fraction ``split`` of its incident power and
    reflects the rest.

    The configuration holds the reflective branch; the harvesting branch is
    accounted for in the budget. Each element drives two phase shifters, one
    per branch, and the circuit consumption counts both.
    """
    _check_factor("split", split)
    cfg = ctx.cfg
    model = cfg.power_model
    resolution = cfg.resolution_bits
    configurations, budgets = [], []
    for k, panel in enumerate(cfg.panels):
        n = panel.n_elements
        switch = _switch(ctx, k)
        harvest = _harvest(
            ctx, k, switch, np.full(n, model.absorptive_efficiency * np.sqrt(split))
        )
        available = available_power(harvest, model, n, resolution, PS_SHIFTERS)
        if split >= 1 or available < 0:
            if split < 1:
                logger.warning(
                    f"RIS {k}: split {split:g} cannot power the circuits; RIS inactive"
                )
            configurations.append(
                RisConfiguration.all_absorptive(
                    switch, model.absorptive_efficiency, resolution, active=split >= 1
                )
            )
            budgets.append(
                PowerBudget.settle(
                    harvest, model, n, resolution, 0.0, shifters=PS_SHIFTERS
                )
            )
            continue
        h_inc = np.sqrt(1 - split) * _incident_rms(ctx, k)
        rho = feasible_amplification(available, n, h_inc, model.rho_max)
        phases = baseline_phases(ctx, k)
        configurations.append(
            RisConfiguration(
                reflective=np.sqrt(1 - split) * rho * np.exp(1j * phases),
                absorptive=np.zeros(n),
                switch=switch,
                resolution=resolution,
            )
        )
        budgets.append(
            PowerBudget.settle(
                harvest,
                model,
                n,
                resolution,
                amplification_power(rho, n, h_inc),
                shifters=PS_SHIFTERS,
            )
        )
    return _outcome(ctx, Strategy.PS, split, configurations, budgets)


def time_switching(ctx: LinkContext, fraction: float) -> StrategyOutcome:
    """Harvest with every element for ``fraction`` of the slot, reflect for the rest.

    The rate is scaled by ``1 - fraction``. The harvested energy, spread over
    the reflective phase, feeds the amplifiers.
    """
    _check_factor("fraction", fraction)
    cfg = ctx.cfg
    model = cfg.power_model
    resolution = cfg.resolution_bits
    configurations, budgets = [], []
    for k, panel in enumerate(cfg.panels):
        n = panel.n_elements
        switch = _switch(ctx, k)
        harvest = fraction * _harvest(
            ctx, k, switch, np.full(n, model.absorptive_efficiency)
        )
        available = available_power(harvest, model, n, resolution)
        if fraction >= 1 or available < 0:
            configurations.append(
                RisConfiguration.all_absorptive(
                    switch,
                    model.absorptive_efficiency,
                    resolution,
                    active=fraction >= 1,
                )
            )
            budgets.append(PowerBudget.settle(harvest, model, n, resolution, 0.0))
            continue
        h_inc = _incident_rms(ctx, k)
        rho = feasible_amplification(
            available / (1 - fraction), n, h_inc, model.rho_max
        )
        configurations.append(
            RisConfiguration(
                reflective=rho * np.exp(1j * baseline_phases(ctx, k)),
                absorptive=np.zeros(n),
                switch=switch,
                resolution=resolution,
            )
        )
        consumed = (1 - fraction) * amplification_power(rho, n, h_inc)
        budgets.append(PowerBudget.settle(harvest, model, n, resolution, consumed))
    return _outcome(
        ctx, Strategy.TS, fraction, configurations, budgets, rate_fraction=1 - fraction
    )


def random_subset(
    n: int, proportion: float, rng: np.random.Generator
) -> npt.NDArray[np.bool_]:
    """Uniformly random subset of ``floor(proportion * n)`` elements."""
    _check_factor("proportion", proportion)
    mask = np.zeros(n, dtype=bool)
    mask[rng.permutation(n)[: int(np.floor(proportion * n + 1e-9))]] = True
    return mask


def element_splitting(
    ctx: LinkContext,
    proportion: float,
    rng: np.random.Generator | None = None,
    *,
    masks: Sequence[npt.NDArray[np.bool_]] | None = None,
) -> StrategyOutcome:
    """A random subset of elements reflects, the others harvest.

    Args:
        ctx: Slot.
        proportion: Reflective fraction.
        rng: Draws the subset when ``masks`` is not given.
        masks: Explicit reflective subsets, one per RIS.
    """
    _check_factor("proportion", proportion)
    cfg = ctx.cfg
    if masks is None:
        if rng is None:
            raise ValueError("A random generator is required to draw the subset")
        masks = [random_subset(p.n_elements, proportion, rng) for p in cfg.panels]
    designs = [
        assemble_configuration(
            cfg, k, masks[k], baseline_phases(ctx, k), ctx.precoder, ctx.channels.h[k]
        )
        for k in range(len(cfg.panels))
    ]
    return _outcome(
        ctx,
        Strategy.ES,
        proportion,
        [d.configuration for d in designs],
        [d.budget for d in designs],
    )


def random_phases(
    n: int, resolution: int | None, rng: np.random.Generator
) -> npt.NDArray[np.float64]:
    """Uniform phases on the D-bit grid, or on [0, 2 pi) for continuous phases."""
    if resolution is None:
        return rng.uniform(0.0, 2 * np.pi, n)
    levels = 2**resolution
    return 2 * np.pi * rng.integers(0, levels, n) / levels


def random_phase_baseline(
    ctx: LinkContext,
    rng: np.random.Generator,
    designs: Sequence[RisDesign] | None = None,
) -> StrategyOutcome:
    """Element-wise split and amplification with uniformly random phases."""
    if designs is None:
        designs = element_wise_designs(ctx)
    configurations = []
    for design in designs:
        config = design.configuration
        phases = random_phases(config.n_elements, config.resolution, rng)
        configurations.append(
            RisConfiguration(
                reflective=np.where(
                    config.reflective_mask,
                    config.amplification * np.exp(1j * phases),
                    0.0,
                ),
                absorptive=config.absorptive,
                switch=config.switch,
                resolution=config.resolution,
                active=config.active,
            )
        )
    return _outcome(
        ctx, Strategy.RANDOM, None, configurations, [d.budget for d in designs]
    )


def external_supply(ctx: LinkContext) -> StrategyOutcome:
    """Grid-powered RIS without harvesting.

    The total budget P_t is split evenly between the BS and the RIS supply;
    every element reflects.
    """
    cfg = ctx.cfg
    model = cfg.power_model
    resolution = cfg.resolution_bits
    half = cfg.transmit_power_w / 2
    configurations, budgets = [], []
    for k, panel in enumerate(cfg.panels):
        n = panel.n_elements
        circuit = model.circuit_power(n, resolution)
        available = half - circuit
        h_inc = _incident_rms(ctx, k, half)
        rho = feasible_amplification(available, n, h_inc, model.rho_max)
        consumed = amplification_power(rho, n, h_inc)
        configurations.append(
            RisConfiguration(
                reflective=rho * np.exp(1j * baseline_phases(ctx, k)),
                absorptive=np.zeros(n),
                switch=_switch(ctx, k),
                resolution=resolution,
            )
        )
        budgets.append(
            PowerBudget(
                harvested=0.0,
                available=available,
                amplification=consumed,
                circuit=circuit,
                surplus=available - consumed,
            )
        )
    return _outcome(
        ctx,
        Strategy.EXTERNAL,
        None,
        configurations,
        budgets,
        transmit_power=half,
        external_power=half,
    )


def _composite_channel(
    channels: ChannelSet, reflective: Sequence[npt.NDArray[np.complex128]]
) -> npt.NDArray[np.complex128]:
    """e = f + sum_k h_k Phi_k^H g_k, so that the effective gain is e^H w."""
    e = channels.f.astype(complex)
    for h, g, phi in zip(channels.h, channels.g, reflective):
        e = e + h @ (np.conj(phi) * g)
    return e


def _project(phase: float, resolution: int | None) -> float:
    return float(quantize_phase(phase, resolution))


def alternating_optimization(
    ctx: LinkContext,
    resolution: int | None = None,
    *,
    designs: Sequence[RisDesign] | None = None,
    max_iters: int = 50,
    tol: float = 1e-6,
) -> StrategyOutcome:
    """Perfect-CSI benchmark alternating per-element phase alignment and MRT.

    The reflective split and amplification are those of the element-wise
    design. Each iteration sweeps the elements once, giving every element the
    phase that best aligns its path with the rest of the received signal, then
    recomputes the MRT precoder on the composite channel. Neither step can
    lower the SNR, so the efficiency history is nondecreasing.

    Args:
        ctx: Slot with the true channels.
        resolution: Phase resolution of the benchmark; ``None`` for continuous.
        designs: Element-wise designs to start from.
        max_iters: Iteration cap.
        tol: Stop when the spectrum efficiency gains less than this (bit/s/Hz).
    """
    if max_iters < 1:
        raise ValueError(f"max_iters must be positive, got {max_iters}")
    cfg = ctx.cfg
    channels = ctx.channels
    if designs is None:
        designs = element_wise_designs(ctx)
    masks = [d.configuration.reflective_mask for d in designs]
    rhos = [d.configuration.amplification for d in designs]
    p_t, sigma_u, sigma_r = cfg.transmit_power_w, cfg.ue_noise_w, cfg.ris_noise_w

    def build(phases: Sequence[npt.NDArray[np.float64]]) -> list[RisConfiguration]:
        return [
            RisConfiguration(
                reflective=np.where(mask, rho * np.exp(1j * theta), 0.0),
                absorptive=d.configuration.absorptive,
                switch=d.configuration.switch,
                resolution=resolution,
                active=d.configuration.active,
            )
            for mask, rho, theta, d in zip(masks, rhos, phases, designs)
        ]

    def efficiency(phases, w) -> float:
        gamma = snr(channels, w, build(phases), p_t, sigma_u, sigma_r)
        return spectrum_efficiency(gamma)

    w = ctx.precoder.w.copy()
    direct = np.vdot(channels.f, w)
    aligned = [
        np.asarray(
            quantize_phase(
                np.angle(direct) - np.angle(g.conj() * (h.conj().T @ w)), resolution
            ),
            dtype=float,
        )
        for h, g in zip(channels.h, channels.g)
    ]
    ew = [
        np.asarray(quantize_phase(d.configuration.phases, resolution), dtype=float)
        for d in designs
    ]
    phases = max((aligned, ew), key=lambda candidate: efficiency(candidate, w))
    phases = [p.copy() for p in phases]
    history = [efficiency(phases, w)]

    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        paths = [
            rho * g.conj() * (h.conj().T @ w)
            for rho, h, g in zip(rhos, channels.h, channels.g)
        ]
        total = np.vdot(channels.f, w) + sum(
            np.sum(np.where(mask, path * np.exp(1j * theta), 0.0))
            for mask, path, theta in zip(masks, paths, phases)
        )
        for mask, path, theta in zip(masks, paths, phases):
            for n in np.flatnonzero(mask):
                if path[n] == 0:
                    continue
                rest = total - path[n] * np.exp(1j * theta[n])
                if rest == 0:
                    continue
                candidate = _project(np.angle(rest) - np.angle(path[n]), resolution)
                if abs(rest + path[n] * np.exp(1j * candidate)) >= abs(total):
                    theta[n] = candidate
                    total = rest + path[n] * np.exp(1j * candidate)
        reflective = [
            np.where(mask, rho * np.exp(1j * theta), 0.0)
            for mask, rho, theta in zip(masks, rhos, phases)
        ]
        e = _composite_channel(channels, reflective)
        if np.linalg.norm(e) > 0:
            w = e / np.linalg.norm(e)
        history.append(efficiency(phases, w))
        if history[-1] - history[-2] < tol:
            converged = True
            break

    if not converged:
        logger.warning(
            f"Alternating optimization stopped after {max_iters} iterations "
            "without converging"
        )
    return _outcome(
        ctx,
        Strategy.AO,
        None,
        build(phases),
        [d.budget for d in designs],
        w=w,
        converged=converged,
        iterations=iterations,
        history=tuple(history),
    )


def factor_grid(step: float = DEFAULT_FACTOR_STEP) -> npt.NDArray[np.float64]:
    """Factors 0, step, 2 step, ... up to and including 1."""
    if not 0 < step <= 0.5:
        raise ValueError(f"step must be in (0, 0.5], got {step}")
    count = int(np.floor(1 / step + 1e-9))
    grid = np.round(np.arange(count + 1) * step, 12)
    return grid if grid[-1] >= 1 else np.append(grid, 1.0)


def grid_search(
    evaluate: Callable[[float], StrategyOutcome],
    step: float = DEFAULT_FACTOR_STEP,
) -> StrategyOutcome:
    """Best outcome over the factor grid.

    Maximizes spectrum efficiency among sustainable outcomes, ties going to
    the smaller factor. Without any sustainable outcome the best overall is
    returned.
    """
    best: StrategyOutcome | None = None
    best_any: StrategyOutcome | None = None
    for factor in factor_grid(step):
        outcome = evaluate(float(factor))
        se = outcome.spectrum_efficiency
        if best_any is None or se > best_any.spectrum_efficiency:
            best_any = outcome
        if outcome.sustainable and (
            best is None or outcome.spectrum_efficiency > best.spectrum_efficiency
        ):
            best = outcome
    if best is None:
        logger.warning("No factor on the grid keeps the RIS self-sustainable")
        assert best_any is not None
        return best_any
    return best


def optimize_factor(
    strategy: Strategy | str,
    ctx: LinkContext,
    step: float = DEFAULT_FACTOR_STEP,
    rng: np.random.Generator | None = None,
) -> StrategyOutcome:
    """Grid-search the operating factor of ``strategy``.

    PS searches the split, TS the time fraction, ES the reflective fraction
    (nested random subsets drawn once) and EW the selection fraction
    ``2^D chi / pi``.
    """
    strategy = Strategy(strategy)
    if strategy is Strategy.PS:
        return grid_search(lambda x: power_splitting(ctx, x), step)
    if strategy is Strategy.TS:
        return grid_search(lambda x: time_switching(ctx, x), step)
    if strategy is Strategy.ES:
        if rng is None:
            raise ValueError("A random generator is required for element splitting")
        orders = [rng.permutation(p.n_elements) for p in ctx.cfg.panels]

        def split(x: float) -> StrategyOutcome:
            masks = []
            for order in orders:
                mask = np.zeros(len(order), dtype=bool)
                mask[order[: int(np.floor(x * len(order) + 1e-9))]] = True
                masks.append(mask)
            return element_splitting(ctx, x, masks=masks)

        return grid_search(split, step)
    if strategy is Strategy.EW:
        return grid_search(
            lambda x: element_wise(ctx, _fraction_to_chi(ctx.cfg, x), ctx.layouts),
            step,
        )
    raise ValueError(f"Strategy {strategy.value!r} has no operating factor")


def run_strategies(
    ctx: LinkContext,
    strategies: Sequence[Strategy | str],
    rngs: Sequence[np.random.Generator],
    step: float = DEFAULT_FACTOR_STEP,
) -> list[StrategyOutcome]:
    """Evaluate ``strategies`` on one slot.

    EW runs at the scenario's half angle, or at the reflective fraction it
    searches when the scenario adapts one, and its designs are shared: ES
    reflects the same proportion, the random baseline and AO keep its split.
    PS and TS take their grid-optimal factors. ``rngs`` holds one private
    generator per strategy.
    """
    strategies = [Strategy(s) for s in strategies]
    if len(rngs) != len(strategies):
        raise ValueError("One random generator per strategy is required")
    designs = element_wise_designs(ctx)
    outcomes = []
    for strategy, rng in zip(strategies, rngs):
        if strategy is Strategy.EW:
            outcome = element_wise(ctx, designs=designs)
        elif strategy is Strategy.PS or strategy is Strategy.TS:
            outcome = optimize_factor(strategy, ctx, step)
        elif strategy is Strategy.ES:
            proportion = float(np.mean([d.configuration.proportion for d in designs]))
            outcome = element_splitting(ctx, proportion, rng)
        elif strategy is Strategy.RANDOM:
            outcome = random_phase_baseline(ctx, rng, designs)
        elif strategy is Strategy.EXTERNAL:
            outcome = external_supply(ctx)
        else:
            outcome = alternating_optimization(
                ctx, ctx.cfg.resolution_bits, designs=designs
            )
        logger.debug(
            f"{strategy.value}: SE {outcome.spectrum_efficiency:.4f} bit/s/Hz, "
            f"factor {outcome.factor}"
        )
        outcomes.append(outcome)
    return outcomes
