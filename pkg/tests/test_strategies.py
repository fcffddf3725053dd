"""Tests for the harvest-and-reflect strategies."""

import dataclasses
import logging
import math
import time

import numpy as np
import pytest

from ewris.beamforming import assign_zones, design_element_wise, mrt_precoder
from ewris.channel import build_channels
from ewris.config import ScenarioConfig
from ewris.experiments import SweepSpec, run_sweep
from ewris.ris import PowerModel, on_phase_grid
from ewris.strategies import (
    LinkContext,
    Strategy,
    StrategyOutcome,
    alternating_optimization,
    baseline_phases,
    element_splitting,
    element_wise,
    element_wise_designs,
    external_supply,
    factor_grid,
    grid_search,
    optimize_factor,
    power_splitting,
    prepare_link,
    random_phase_baseline,
    random_subset,
    run_strategies,
    time_switching,
)


@pytest.fixture
def link(small_scenario: ScenarioConfig) -> LinkContext:
    return prepare_link(small_scenario, np.random.default_rng(5))


def _fake(factor: float, se: float, sustainable: bool) -> StrategyOutcome:
    return StrategyOutcome(
        strategy=Strategy.PS,
        factor=factor,
        spectrum_efficiency=se,
        energy_efficiency=se,
        harvested=0.0,
        sustainable=sustainable,
        snr=2**se - 1,
        configurations=(),
        budgets=(),
    )


class TestLinkPreparation:
    """Test the per-slot impairments."""

    def test_ideal_link(self, link: LinkContext) -> None:
        """Should know the channel and position exactly without impairments."""
        np.testing.assert_array_equal(link.ue_hat, link.cfg.ue_position)
        np.testing.assert_array_equal(link.f_hat, link.channels.f)
        assert np.linalg.norm(link.precoder.w) == pytest.approx(1.0)

    def test_seeded_impairments_repeat(self, small_scenario: ScenarioConfig) -> None:
        """Should draw identical impairments from identical seeds."""
        cfg = dataclasses.replace(
            small_scenario, localization_std_m=0.05, ce_error_std=0.3
        )
        first = prepare_link(cfg, np.random.default_rng(9))
        second = prepare_link(cfg, np.random.default_rng(9))
        np.testing.assert_array_equal(first.ue_hat, second.ue_hat)
        np.testing.assert_array_equal(first.f_hat, second.f_hat)
        assert not np.allclose(first.ue_hat, cfg.ue_position)


class TestElementWiseAgainstBaselines:
    """Test the element-wise design against the benchmarks it shares a split with."""

    def test_beats_element_splitting(self, link: LinkContext) -> None:
        """Should outperform random splitting at the same proportion."""
        ew = element_wise(link)
        es = element_splitting(link, ew.proportion, np.random.default_rng(1))
        assert ew.spectrum_efficiency > es.spectrum_efficiency

    def test_beats_random_phases(self, link: LinkContext) -> None:
        """Should outperform random phases with the same split and amplification."""
        outcomes = run_strategies(
            link, ["ew", "random"], [np.random.default_rng(i) for i in range(2)]
        )
        ew, baseline = outcomes
        assert ew.strategy is Strategy.EW and baseline.strategy is Strategy.RANDOM
        assert ew.spectrum_efficiency > baseline.spectrum_efficiency
        n_reflective = ew.configurations[0].n_reflective
        assert baseline.configurations[0].n_reflective == n_reflective

    def test_random_phases_keep_split(self, link: LinkContext) -> None:
        """Should keep the element-wise split and draw phases on the grid."""
        designs = element_wise_designs(link)
        first = random_phase_baseline(link, np.random.default_rng(3), designs)
        again = random_phase_baseline(link, np.random.default_rng(3), designs)
        config = first.configurations[0]
        reference = designs[0].configuration
        np.testing.assert_array_equal(
            config.reflective_mask, reference.reflective_mask
        )
        assert config.amplification == pytest.approx(reference.amplification)
        assert on_phase_grid(config.phases[config.reflective_mask], 1)
        assert first.spectrum_efficiency == again.spectrum_efficiency

    def test_factor_is_reflective_fraction(
        self, small_scenario: ScenarioConfig
    ) -> None:
        """Should report the selection fraction 2^D chi / pi as the factor."""
        cfg = dataclasses.replace(small_scenario, chi=math.pi / 4)
        outcome = element_wise(prepare_link(cfg, np.random.default_rng(5)))
        assert outcome.factor == pytest.approx(0.5)
        assert 0.35 <= outcome.proportion <= 0.65

    def test_adapted_factor_tracks_proportion(self, link: LinkContext) -> None:
        """Should report the searched fraction, close to the reflected share."""
        outcome = element_wise(link)
        assert 0.0 <= outcome.factor <= 1.0
        assert outcome.proportion == pytest.approx(outcome.factor, abs=0.1)

    def test_beats_power_splitting_with_hardware_cost(
        self, default_scenario: ScenarioConfig
    ) -> None:
        """Should outperform power splitting once phase shifters draw power."""
        ideal = prepare_link(default_scenario, np.random.default_rng(0))
        budget = 0.9 * power_splitting(ideal, 1.0).harvested
        model = PowerModel(
            technology="varactor",
            varactor_power=0.4 * budget / default_scenario.panels[0].n_elements,
        )
        cfg = dataclasses.replace(default_scenario, power_model=model)
        ctx = prepare_link(cfg, np.random.default_rng(0))
        ew = element_wise(ctx)
        ps = optimize_factor("ps", ctx, step=0.01)
        assert ew.sustainable
        assert ew.spectrum_efficiency > ps.spectrum_efficiency

    def test_close_to_power_splitting_without_hardware_cost(
        self, default_scenario: ScenarioConfig
    ) -> None:
        """Should stay within one percent of power splitting when shifters are free."""
        ctx = prepare_link(default_scenario, np.random.default_rng(0))
        ew = element_wise(ctx)
        ps = optimize_factor("ps", ctx, step=0.01)
        assert ew.spectrum_efficiency >= 0.99 * ps.spectrum_efficiency

    @pytest.mark.slow
    def test_ordering_over_paired_trials(
        self, default_scenario: ScenarioConfig
    ) -> None:
        """Should beat time switching and random splitting at one-bit phases."""
        ctx = prepare_link(default_scenario, np.random.default_rng(0))
        designs = element_wise_designs(ctx)
        ew = element_wise(ctx, designs=designs)
        ts = optimize_factor("ts", ctx, step=0.01)
        assert ew.spectrum_efficiency > ts.spectrum_efficiency
        wins = [
            ew.spectrum_efficiency
            > element_splitting(
                ctx, ew.proportion, np.random.default_rng(trial)
            ).spectrum_efficiency
            for trial in range(500)
        ]
        assert np.mean(wins) >= 0.95

    @pytest.mark.slow
    def test_efficiency_rises_with_resolution(
        self, default_scenario: ScenarioConfig
    ) -> None:
        """Should not lose efficiency with finer phases and approach continuous ones."""
        spec = SweepSpec("D", (1, 2, 3, 4, math.inf), (Strategy.EW,))
        rows = run_sweep(spec, default_scenario).for_strategy(Strategy.EW)
        se = [row.mean_se for row in rows]
        assert all(b >= a - 1e-3 for a, b in zip(se[:4], se[1:4]))
        assert se[2] >= 0.95 * se[4]

    @pytest.mark.slow
    @pytest.mark.parametrize(
        ("parameter", "values"),
        [("location_error_m", (0.0, 0.05, 0.5)), ("ce_error", (0.0, 0.3, 1.0))],
    )
    def test_efficiency_degrades_with_errors(
        self, default_scenario: ScenarioConfig, parameter: str, values: tuple
    ) -> None:
        """Should lose efficiency with growing errors down to the random-phase level."""
        trials = 16
        spec = SweepSpec(
            parameter, values, (Strategy.EW, Strategy.RANDOM), trials=trials, seed=2
        )
        result = run_sweep(spec, default_scenario)
        ew = result.for_strategy(Strategy.EW)
        baseline = result.for_strategy(Strategy.RANDOM)
        means = [row.mean_se for row in ew]
        stderr = [row.std_se / math.sqrt(trials) for row in ew]
        assert means[1] <= means[0] + 3 * stderr[1]
        assert means[2] <= means[1] + 3 * (stderr[1] + stderr[2])
        assert means[2] < means[0]
        assert abs(means[2] - baseline[2].mean_se) <= 0.1 * baseline[2].mean_se

    def test_element_splitting_needs_generator(self, link: LinkContext) -> None:
        """Should require a generator or explicit masks."""
        with pytest.raises(ValueError, match="generator"):
            element_splitting(link, 0.5)


class TestAlternatingOptimization:
    """Test the perfect-CSI benchmark."""

    def test_not_worse_than_element_wise(self, link: LinkContext) -> None:
        """Should start from the element-wise phases and never lose efficiency."""
        designs = element_wise_designs(link)
        ew = element_wise(link, designs=designs)
        ao = alternating_optimization(link, 1, designs=designs)
        assert ao.spectrum_efficiency >= ew.spectrum_efficiency - 1e-9
        assert all(b >= a - 1e-9 for a, b in zip(ao.history, ao.history[1:]))
        assert ao.history[-1] == pytest.approx(ao.spectrum_efficiency)
        assert ao.converged

    def test_recovers_from_location_error(self, small_scenario: ScenarioConfig) -> None:
        """Should improve on the element-wise design when the location is off."""
        cfg = dataclasses.replace(small_scenario, localization_std_m=0.05)
        ctx = prepare_link(cfg, np.random.default_rng(5))
        designs = element_wise_designs(ctx)
        ew = element_wise(ctx, designs=designs)
        ao = alternating_optimization(ctx, 1, designs=designs)
        assert ao.spectrum_efficiency > ew.spectrum_efficiency

    def test_continuous_single_antenna_converges_at_once(
        self, single_antenna_scenario: ScenarioConfig
    ) -> None:
        """Should already be optimal after aligning every path with the direct one."""
        ctx = prepare_link(single_antenna_scenario, np.random.default_rng(0))
        designs = element_wise_designs(ctx)
        ao = alternating_optimization(ctx, None, designs=designs)
        assert ao.converged
        assert ao.iterations == 1
        assert ao.configurations[0].resolution is None

    def test_invalid_iteration_cap(self, link: LinkContext) -> None:
        """Should reject a non-positive iteration cap."""
        with pytest.raises(ValueError):
            alternating_optimization(link, 1, max_iters=0)


class TestSplittingBenchmarks:
    """Test power splitting, time switching and external supply."""

    def test_power_splitting_extremes(self, link: LinkContext) -> None:
        """Should reflect everything without splitting and nothing at full split."""
        none = power_splitting(link, 0.0)
        full = power_splitting(link, 1.0)
        assert none.configurations[0].n_reflective == 400
        assert full.configurations[0].n_reflective == 0
        assert full.configurations[0].active
        assert full.harvested > none.harvested

    def test_benchmarks_use_zone_phases(self, link: LinkContext) -> None:
        """Should give the benchmark elements the zone phases of the layout."""
        assignment = assign_zones(link.layouts[0], math.pi / 2)
        mask = assignment.reflect_region
        assert mask.mean() >= 0.9
        phases = baseline_phases(link, 0)
        np.testing.assert_allclose(phases[mask], assignment.phases[mask])
        assert on_phase_grid(phases, 1)
        reflective = power_splitting(link, 0.0).configurations[0].reflective
        np.testing.assert_allclose(
            np.angle(reflective[mask] * np.exp(-1j * phases[mask])), 0, atol=1e-9
        )

    def test_time_switching_scales_rate(self, link: LinkContext) -> None:
        """Should scale the spectrum efficiency by the reflective share of the slot."""
        outcome = time_switching(link, 0.4)
        assert outcome.spectrum_efficiency == pytest.approx(
            0.6 * np.log2(1 + outcome.snr)
        )
        assert time_switching(link, 1.0).spectrum_efficiency == 0.0

    @pytest.mark.parametrize("strategy", ["ps", "ts"])
    def test_optimized_factor_in_range(self, link: LinkContext, strategy: str) -> None:
        """Should return a grid factor in [0, 1]."""
        outcome = optimize_factor(strategy, link, step=0.1)
        assert outcome.strategy is Strategy(strategy)
        assert 0.0 <= outcome.factor <= 1.0
        assert outcome.factor in factor_grid(0.1)

    def test_factor_search_needs_operating_factor(self, link: LinkContext) -> None:
        """Should reject strategies without an operating factor."""
        with pytest.raises(ValueError, match="operating factor"):
            optimize_factor("random", link)
        with pytest.raises(ValueError, match="generator"):
            optimize_factor("es", link, step=0.5)

    def test_external_supply(self, link: LinkContext) -> None:
        """Should split P_t between BS and RIS, reflect with every element and
        harvest nothing."""
        outcome = external_supply(link)
        assert outcome.harvested == 0.0
        assert outcome.configurations[0].n_reflective == 400
        p_t = link.cfg.transmit_power_w
        assert outcome.energy_efficiency == pytest.approx(
            outcome.spectrum_efficiency / p_t
        )


class TestFactorSearch:
    """Test the factor grid and the grid search."""

    def test_factor_grid(self) -> None:
        """Should span [0, 1] and always include 1."""
        assert len(factor_grid(0.01)) == 101
        np.testing.assert_allclose(factor_grid(0.3), [0.0, 0.3, 0.6, 0.9, 1.0])
        with pytest.raises(ValueError):
            factor_grid(0.6)

    def test_prefers_sustainable_outcomes(self) -> None:
        """Should maximize efficiency among sustainable factors only."""
        best = grid_search(lambda x: _fake(x, 1 - abs(x - 0.3), x >= 0.5), 0.1)
        assert best.factor == pytest.approx(0.5)

    def test_ties_go_to_smaller_factor(self) -> None:
        """Should keep the first of equally good factors."""
        assert grid_search(lambda x: _fake(x, 1.0, True), 0.1).factor == 0.0

    def test_falls_back_when_nothing_sustainable(self, caplog) -> None:
        """Should return the best outcome overall and warn."""
        with caplog.at_level(logging.WARNING, logger="ewris"):
            best = grid_search(lambda x: _fake(x, x, False), 0.25)
        assert best.factor == 1.0
        assert "self-sustainable" in caplog.text

    def test_random_subset(self, rng: np.random.Generator) -> None:
        """Should select floor(p n) elements."""
        assert random_subset(10, 0.55, rng).sum() == 5
        assert random_subset(10, 1.0, rng).all()


class TestRunStrategies:
    """Test evaluating several strategies on one slot."""

    def test_every_strategy(self, link: LinkContext) -> None:
        """Should return one outcome per strategy in order."""
        names = ["ew", "es", "random", "ext", "ao"]
        outcomes = run_strategies(
            link, names, [np.random.default_rng(i) for i in range(5)]
        )
        assert [o.strategy.value for o in outcomes] == names
        assert all(o.spectrum_efficiency > 0 for o in outcomes)

    def test_generator_count_must_match(self, link: LinkContext) -> None:
        """Should require one generator per strategy."""
        with pytest.raises(ValueError, match="generator"):
            run_strategies(link, ["ew", "es"], [np.random.default_rng(0)])

    def test_unknown_strategy(self, link: LinkContext) -> None:
        """Should reject unknown strategy names."""
        with pytest.raises(ValueError):
            run_strategies(link, ["magic"], [np.random.default_rng(0)])

    @pytest.mark.slow
    def test_design_cost_grows_linearly(self) -> None:
        """Should scale the selection work with the number of elements."""
        sizes = (1000, 4000, 16000)
        work, timings = [], []
        for n in sizes:
            cfg = ScenarioConfig().with_ris_size(n)
            precoder = mrt_precoder(build_channels(cfg).f)
            start = time.perf_counter()
            design = design_element_wise(
                cfg, 0, precoder, cfg.ue_position, chi=cfg.effective_chi()
            )
            timings.append(time.perf_counter() - start)
            work.append(design.assignment.evaluations)
        log_n = np.log(sizes)
        assert 0.8 <= np.polyfit(log_n, np.log(work), 1)[0] <= 1.2
        assert np.polyfit(log_n, np.log(timings), 1)[0] <= 1.2
