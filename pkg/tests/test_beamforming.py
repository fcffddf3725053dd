"""Tests for the location-aided element-wise design."""

import dataclasses
import logging
import math

import numpy as np
import pytest

from ewris.beamforming import (
    absorptive_complement,
    adapt_proportion,
    assign_zones,
    band_width,
    build_zone_layout,
    combine_across_antennas,
    configure_element_wise,
    decision_threshold,
    design_element_wise,
    eh_switch_design,
    even_subset,
    max_zone_index,
    modified_axes,
    mrt_precoder,
    predicted_compensation,
    residual_offsets,
    select_elements,
    zone_phase,
)
from ewris.channel import build_channels, predicted_channels
from ewris.config import ScenarioConfig
from ewris.geometry import FresnelZoneSpec, ZoneCurve, fractional_axes
from ewris.metrics import snr
from ewris.ris import PowerModel, harvested_power, on_phase_grid

SPEC = FresnelZoneSpec.from_foci([0, 0, 15], [5, 5, 1.5], 1.0, 0.01)


def _line(y: float) -> ZoneCurve:
    x = np.linspace(-0.2, 0.2, 401)
    return ZoneCurve(SPEC, [np.column_stack([x, np.full_like(x, y), np.zeros_like(x)])])


def _wrapped(angle: np.ndarray) -> np.ndarray:
    return np.angle(np.exp(1j * angle))


class TestPrecoder:
    """Test MRT precoding."""

    def test_mrt(self) -> None:
        """Should give a unit-norm w with a real positive effective gain."""
        f_hat = np.array([1 + 2j, -0.5 + 0.1j])
        precoder = mrt_precoder(f_hat)
        assert np.linalg.norm(precoder.w) == pytest.approx(1.0)
        gain = np.vdot(f_hat, precoder.w)
        assert gain.real == pytest.approx(np.linalg.norm(f_hat))
        assert gain.imag == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(precoder.phases, np.angle(f_hat))

    def test_zero_channel_rejected(self) -> None:
        """Should reject a zero channel."""
        with pytest.raises(ValueError, match="zero channel"):
            mrt_precoder(np.zeros(2))


class TestZonePrimitives:
    """Test zone phases, thresholds and selection helpers."""

    @pytest.mark.parametrize(
        "j, resolution, expected",
        [
            (0.5, 1, math.pi),
            (1.0, 1, 0.0),
            (1.5, 1, math.pi),
            (0.25, 2, 3 * math.pi / 2),
            (0.75, 2, math.pi / 2),
        ],
    )
    def test_zone_phase(self, j: float, resolution: int, expected: float) -> None:
        """Should compensate the zone path excess on the D-bit grid."""
        assert zone_phase(j, resolution) == pytest.approx(expected)

    @pytest.mark.parametrize("j", [0.0, 0.3, -0.5])
    def test_zone_phase_rejects_bad_index(self, j: float) -> None:
        """Should reject indices that are not positive multiples of 1/2^D."""
        with pytest.raises(ValueError):
            zone_phase(j, 1)

    def test_modified_axes(self) -> None:
        """Should shift the zone by the precoding phase in wavelengths."""
        d = 15.0
        assert modified_axes(d, 1.0, 0.01, 0.0) == pytest.approx(
            fractional_axes(d, 1.0, 0.01)
        )
        assert modified_axes(d, 1.5, 0.01, 2 * math.pi) == pytest.approx(
            fractional_axes(d, 0.5, 0.01)
        )
        with pytest.raises(ValueError):
            modified_axes(d, 0.5, 0.01, 2 * math.pi)

    def test_decision_threshold(self) -> None:
        """Should scale the zone spacing by 2^D chi / pi."""
        inner, outer = _line(0.0), _line(0.01)
        assert decision_threshold(inner, outer, 1, math.pi / 2) == pytest.approx(0.01)
        assert decision_threshold(inner, outer, 1, math.pi / 4) == pytest.approx(0.005)
        assert decision_threshold(inner, outer, 2, 0.0) == 0.0

    def test_decision_threshold_validation(self) -> None:
        """Should reject chi outside [0, pi/2^D] and empty curves."""
        with pytest.raises(ValueError, match="chi"):
            decision_threshold(_line(0.0), _line(0.01), 1, 2.0)
        with pytest.raises(ValueError, match="non-empty"):
            decision_threshold(_line(0.0), ZoneCurve(SPEC, []), 1, 0.5)

    def test_band_width(self) -> None:
        """Should scale spacings elementwise and reject out-of-range half angles."""
        np.testing.assert_allclose(
            band_width([0.004, 0.008], 2, math.pi / 8), [0.002, 0.004]
        )
        assert band_width(0.01, 1, math.pi / 2) == pytest.approx(0.01)
        with pytest.raises(ValueError, match="chi"):
            band_width(0.01, 2, math.pi / 2)

    def test_select_elements_per_element_threshold(self) -> None:
        """Should accept one threshold per element and known distances."""
        elements = np.array([[0.0, 0.002, 0.0], [0.0, 0.004, 0.0], [0.1, 0.009, 0.0]])
        tau = np.array([0.001, 0.005, 0.01])
        np.testing.assert_array_equal(
            select_elements(elements, _line(0.0), tau), [False, True, True]
        )
        np.testing.assert_array_equal(
            select_elements(elements, _line(0.0), tau, distances=[0.0, 0.0, 1.0]),
            [True, True, False],
        )

    def test_select_elements_inclusive(self) -> None:
        """Should select elements within tau, including the boundary."""
        elements = np.array([[0.0, 0.002, 0.0], [0.0, 0.004, 0.0], [0.1, 0.009, 0.0]])
        np.testing.assert_array_equal(
            select_elements(elements, _line(0.0), 0.004), [True, True, False]
        )

    def test_combine_across_antennas(self) -> None:
        """Should keep only elements selected for every antenna."""
        combined = combine_across_antennas(
            [np.array([True, True, False]), np.array([True, False, False])]
        )
        np.testing.assert_array_equal(combined, [True, False, False])
        with pytest.raises(ValueError):
            combine_across_antennas([])
        with pytest.raises(ValueError):
            combine_across_antennas([np.ones(2, bool), np.ones(3, bool)])

    def test_absorptive_complement(self) -> None:
        """Should absorb exactly where nothing reflects."""
        np.testing.assert_array_equal(
            absorptive_complement([2.0, 0.0, -2.0], 0.9), [0.0, 0.9, 0.0]
        )

    def test_even_subset(self) -> None:
        """Should pick floor(n p) evenly spread items."""
        assert even_subset(10, 0.5).sum() == 5
        assert even_subset(10, 0.0).sum() == 0
        assert even_subset(7, 1.0).all()
        with pytest.raises(ValueError):
            even_subset(10, 1.5)


class TestMaxZoneIndex:
    """Test the largest usable zone."""

    def test_stops_at_first_crowded_zone(self) -> None:
        """Should return the last zone whose successor is farther than s_R."""
        curves = {1: _line(0.0), 2: _line(0.01), 3: _line(0.014), 4: _line(0.017)}
        assert max_zone_index(curves, 0.005, 1) == 1

    def test_coupling_resolution(self) -> None:
        """Should compare zones a coarser step apart at a lower coupling resolution."""
        curves = {1: _line(0.0), 2: _line(0.01), 3: _line(0.014), 4: _line(0.017)}
        assert max_zone_index(curves, 0.005, 2, coupling_bits=1) == 4

    def test_first_zone_failing(self) -> None:
        """Should return 0 when even the first crossing zone is too crowded."""
        curves = {1: ZoneCurve(SPEC, []), 2: _line(0.0), 3: _line(0.002)}
        assert max_zone_index(curves, 0.005, 1) == 0

    def test_quarter_zone_steps(self) -> None:
        """Should step by a quarter zone at two bits unless told to couple coarser."""
        heights = [0.0, 0.008, 0.016, 0.022, 0.026, 0.029]
        curves = {m: _line(y) for m, y in enumerate(heights, start=1)}
        spacing = 0.005

        expected = 0
        for m in range(1, len(heights) + 1):
            gap = heights[m] - heights[m - 1] if m < len(heights) else math.inf
            if gap <= spacing:
                break
            expected = m
        assert expected == 3
        assert max_zone_index(curves, spacing, 2) == expected
        assert max_zone_index(curves, spacing, 2, coupling_bits=2) == expected
        assert max_zone_index(curves, spacing, 2, coupling_bits=1) == 6


class TestSwitchDesign:
    """Test the harvesting switch array."""

    def test_switch_folds_composite_phase(self, rng: np.random.Generator) -> None:
        """Should leave every switched composite phasor in the right half-plane."""
        distances = rng.uniform(10.0, 11.0, (2, 300))
        phases = np.array([0.4, -1.2])
        switch = eh_switch_design(distances, phases, 0.01)
        composite = np.sum(
            np.exp(1j * (phases[:, None] + 2 * np.pi * distances / 0.01)), axis=0
        )
        assert np.all((switch * composite).real >= -1e-9)
        assert set(np.unique(switch.real)) <= {-1.0, 1.0}

    def test_row_count_must_match_phases(self) -> None:
        """Should reject mismatched antenna counts."""
        with pytest.raises(ValueError):
            eh_switch_design(np.ones((3, 4)), np.zeros(2), 0.01)

    def test_designed_switch_harvests_coherently(
        self, small_scenario: ScenarioConfig
    ) -> None:
        """Should harvest close to the coherent bound with every element absorbing."""
        cfg = small_scenario
        channels = build_channels(cfg)
        precoder = mrt_precoder(channels.f)
        design = design_element_wise(cfg, 0, precoder, cfg.ue_position, chi=0.0)
        config = design.configuration
        incident = np.abs(channels.h[0].conj().T @ precoder.w)
        bound = 0.9 * (0.9 * incident.sum()) ** 2
        harvest = harvested_power(
            config.switch, config.absorptive, channels.h[0], precoder.w, 1.0, 0.0, 0.9
        )
        assert harvest >= 0.9 * bound


class TestZoneSelection:
    """Test zone layouts and the element assignment."""

    def test_residual_offsets_vanish_with_perfect_knowledge(
        self, default_scenario: ScenarioConfig
    ) -> None:
        """Should find no unexplained precoding phase at the true location."""
        cfg = default_scenario
        precoder = mrt_precoder(build_channels(cfg).f)
        offsets = residual_offsets(cfg, precoder, cfg.ue_position)
        np.testing.assert_allclose(offsets, 0.0, atol=1e-9)

    @pytest.mark.parametrize("resolution", [1, 2, 3, 4])
    def test_proportion_follows_half_angle(
        self, small_scenario: ScenarioConfig, resolution: int
    ) -> None:
        """Should reflect about 2^D chi / pi of the elements at every resolution."""
        cfg = dataclasses.replace(small_scenario, resolution_bits=resolution)
        precoder = mrt_precoder(build_channels(cfg).f)
        layout = build_zone_layout(cfg, 0, precoder, cfg.ue_position)
        half = assign_zones(layout, math.pi / 2 ** (resolution + 1))
        full = assign_zones(layout, math.pi / 2**resolution)
        assert 0.4 <= half.reflect_region.mean() <= 0.6
        assert full.reflect_region.mean() >= 0.9
        assert half.evaluations == full.evaluations > 0

    def test_finer_steps_than_element_spacing_leave_no_zone(
        self, small_scenario: ScenarioConfig, caplog
    ) -> None:
        """Should find no usable zone when quarter zones are compared directly."""
        cfg = dataclasses.replace(
            small_scenario, resolution_bits=2, zone_coupling_bits=None
        )
        precoder = mrt_precoder(build_channels(cfg).f)
        with caplog.at_level(logging.WARNING, logger="ewris"):
            layout = build_zone_layout(cfg, 0, precoder, cfg.ue_position)
        assert layout.max_step == 0
        assert "closer than the element spacing" in caplog.text
        assert not assign_zones(layout, math.pi / 8).reflect_region.any()

    def test_bands_follow_the_zones(self, default_scenario: ScenarioConfig) -> None:
        """Should lay one band per zone crossing the RIS, ordered by path excess."""
        cfg = default_scenario
        precoder = mrt_precoder(build_channels(cfg).f)
        layout = build_zone_layout(cfg, 0, precoder, cfg.ue_position)
        assignment = assign_zones(layout, cfg.effective_chi())
        elements = cfg.element_positions(0)
        bs, ue = cfg.bs_positions()[0], cfg.ue_position
        excess = (
            np.linalg.norm(elements - bs, axis=1)
            + np.linalg.norm(elements - ue, axis=1)
            - np.linalg.norm(ue - bs)
        )
        half_waves = 2 * excess / cfg.wavelength
        nearest = np.rint(half_waves).astype(int)
        offset = np.abs(half_waves - nearest)

        reflect = assignment.reflect_region
        steps = assignment.zone_step[reflect]
        order = np.argsort(excess[reflect])
        assert np.all(np.diff(steps[order]) >= 0)
        np.testing.assert_array_equal(steps, nearest[reflect])

        used = set(steps.tolist())
        core = {m for m in nearest[offset <= 0.15].tolist()}
        core = {m for m in core if m <= layout.max_step}
        assert core <= used <= set(nearest.tolist())
        assert used <= set(layout.crossing_steps(0))
        expected = [zone_phase(m / 2, 1) for m in steps.tolist()]
        np.testing.assert_allclose(assignment.phases[reflect], expected)
        assert on_phase_grid(assignment.phases[reflect], 1)

    def test_alignment_improves_with_resolution(
        self, single_antenna_scenario: ScenarioConfig
    ) -> None:
        """Should raise the mean per-element alignment at full selection as D grows."""
        alignment = []
        for resolution in (1, 2, 3, 4):
            cfg = dataclasses.replace(
                single_antenna_scenario, resolution_bits=resolution
            )
            precoder = mrt_precoder(build_channels(cfg).f)
            layout = build_zone_layout(cfg, 0, precoder, cfg.ue_position)
            assignment = assign_zones(layout, math.pi / 2**resolution)
            mask = assignment.reflect_region
            ideal = predicted_compensation(cfg, 0, precoder, cfg.ue_position)
            alignment.append(np.mean(np.cos(assignment.phases[mask] - ideal[mask])))
        assert all(b >= a for a, b in zip(alignment, alignment[1:]))
        assert alignment[0] == pytest.approx(2 / math.pi, abs=0.05)

    def test_reflective_proportion(self, default_scenario: ScenarioConfig) -> None:
        """Should reflect close to 2^D chi / pi of the elements."""
        cfg = default_scenario
        precoder = mrt_precoder(build_channels(cfg).f)
        layout = build_zone_layout(cfg, 0, precoder, cfg.ue_position)
        assert layout.max_step > 0
        assignment = assign_zones(layout, cfg.effective_chi())
        assert 0.35 <= assignment.reflect_region.mean() <= 0.65
        assert all(tau >= 0 for tau in assignment.thresholds.values())

    def test_used_zones_cross_the_aperture(
        self, default_scenario: ScenarioConfig
    ) -> None:
        """Should only assign zones whose curves cross the aperture."""
        cfg = default_scenario
        precoder = mrt_precoder(build_channels(cfg).f)
        layout = build_zone_layout(cfg, 0, precoder, cfg.ue_position)
        assignment = assign_zones(layout, cfg.effective_chi())
        used = set(np.unique(assignment.zone_step[assignment.reflect_region]))
        assert used
        assert used <= set(layout.crossing_steps(0))
        assert max(used) <= layout.max_step

    def test_zero_half_angle_selects_nothing(
        self, single_antenna_scenario: ScenarioConfig
    ) -> None:
        """Should reflect with no element at chi = 0."""
        cfg = single_antenna_scenario
        precoder = mrt_precoder(build_channels(cfg).f)
        layout = build_zone_layout(cfg, 0, precoder, cfg.ue_position)
        assert not assign_zones(layout, 0.0).reflect_region.any()
        with pytest.raises(ValueError, match="chi"):
            assign_zones(layout, 2.0)

    @pytest.mark.parametrize("resolution", [1, 2])
    def test_phase_deviation_bound(
        self, single_antenna_scenario: ScenarioConfig, resolution: int
    ) -> None:
        """Should keep every reflective phase within pi/2^D of ideal compensation."""
        cfg = dataclasses.replace(single_antenna_scenario, resolution_bits=resolution)
        precoder = mrt_precoder(build_channels(cfg).f)
        design = design_element_wise(
            cfg, 0, precoder, cfg.ue_position, chi=cfg.effective_chi()
        )
        config = design.configuration
        assert config.n_reflective > 0
        assert on_phase_grid(config.phases[config.reflective_mask], resolution)
        ideal = predicted_compensation(cfg, 0, precoder, cfg.ue_position)
        mask = config.reflective_mask
        deviation = np.abs(_wrapped(config.phases[mask] - ideal[mask]))
        assert deviation.max() <= math.pi / 2**resolution + 0.05

    def test_global_phase_invariance(
        self, single_antenna_scenario: ScenarioConfig
    ) -> None:
        """Should select the same elements when the channel estimate is rotated."""
        cfg = single_antenna_scenario
        f = build_channels(cfg).f
        selections = []
        for rotation in (0.0, 1.3):
            precoder = mrt_precoder(f * np.exp(1j * rotation))
            layout = build_zone_layout(cfg, 0, precoder, cfg.ue_position)
            selections.append(assign_zones(layout, cfg.effective_chi()).zone_step)
        np.testing.assert_array_equal(selections[0], selections[1])

    def test_continuous_phases_use_even_subset(
        self, small_scenario: ScenarioConfig
    ) -> None:
        """Should reflect 2 chi / pi of the elements with continuous phases."""
        cfg = dataclasses.replace(small_scenario, resolution_bits=None)
        precoder = mrt_precoder(build_channels(cfg).f)
        design = design_element_wise(cfg, 0, precoder, cfg.ue_position, chi=math.pi / 4)
        assert design.configuration.n_reflective == 200
        assert design.configuration.resolution is None
        assert design.assignment is None

    def test_layout_needs_finite_resolution(
        self, small_scenario: ScenarioConfig
    ) -> None:
        """Should refuse zone layouts for continuous phases."""
        cfg = dataclasses.replace(small_scenario, resolution_bits=None)
        precoder = mrt_precoder(build_channels(cfg).f)
        with pytest.raises(ValueError, match="finite phase resolution"):
            build_zone_layout(cfg, 0, precoder, cfg.ue_position)


class TestConfiguration:
    """Test the assembled RIS configuration."""

    def test_budget_and_complement(self, small_scenario: ScenarioConfig) -> None:
        """Should absorb outside the reflective set and balance the budget."""
        cfg = small_scenario
        channels = build_channels(cfg)
        precoder = mrt_precoder(channels.f)
        design = design_element_wise(cfg, 0, precoder, cfg.ue_position)
        config = design.configuration
        assert config.active
        assert design.sustainable
        np.testing.assert_array_equal(config.absorptive > 0, ~config.reflective_mask)
        assert 1.0 <= config.amplification <= cfg.power_model.rho_max
        budget = design.budget
        assert budget.surplus >= -1e-12
        total = budget.amplification + budget.circuit + budget.surplus
        assert total == pytest.approx(cfg.power_model.eta2 * budget.harvested)

    def test_unsustainable_ris_turns_absorptive(
        self, small_scenario: ScenarioConfig, caplog
    ) -> None:
        """Should go all-absorptive and inactive when the circuits are not covered."""
        cfg = dataclasses.replace(
            small_scenario, power_model=PowerModel(controller_power=10.0)
        )
        precoder = mrt_precoder(build_channels(cfg).f)
        with caplog.at_level(logging.WARNING, logger="ewris"):
            design = design_element_wise(cfg, 0, precoder, cfg.ue_position)
        assert design.configuration.n_reflective == 0
        assert not design.configuration.active
        assert not design.sustainable
        assert "absorptive" in caplog.text

    def test_configure_every_ris(self, small_scenario: ScenarioConfig) -> None:
        """Should return one configuration per RIS."""
        cfg = dataclasses.replace(small_scenario, panels=small_scenario.panels * 2)
        f = build_channels(cfg).f
        configs = configure_element_wise(cfg, f, cfg.ue_position)
        assert len(configs) == 2
        assert all(c.n_elements == 400 for c in configs)


def _predicted_snr(cfg: ScenarioConfig, precoder, design) -> float:
    predicted = predicted_channels(cfg, cfg.ue_position)
    return snr(
        predicted,
        precoder.w,
        [design.configuration],
        cfg.transmit_power_w,
        cfg.ue_noise_w,
        cfg.ris_noise_w,
    )


class TestAdaptedProportion:
    """Test the per-RIS search of the reflective fraction."""

    def test_adapted_fraction_beats_fixed_half_angle(
        self, small_scenario: ScenarioConfig
    ) -> None:
        """Should predict at least the SNR of the default half angle."""
        cfg = small_scenario
        assert cfg.adapts_proportion
        precoder = mrt_precoder(build_channels(cfg).f)
        adapted = design_element_wise(cfg, 0, precoder, cfg.ue_position)
        fixed = design_element_wise(
            cfg, 0, precoder, cfg.ue_position, chi=cfg.effective_chi()
        )
        assert fixed.sustainable
        assert adapted.sustainable
        assert 0 <= adapted.chi <= math.pi / 2**cfg.resolution_bits + 1e-12
        assert _predicted_snr(cfg, precoder, adapted) >= _predicted_snr(
            cfg, precoder, fixed
        ) * (1 - 1e-9)

    def test_explicit_half_angle_skips_search(
        self, small_scenario: ScenarioConfig
    ) -> None:
        """Should keep a given half angle as is."""
        cfg = small_scenario
        precoder = mrt_precoder(build_channels(cfg).f)
        design = design_element_wise(cfg, 0, precoder, cfg.ue_position, chi=0.3)
        assert design.chi == pytest.approx(0.3)
        assert design.assignment.chi == pytest.approx(0.3)

    def test_configured_half_angle_disables_search(
        self, small_scenario: ScenarioConfig
    ) -> None:
        """Should use the configured half angle when one is set."""
        cfg = dataclasses.replace(small_scenario, chi=0.2)
        assert not cfg.adapts_proportion
        precoder = mrt_precoder(build_channels(cfg).f)
        design = design_element_wise(cfg, 0, precoder, cfg.ue_position)
        assert design.chi == pytest.approx(0.2)

    def test_search_needs_ordered_steps(self, small_scenario: ScenarioConfig) -> None:
        """Should refuse a fine step coarser than the coarse one."""
        cfg = small_scenario
        precoder = mrt_precoder(build_channels(cfg).f)
        with pytest.raises(ValueError, match="steps"):
            adapt_proportion(cfg, 0, precoder, cfg.ue_position, steps=(0.01, 0.1))

    def test_unsustainable_fractions_fall_back(
        self, small_scenario: ScenarioConfig, caplog
    ) -> None:
        """Should warn and use the scenario half angle when nothing is sustainable."""
        cfg = dataclasses.replace(
            small_scenario, power_model=PowerModel(controller_power=10.0)
        )
        precoder = mrt_precoder(build_channels(cfg).f)
        with caplog.at_level(logging.WARNING, logger="ewris"):
            design = design_element_wise(cfg, 0, precoder, cfg.ue_position)
        assert "no reflective fraction is self-sustainable" in caplog.text
        assert design.chi == pytest.approx(cfg.effective_chi())
