"""Element-wise RIS simulator for location-aided near-field beamforming."""

import logging

from .beamforming import (
    Precoder,
    RisDesign,
    ZoneAssignment,
    ZoneLayout,
    assign_zones,
    build_zone_layout,
    configure_element_wise,
    decision_threshold,
    design_element_wise,
    eh_switch_design,
    max_zone_index,
    mrt_precoder,
    zone_phase,
)
from .channel import ChannelSet, build_channels, predicted_channels
from .config import (
    ScenarioConfig,
    ScenarioError,
    load_scenario,
    save_scenario,
)
from .experiments import (
    PRESET_NAMES,
    SweepResult,
    SweepSpec,
    emit_csv,
    preset,
    run_preset,
    run_sweep,
)
from .geometry import FresnelZoneSpec, ZoneCurve, curve_in_plane, intersect_plane
from .localization import LocationEstimate, estimate_location
from .metrics import (
    AsymptoticParams,
    optimal_chi,
    optimal_p,
    power_gain,
    snr,
    spectrum_efficiency,
)
from .ris import PowerBudget, PowerModel, RisConfiguration
from .strategies import Strategy, StrategyOutcome, optimize_factor, prepare_link

__all__ = [
    "AsymptoticParams",
    "ChannelSet",
    "FresnelZoneSpec",
    "LocationEstimate",
    "PRESET_NAMES",
    "PowerBudget",
    "PowerModel",
    "Precoder",
    "RisConfiguration",
    "RisDesign",
    "ScenarioConfig",
    "ScenarioError",
    "Strategy",
    "StrategyOutcome",
    "SweepResult",
    "SweepSpec",
    "ZoneAssignment",
    "ZoneCurve",
    "ZoneLayout",
    "assign_zones",
    "build_channels",
    "build_zone_layout",
    "configure_element_wise",
    "curve_in_plane",
    "decision_threshold",
    "design_element_wise",
    "eh_switch_design",
    "emit_csv",
    "estimate_location",
    "intersect_plane",
    "load_scenario",
    "max_zone_index",
    "mrt_precoder",
    "optimal_chi",
    "optimal_p",
    "optimize_factor",
    "power_gain",
    "predicted_channels",
    "prepare_link",
    "preset",
    "run_preset",
    "run_sweep",
    "save_scenario",
    "snr",
    "spectrum_efficiency",
    "zone_phase",
]

logger = logging.getLogger("ewris")
