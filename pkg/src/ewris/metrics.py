"""Link metrics and the asymptotic analysis of the reflective proportion."""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.optimize import brentq

from .channel import ChannelSet, bs_pattern, los_coefficient, ris_pattern
from .config import ScenarioConfig
from .ris import PowerModel, RisConfiguration

logger = logging.getLogger("ewris")


def received_amplitude(
    channels: ChannelSet,
    w: npt.ArrayLike,
    configs: Sequence[RisConfiguration],
) -> complex:
    """Effective channel (f^H + sum_k g_k^H Phi_k h_k^H) w."""
    w = np.asarray(w, dtype=complex)
    if len(configs) != channels.n_ris:
        raise ValueError(
            f"Expected {channels.n_ris} RIS configurations, got {len(configs)}"
        )
    total = np.vdot(channels.f, w)
    for k, config in enumerate(configs):
        h, g = channels.h[k], channels.g[k]
        if config.n_elements != g.shape[0]:
            raise ValueError(
                f"RIS {k}: configuration has {config.n_elements} elements, "
                f"channel has {g.shape[0]}"
            )
        total += np.sum(g.conj() * config.reflective * (h.conj().T @ w))
    return complex(total)


def snr(
    channels: ChannelSet,
    w: npt.ArrayLike,
    configs: Sequence[RisConfiguration],
    transmit_power: float,
    ue_noise: float,
    ris_noise: float,
    rng: np.random.Generator | None = None,
) -> float:
    """Received SNR of the single-stream downlink.

    The amplified RIS noise contributes ``sum_k ||g_k^H Phi_k||^2 sigma_r^2``
    in expectation. With ``rng`` one realization of both noise terms is drawn
    instead and the instantaneous ratio is returned.

    Args:
        channels: True channels of the slot.
        w: Unit-norm precoder.
        configs: One configuration per RIS.
        transmit_power: P_t (W).
        ue_noise: sigma_u^2 (W).
        ris_noise: sigma_r^2 (W).
        rng: Optional generator for sampled noise.
    """
    if transmit_power < 0 or ue_noise <= 0 or ris_noise < 0:
        raise ValueError("Powers must be non-negative and the UE noise positive")
    signal = abs(received_amplitude(channels, w, configs)) ** 2 * transmit_power
    if rng is None:
        amplified = sum(
            float(np.sum(np.abs(g) ** 2 * np.abs(config.reflective) ** 2))
            for g, config in zip(channels.g, configs)
        )
        return float(signal / (amplified * ris_noise + ue_noise))

    noise = 0j
    for g, config in zip(channels.g, configs):
        n_k = np.sqrt(ris_noise / 2) * (
            rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
        )
        noise += np.sum(g.conj() * config.reflective * n_k)
    draw = rng.standard_normal() + 1j * rng.standard_normal()
    noise += np.sqrt(ue_noise / 2) * draw
    return float(signal / abs(noise) ** 2)


def spectrum_efficiency(gamma: float) -> float:
    """log2(1 + gamma) in bit/s/Hz."""
    if gamma < 0:
        raise ValueError(f"SNR must be non-negative, got {gamma}")
    return float(np.log2(1.0 + gamma))


def energy_efficiency(
    spectrum_eff: float, transmit_power: float, external_power: float = 0.0
) -> float:
    """Spectrum efficiency per watt of total supplied power (bit/s/Hz/W)."""
    total = transmit_power + external_power
    if total <= 0:
        raise ValueError(f"Total power must be positive, got {total}")
    return spectrum_eff / total


@dataclass(frozen=True)
class AsymptoticParams:
    """Large-array model of one RIS under a uniform spherical wave.

    Attributes:
        absorptive_efficiency: Absorptive amplitude efficiency.
        eta1: RF-to-DC efficiency.
        eta2: DC supply efficiency.
        n_elements: N_R.
        channel_gain: Uniform BS-to-element amplitude h, transmit power included.
        controller_power: P_c (W).
        dc_power: P_DC (W).
        element_power: f_D (W).
        rho: Amplitude ratio of the amplifiers.
    """

    absorptive_efficiency: float
    eta1: float
    eta2: float
    n_elements: int
    channel_gain: float
    controller_power: float = 0.0
    dc_power: float = 0.0
    element_power: float = 0.0
    rho: float = 10.0

    def __post_init__(self) -> None:
        for name in ("absorptive_efficiency", "eta1", "eta2"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {value}")
        if self.n_elements < 1:
            raise ValueError(f"n_elements must be positive, got {self.n_elements}")
        if not self.channel_gain > 0:
            raise ValueError(f"channel_gain must be positive, got {self.channel_gain}")
        for name in ("controller_power", "dc_power", "element_power"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.rho < 1:
            raise ValueError(f"rho must be at least 1, got {self.rho}")

    @property
    def efficiency(self) -> float:
        """Combined harvesting efficiency rho_a * eta1 * eta2."""
        return self.absorptive_efficiency * self.eta1 * self.eta2

    @property
    def circuit_power(self) -> float:
        per_element = self.element_power * self.n_elements
        return self.controller_power + self.dc_power + per_element

    @classmethod
    def from_model(
        cls,
        model: PowerModel,
        n_elements: int,
        channel_gain: float,
        resolution: int | None = 1,
    ) -> "AsymptoticParams":
        return cls(
            absorptive_efficiency=model.absorptive_efficiency,
            eta1=model.eta1,
            eta2=model.eta2,
            n_elements=n_elements,
            channel_gain=channel_gain,
            controller_power=model.controller_power,
            dc_power=model.dc_power,
            element_power=model.element_power(resolution),
            rho=model.rho_max,
        )


def power_gain(p: npt.ArrayLike, params: AsymptoticParams):
    """Asymptotic power gain as a function of the reflective proportion p.

    ``p (x (1 - p))^2 N + C p / (N h^2)`` with x the combined efficiency and
    C the circuit consumption.
    """
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p must lie in [0, 1]")
    n, h = params.n_elements, params.channel_gain
    harvest_term = p * (params.efficiency * (1 - p)) ** 2 * n
    gain = harvest_term + params.circuit_power * p / (n * h**2)
    return float(gain) if gain.ndim == 0 else gain


def optimal_p(params: AsymptoticParams) -> float | None:
    """Closed-form optimal proportion; ``None`` when the discriminant is negative."""
    n, h = params.n_elements, params.channel_gain
    discriminant = (n * h) ** 2 - params.circuit_power
    if discriminant < 0:
        return None
    return 2 / 3 - math.sqrt(discriminant) / (3 * n * h * params.efficiency)


def optimal_p_limit(efficiency: float) -> float:
    """Large-array limit 2/3 - 1/(3 x) of the optimal proportion."""
    if not 0 < efficiency <= 1:
        raise ValueError(f"efficiency must be in (0, 1], got {efficiency}")
    return 2 / 3 - 1 / (3 * efficiency)


def stationary_p(params: AsymptoticParams) -> float | None:
    """Interior maximizer of :func:`power_gain`.

    Smaller root of ``3 p^2 - 4 p + 1 + k = 0`` with ``k = C / (N h x)^2``;
    ``None`` when ``k > 1/3`` and the gain increases over the whole interval.
    """
    k = params.circuit_power / (
        params.n_elements * params.channel_gain * params.efficiency
    ) ** 2
    if 1 - 3 * k < 0:
        return None
    return (2 - math.sqrt(1 - 3 * k)) / 3


def optimal_chi(params: AsymptoticParams, resolution: int | None) -> float | None:
    """Half angle realizing the optimal proportion, p * pi / 2^D.

    Continuous phases use the pi / 2 scale of the evenly spread selection.
    """
    p = optimal_p(params)
    if p is None:
        return None
    scale = 2 if resolution is None else 2**resolution
    return min(max(p, 0.0), 1.0) * math.pi / scale


def max_power_gain(params: AsymptoticParams) -> float:
    """Largest asymptotic gain (rho * p_limit)^2; zero when no proportion helps."""
    p = max(0.0, optimal_p_limit(params.efficiency))
    return (params.rho * p) ** 2


@dataclass(frozen=True)
class SustainabilityRegion:
    """Proportions for which the harvest covers the circuits.

    Attributes:
        p_max: Supremum of the feasible interval [0, p_max); ``None`` when empty.
        p_opt: Closed-form optimal proportion, if defined.
        p_opt_feasible: Whether ``p_opt`` lies inside the interval.
    """

    p_max: float | None
    p_opt: float | None
    p_opt_feasible: bool

    @property
    def empty(self) -> bool:
        return self.p_max is None

    def contains(self, p: float) -> bool:
        return self.p_max is not None and 0 <= p < self.p_max


def sustainability_boundary(params: AsymptoticParams) -> SustainabilityRegion:
    """Solve ``(x (1 - p) N h)^2 > C`` for p by bisection."""
    x, n, h = params.efficiency, params.n_elements, params.channel_gain
    circuit = params.circuit_power

    def margin(p: float) -> float:
        return (x * (1 - p) * n * h) ** 2 - circuit

    p_opt = optimal_p(params)
    if margin(0.0) <= 0:
        logger.warning("No reflective proportion keeps the RIS self-sustainable")
        return SustainabilityRegion(p_max=None, p_opt=p_opt, p_opt_feasible=False)
    p_max = 1.0 if circuit == 0 else float(brentq(margin, 0.0, 1.0, xtol=1e-12))
    feasible = p_opt is not None and 0 <= p_opt < p_max
    return SustainabilityRegion(p_max=p_max, p_opt=p_opt, p_opt_feasible=feasible)


def upd(gamma_th: float, side: float) -> float:
    """Uniform-power distance for threshold ``gamma_th`` and aperture ``side``."""
    if not 0 < gamma_th < 1:
        raise ValueError(f"gamma_th must be in (0, 1), got {gamma_th}")
    if side <= 0:
        raise ValueError(f"side must be positive, got {side}")
    g = gamma_th ** (2 / 3)
    return math.sqrt(g / (1 - g)) * side / 2


def rayleigh_distance(side: float, wavelength: float) -> float:
    """2 L^2 / lambda."""
    if side <= 0 or wavelength <= 0:
        raise ValueError("side and wavelength must be positive")
    return 2 * side**2 / wavelength


def scenario_asymptotic_params(cfg: ScenarioConfig, k: int = 0) -> AsymptoticParams:
    """Asymptotic model of RIS ``k`` with h taken at the array centers."""
    panel = cfg.panels[k]
    bs_center = np.asarray(cfg.base_station.center, dtype=float)
    ris_center = np.asarray(panel.center, dtype=float)
    direction = ris_center - bs_center
    g_tx = float(bs_pattern(cfg).gain(direction)[0])
    g_rx = float(ris_pattern(cfg, k).gain(-direction)[0])
    coefficient = los_coefficient(bs_center, ris_center, g_tx, g_rx, cfg.wavelength)
    channel_gain = math.sqrt(cfg.transmit_power_w) * abs(coefficient)
    return AsymptoticParams.from_model(
        cfg.power_model, panel.n_elements, channel_gain, cfg.resolution_bits
    )


def scenario_chi(cfg: ScenarioConfig, k: int = 0) -> float:
    """Half angle for RIS ``k``: the configured one, or the asymptotic optimum."""
    if not cfg.use_optimal_chi:
        return cfg.effective_chi()
    chi = optimal_chi(scenario_asymptotic_params(cfg, k), cfg.resolution_bits)
    if chi is None:
        logger.warning(
            f"RIS {k}: no interior optimal proportion; using the default half angle"
        )
        return cfg.effective_chi()
    return chi
