"""Element-wise RIS state and the energy-harvesting power budget."""

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
import numpy.typing as npt

logger = logging.getLogger("ewris")

Technology = Literal["pin", "varactor"]

_GRID_TOL = 1e-9


@dataclass(frozen=True)
class PowerModel:
    """Power-conversion and consumption parameters of a self-sustainable RIS.

    Attributes:
        eta1: RF-to-DC conversion efficiency of the harvester.
        eta2: Efficiency of the DC supply feeding the RIS circuits.
        absorptive_efficiency: Amplitude efficiency of an absorptive element.
        controller_power: Controller consumption P_c (W).
        dc_power: DC biasing consumption P_DC (W).
        technology: Phase-shifter technology; ``None`` means no per-element cost.
        pin_power_per_bit: PIN-diode consumption per element and bit (W).
        varactor_power: Varactor consumption per element (W).
        rho_max: Amplitude cap of the amplifying circuits.
    """

    eta1: float = 0.9
    eta2: float = 0.9
    absorptive_efficiency: float = 0.9
    controller_power: float = 0.0
    dc_power: float = 0.0
    technology: Technology | None = None
    pin_power_per_bit: float = 0.33e-3
    varactor_power: float = 1e-3
    rho_max: float = 10.0

    def __post_init__(self) -> None:
        for name in ("eta1", "eta2", "absorptive_efficiency"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {value}")
        for name in (
            "controller_power",
            "dc_power",
            "pin_power_per_bit",
            "varactor_power",
        ):
            value = getattr(self, name)
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")
        if self.rho_max < 1:
            raise ValueError(f"rho_max must be at least 1, got {self.rho_max}")
        if self.technology not in (None, "pin", "varactor"):
            raise ValueError(
                f"technology must be 'pin', 'varactor' or None, got {self.technology!r}"
            )

    def element_power(self, resolution: int | None) -> float:
        """Per-element consumption f_D for phase resolution ``resolution`` bits."""
        if self.technology is None:
            return 0.0
        if self.technology == "varactor":
            return self.varactor_power
        if resolution is None:
            raise ValueError("PIN-diode elements need a finite phase resolution")
        return self.pin_power_per_bit * resolution

    def circuit_power(
        self, n_elements: int, resolution: int | None, shifters: int = 1
    ) -> float:
        """P_c + P_DC + f_D * N_R, with ``shifters`` phase shifters per element.

        A power-splitting element drives two phase shifters (one per branch).
        """
        if shifters < 1:
            raise ValueError(f"shifters must be positive, got {shifters}")
        return (
            self.controller_power
            + self.dc_power
            + shifters * self.element_power(resolution) * n_elements
        )


def discrete_phase_set(resolution: int) -> npt.NDArray[np.float64]:
    """The 2^D uniformly spaced phase shifts {2 pi m / 2^D}."""
    if resolution < 1:
        raise ValueError(f"Phase resolution must be at least 1 bit, got {resolution}")
    levels = 2**resolution
    return 2 * np.pi * np.arange(levels) / levels


def quantize_phase(theta: npt.ArrayLike, resolution: int | None):
    """Nearest grid phase in [0, 2 pi); exact midpoints round up.

    ``resolution=None`` only wraps into [0, 2 pi).
    """
    theta = np.asarray(theta, dtype=float)
    if resolution is None:
        wrapped = np.mod(theta, 2 * np.pi)
    else:
        if resolution < 1:
            raise ValueError(
                f"Phase resolution must be at least 1 bit, got {resolution}"
            )
        levels = 2**resolution
        step = 2 * np.pi / levels
        index = np.mod(np.floor(theta / step + 0.5), levels)
        wrapped = index * step
    return float(wrapped) if wrapped.ndim == 0 else wrapped


def on_phase_grid(phases: npt.ArrayLike, resolution: int) -> bool:
    steps = np.asarray(phases, dtype=float) * 2**resolution / (2 * np.pi)
    return bool(np.all(np.abs(steps - np.round(steps)) <= _GRID_TOL))


@dataclass(frozen=True, eq=False)
class RisConfiguration:
    """Reflective, absorptive and switch state of one RIS for a time slot.

    Attributes:
        reflective: Diagonal of the reflective matrix (complex, length N_R).
        absorptive: Diagonal of the absorptive matrix (0 or the absorptive
            efficiency).
        switch: Diagonal of the harvesting switch array, +1 or -1.
        resolution: Phase resolution in bits, ``None`` for continuous phases.
        active: False when the RIS could not power itself and went all-absorptive.
    """

    reflective: npt.NDArray[np.complex128]
    absorptive: npt.NDArray[np.float64]
    switch: npt.NDArray[np.complex128]
    resolution: int | None = 1
    active: bool = True

    def __post_init__(self) -> None:
        reflective = np.asarray(self.reflective, dtype=complex)
        absorptive = np.asarray(self.absorptive, dtype=float)
        switch = np.asarray(self.switch, dtype=complex)
        object.__setattr__(self, "reflective", reflective)
        object.__setattr__(self, "absorptive", absorptive)
        object.__setattr__(self, "switch", switch)

        n = reflective.shape[0]
        if reflective.ndim != 1 or absorptive.shape != (n,) or switch.shape != (n,):
            raise ValueError(
                "reflective, absorptive and switch must be vectors of equal length"
            )
        if not np.all(np.isfinite(reflective)):
            raise ValueError("Reflective coefficients must be finite")

        mask = np.abs(reflective) > 0
        if np.any(mask):
            magnitude = np.abs(reflective[mask])
            if np.ptp(magnitude) > 1e-9 * magnitude.max():
                raise ValueError("All reflective elements must share one amplitude")
            if self.resolution is not None and not on_phase_grid(
                np.mod(np.angle(reflective[mask]), 2 * np.pi), self.resolution
            ):
                raise ValueError(
                    f"Reflective phases must lie on the {self.resolution}-bit grid"
                )

        levels = np.unique(absorptive[absorptive != 0])
        if len(levels) > 1 or np.any(levels < 0):
            raise ValueError("Absorptive entries must be 0 or one efficiency value")
        if np.any(mask & (absorptive != 0)):
            raise ValueError("An element cannot be reflective and absorptive at once")

        if not (
            np.allclose(switch.imag, 0, atol=1e-12)
            and np.allclose(np.abs(switch.real), 1, atol=1e-12)
        ):
            raise ValueError("Switch phases must be 0 or pi")

    @property
    def n_elements(self) -> int:
        return int(self.reflective.shape[0])

    @property
    def reflective_mask(self) -> npt.NDArray[np.bool_]:
        return np.abs(self.reflective) > 0

    @property
    def n_reflective(self) -> int:
        return int(np.count_nonzero(self.reflective_mask))

    @property
    def proportion(self) -> float:
        """Fraction of reflective elements."""
        return self.n_reflective / self.n_elements

    @property
    def amplification(self) -> float:
        mask = self.reflective_mask
        return float(np.abs(self.reflective[mask][0])) if np.any(mask) else 0.0

    @property
    def phases(self) -> npt.NDArray[np.float64]:
        """Reflective phases in [0, 2 pi); zero for non-reflective elements."""
        return np.where(
            self.reflective_mask, np.mod(np.angle(self.reflective), 2 * np.pi), 0.0
        )

    @classmethod
    def all_absorptive(
        cls,
        switch: npt.ArrayLike,
        absorptive_efficiency: float,
        resolution: int | None,
        active: bool = True,
    ) -> "RisConfiguration":
        switch = np.asarray(switch, dtype=complex)
        n = switch.shape[0]
        return cls(
            reflective=np.zeros(n, dtype=complex),
            absorptive=np.full(n, absorptive_efficiency),
            switch=switch,
            resolution=resolution,
            active=active,
        )


def harvested_power(
    switch: npt.ArrayLike,
    absorptive: npt.ArrayLike,
    h: npt.ArrayLike,
    w: npt.ArrayLike,
    transmit_power: float,
    ris_noise_power: float,
    eta1: float,
    rng: np.random.Generator | None = None,
) -> float:
    """Power collected by the harvester of one RIS (W).

    The absorbed signals are combined coherently through the switch array.
    Without ``rng`` the receiver noise contributes its expected power; with
    ``rng`` one noise sample is drawn.

    Args:
        switch: Switch diagonal (N_R,).
        absorptive: Absorptive diagonal (N_R,).
        h: BS-to-RIS channel, shape (N_T, N_R).
        w: Unit-norm precoder (N_T,).
        transmit_power: P_t (W).
        ris_noise_power: sigma_r^2 (W).
        eta1: RF-to-DC conversion efficiency.
        rng: Optional generator for Monte Carlo noise.
    """
    switch = np.asarray(switch, dtype=complex)
    absorptive = np.asarray(absorptive, dtype=float)
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    w = np.asarray(w, dtype=complex)
    if h.shape != (w.shape[0], switch.shape[0]) or absorptive.shape != switch.shape:
        raise ValueError(
            f"Dimension mismatch: h {h.shape}, w {w.shape}, switch {switch.shape}, "
            f"absorptive {absorptive.shape}"
        )
    incident = h.conj().T @ w
    signal = np.sum(switch * absorptive * incident) * np.sqrt(transmit_power)
    if rng is None:
        return float(eta1 * (abs(signal) ** 2 + ris_noise_power))
    draw = rng.standard_normal() + 1j * rng.standard_normal()
    noise = np.sqrt(ris_noise_power / 2) * draw
    return float(eta1 * abs(signal + noise) ** 2)


def available_power(
    harvested: float,
    model: PowerModel,
    n_elements: int,
    resolution: int | None = None,
    shifters: int = 1,
) -> float:
    """Power left for the amplifiers, eta2 P_k - P_c - P_DC - f_D N_R (may be < 0)."""
    return model.eta2 * harvested - model.circuit_power(
        n_elements, resolution, shifters
    )


def sustainability_check(available: float) -> bool:
    """Strict self-sustainability: the available power must be positive."""
    return available > 0


def feasible_amplification(
    available: float,
    n_reflective: int,
    incident_amplitude: float,
    rho_max: float,
) -> float:
    """Largest amplitude ratio the available power can feed, capped at ``rho_max``.

    Each reflective element amplifying by ``rho`` consumes
    ``(rho**2 - 1) * incident_amplitude**2``; the result is never below 1.
    """
    if n_reflective < 1:
        raise ValueError("Amplification is undefined without reflective elements")
    if available <= 0:
        return 1.0
    if incident_amplitude <= 0:
        return float(rho_max)
    return float(
        min(rho_max, np.sqrt(1 + available / (n_reflective * incident_amplitude**2)))
    )


@dataclass(frozen=True)
class PowerBudget:
    """Energy balance of one RIS: eta2 * harvested = amplification + circuit + surplus.

    Attributes:
        harvested: Harvested power P_k (W).
        available: Power left after the circuits, before amplification (W).
        amplification: Power drawn by the amplifiers (W).
        circuit: Controller, biasing and per-element consumption (W).
        surplus: Unused power; negative when the circuits are not covered (W).
    """

    harvested: float
    available: float
    amplification: float
    circuit: float
    surplus: float

    @property
    def sustainable(self) -> bool:
        """Circuits strictly covered and the amplifiers within what is left."""
        tolerance = 1e-9 * max(abs(self.available), 1e-30)
        return sustainability_check(self.available) and self.surplus >= -tolerance

    @classmethod
    def settle(
        cls,
        harvested: float,
        model: PowerModel,
        n_elements: int,
        resolution: int | None,
        amplification: float,
        shifters: int = 1,
    ) -> "PowerBudget":
        circuit = model.circuit_power(n_elements, resolution, shifters)
        available = model.eta2 * harvested - circuit
        return cls(
            harvested=harvested,
            available=available,
            amplification=amplification,
            circuit=circuit,
            surplus=available - amplification,
        )


def amplification_power(
    rho: float, n_reflective: int, incident_amplitude: float
) -> float:
    """Power drawn by ``n_reflective`` amplifiers at ratio ``rho``."""
    return max(0.0, (rho**2 - 1) * n_reflective * incident_amplitude**2)
