"""Near-field line-of-sight channels, radiation patterns and estimation errors.

Channel vectors store link coefficients; the received signal is formed with
Hermitian transposes, y = (f^H + g^H Phi h^H) w. A coefficient has magnitude
sqrt(g_tx g_rx) lambda / (4 pi d) and phase -2 pi d / lambda.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.integrate import quad

from .config import ScenarioConfig, db_to_linear
from .geometry import as_point

logger = logging.getLogger("ewris")


def wallis_integral(q: float) -> float:
    """W_q = integral of cos^q over [0, pi/2]."""
    if q < 0:
        raise ValueError(f"Pattern exponent must be non-negative, got {q}")
    if float(q).is_integer():
        n = int(q)
        value = math.pi / 2 if n % 2 == 0 else 1.0
        for k in range(2 - n % 2, n + 1, 2):
            if k >= 2:
                value *= (k - 1) / k
        return value
    value, _ = quad(lambda t: np.cos(t) ** q, 0.0, math.pi / 2)
    return float(value)


def radiation_gain(theta: npt.ArrayLike, q: float):
    """Element gain 4 pi cos^q(theta) / (2 pi W_q); zero behind the element."""
    theta = np.asarray(theta, dtype=float)
    front = (theta >= 0) & (theta <= math.pi / 2)
    cos_theta = np.clip(np.cos(theta), 0.0, 1.0)
    gain = np.where(front, 2 * cos_theta**q / wallis_integral(q), 0.0)
    return float(gain) if gain.ndim == 0 else gain


@dataclass(frozen=True)
class AntennaPattern:
    """Gain pattern of one node class.

    Attributes:
        boresight: Pointing direction; ``None`` means isotropic.
        exponent: Pattern exponent q.
        peak_dbi: Boresight gain (dBi). ``None`` uses ``radiation_gain``;
            otherwise the gain is peak * cos^q(theta).
    """

    boresight: tuple[float, float, float] | None = None
    exponent: float = 0.0
    peak_dbi: float | None = 0.0

    def gain(self, directions: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Gain towards each direction of shape (n, 3)."""
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        if self.boresight is None:
            peak = 1.0 if self.peak_dbi is None else db_to_linear(self.peak_dbi)
            return np.full(len(d), peak)
        axis = np.asarray(self.boresight, dtype=float)
        axis = axis / np.linalg.norm(axis)
        cos_theta = (d @ axis) / np.linalg.norm(d, axis=1)
        theta = np.arccos(np.clip(cos_theta, -1.0, 1.0))
        if self.peak_dbi is None:
            return np.asarray(radiation_gain(theta, self.exponent), dtype=float)
        front = cos_theta >= 0
        return np.where(
            front,
            db_to_linear(self.peak_dbi) * np.clip(cos_theta, 0.0, 1.0) ** self.exponent,
            0.0,
        )


def bs_pattern(cfg: ScenarioConfig) -> AntennaPattern:
    bs = cfg.base_station
    return AntennaPattern(bs.boresight, bs.pattern_exponent, bs.gain_dbi)


def ris_pattern(cfg: ScenarioConfig, k: int = 0) -> AntennaPattern:
    panel = cfg.panels[k]
    return AntennaPattern(panel.normal, panel.pattern_exponent, panel.gain_dbi)


def ue_pattern(cfg: ScenarioConfig) -> AntennaPattern:
    return AntennaPattern(None, 0.0, cfg.user.gain_dbi)


def los_coefficient(
    p1: npt.ArrayLike,
    p2: npt.ArrayLike,
    g_tx: float,
    g_rx: float,
    wavelength: float,
) -> complex:
    """Free-space coefficient between two points.

    Raises:
        ValueError: If the points coincide or the wavelength is not positive.
    """
    p1 = as_point(p1, "p1")
    p2 = as_point(p2, "p2")
    if wavelength <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    d = float(np.linalg.norm(p1 - p2))
    if d == 0:
        raise ValueError("Coincident endpoints: the free-space channel is undefined")
    amplitude = math.sqrt(g_tx * g_rx) * wavelength / (4 * math.pi * d)
    return complex(amplitude * np.exp(-2j * math.pi * d / wavelength))


def los_matrix(
    tx: npt.ArrayLike,
    rx: npt.ArrayLike,
    tx_pattern: AntennaPattern,
    rx_pattern: AntennaPattern,
    wavelength: float,
) -> npt.NDArray[np.complex128]:
    """Coefficients between every transmitter and receiver, shape (n_tx, n_rx)."""
    tx = np.atleast_2d(np.asarray(tx, dtype=float))
    rx = np.atleast_2d(np.asarray(rx, dtype=float))
    diff = rx[None, :, :] - tx[:, None, :]
    d = np.linalg.norm(diff, axis=2)
    if np.any(d == 0):
        raise ValueError("Coincident endpoints: the free-space channel is undefined")
    flat = diff.reshape(-1, 3)
    g_tx = tx_pattern.gain(flat).reshape(d.shape)
    g_rx = rx_pattern.gain(-flat).reshape(d.shape)
    amplitude = np.sqrt(g_tx * g_rx) * wavelength / (4 * math.pi * d)
    return amplitude * np.exp(-2j * math.pi * d / wavelength)


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Channels of one slot.

    Attributes:
        f: Direct BS-UE channel, shape (N_T,).
        h: BS-RIS channels, one (N_T, N_R) matrix per RIS.
        g: RIS-UE channels, one (N_R,) vector per RIS.
    """

    f: npt.NDArray[np.complex128]
    h: tuple[npt.NDArray[np.complex128], ...]
    g: tuple[npt.NDArray[np.complex128], ...]

    def __post_init__(self) -> None:
        n_t = self.f.shape[0]
        if len(self.h) != len(self.g):
            raise ValueError("h and g must hold one entry per RIS")
        for k, (h, g) in enumerate(zip(self.h, self.g)):
            if h.shape != (n_t, g.shape[0]):
                raise ValueError(
                    f"RIS {k}: h has shape {h.shape}, expected ({n_t}, {g.shape[0]})"
                )
        arrays = (self.f, *self.h, *self.g)
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValueError("Channel coefficients must be finite")

    @property
    def n_ris(self) -> int:
        return len(self.h)

    def with_direct(self, f: npt.NDArray[np.complex128]) -> "ChannelSet":
        return ChannelSet(f=np.asarray(f, dtype=complex), h=self.h, g=self.g)


def nlos_component(
    cfg: ScenarioConfig,
    rician_factor_db: float | None,
    rng: np.random.Generator | None,
    los: npt.NDArray[np.complex128] | None = None,
) -> npt.NDArray[np.complex128]:
    """Scattered part of the direct link, one CN entry per antenna.

    Each entry has power ``|f_LoS|^2 / K`` for Rician factor K; an infinite
    (or ``None``) factor gives the zero vector.
    """
    n_t = cfg.n_antennas
    if rician_factor_db is None or math.isinf(rician_factor_db):
        return np.zeros(n_t, dtype=complex)
    if rng is None:
        raise ValueError("A random generator is required for a finite Rician factor")
    if los is None:
        los = direct_los(cfg)
    power = np.abs(los) ** 2 / db_to_linear(rician_factor_db)
    draw = rng.standard_normal(n_t) + 1j * rng.standard_normal(n_t)
    return np.sqrt(power / 2) * draw


def direct_los(
    cfg: ScenarioConfig, ue: npt.ArrayLike | None = None
) -> npt.NDArray[np.complex128]:
    ue = cfg.ue_position if ue is None else as_point(ue, "ue")
    return los_matrix(
        cfg.bs_positions(), ue, bs_pattern(cfg), ue_pattern(cfg), cfg.wavelength
    )[:, 0]


def build_channels(
    cfg: ScenarioConfig,
    loc_noise: npt.ArrayLike | None = None,
    rng: np.random.Generator | None = None,
) -> ChannelSet:
    """Channels for the scenario.

    Without ``loc_noise`` these are the physical channels at the true UE
    position. With ``loc_noise`` the UE-side links are evaluated at the
    displaced position, which is what a node relying on the location estimate
    predicts. BS-RIS links never depend on the UE. The direct link receives the
    NLoS component of ``cfg.rician_factor_db`` when ``rng`` is given.
    """
    ue = cfg.ue_position
    if loc_noise is not None:
        ue = ue + as_point(loc_noise, "loc_noise")
    channels = predicted_channels(cfg, ue)
    if cfg.rician_factor_db is None:
        return channels
    nlos = nlos_component(cfg, cfg.rician_factor_db, rng, los=channels.f)
    return channels.with_direct(channels.f + nlos)


def predicted_channels(cfg: ScenarioConfig, ue_hat: npt.ArrayLike) -> ChannelSet:
    """Line-of-sight channels a node predicts from a UE location estimate."""
    ue_hat = as_point(ue_hat, "ue_hat")
    bs = cfg.bs_positions()
    h, g = [], []
    for k in range(len(cfg.panels)):
        elements = cfg.element_positions(k)
        pattern = ris_pattern(cfg, k)
        h.append(los_matrix(bs, elements, bs_pattern(cfg), pattern, cfg.wavelength))
        g.append(
            los_matrix(elements, ue_hat, pattern, ue_pattern(cfg), cfg.wavelength)[:, 0]
        )
    return ChannelSet(f=direct_los(cfg, ue_hat), h=tuple(h), g=tuple(g))


def apply_ce_error(
    f: npt.ArrayLike, sigma_ce: float, rng: np.random.Generator
) -> npt.NDArray[np.complex128]:
    """Add estimation error with per-entry std ``sigma_ce * ||f|| / sqrt(N_T)``."""
    f = np.asarray(f, dtype=complex)
    if sigma_ce < 0:
        raise ValueError(f"sigma_ce must be non-negative, got {sigma_ce}")
    if sigma_ce == 0:
        return f.copy()
    std = sigma_ce * np.linalg.norm(f) / math.sqrt(f.shape[0])
    draw = rng.standard_normal(f.shape) + 1j * rng.standard_normal(f.shape)
    return f + std / math.sqrt(2) * draw
