"""Scenario configuration: dataclasses, defaults and JSON persistence."""

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt

from .geometry import as_point
from .ris import PowerModel

logger = logging.getLogger("ewris")

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_WAVELENGTH = 0.01


class ScenarioError(ValueError):
    """A scenario document failed validation."""


def db_to_linear(value_db: float) -> float:
    return 10 ** (value_db / 10)


def dbm_to_watts(value_dbm: float) -> float:
    return 10 ** (value_dbm / 10) / 1000


def watts_to_dbm(value_w: float) -> float:
    return 10 * math.log10(value_w * 1000)


def grid_shape(n_elements: int) -> tuple[int, int]:
    """Factor pair ``(rows, cols)`` of ``n_elements`` closest to square."""
    n = int(n_elements)
    if n < 1:
        raise ValueError(f"N_R must be a positive integer, got {n_elements}")
    rows = next(r for r in range(math.isqrt(n), 0, -1) if n % r == 0)
    return rows, n // rows


def _vector(value: Any, name: str) -> tuple[float, float, float]:
    point = as_point(value, name)
    return (float(point[0]), float(point[1]), float(point[2]))


def _in_plane_axes(normal: npt.NDArray[np.float64]) -> tuple[np.ndarray, np.ndarray]:
    e3 = normal / np.linalg.norm(normal)
    e1 = np.array([1.0, 0.0, 0.0]) - e3[0] * e3
    if np.linalg.norm(e1) < 1e-9:
        e1 = np.array([0.0, 1.0, 0.0]) - e3[1] * e3
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(e3, e1)


@dataclass(frozen=True)
class BaseStationConfig:
    """Base-station array.

    Attributes:
        center: Array center (m).
        n_antennas: Number of antennas N_T.
        spacing: Antenna spacing (m); ``None`` means half a wavelength.
        axis: Array axis; ``None`` places the array broadside to the UE
            (horizontal and perpendicular to the BS-UE ground direction).
        positions: Explicit antenna positions, overriding the three fields above.
        gain_dbi: Boresight gain (dBi); ``None`` uses the cos^q pattern's own peak.
        pattern_exponent: Pattern exponent q.
        boresight: Pointing direction of the antennas.
    """

    center: tuple[float, float, float] = (0.0, 0.0, 15.0)
    n_antennas: int = 2
    spacing: float | None = None
    axis: tuple[float, float, float] | None = None
    positions: tuple[tuple[float, float, float], ...] | None = None
    gain_dbi: float | None = 15.0
    pattern_exponent: float = 2.0
    boresight: tuple[float, float, float] = (0.0, 0.0, -1.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _vector(self.center, "base_station.center"))
        object.__setattr__(
            self, "boresight", _vector(self.boresight, "base_station.boresight")
        )
        if self.axis is not None:
            axis = _vector(self.axis, "base_station.axis")
            if np.linalg.norm(axis) == 0:
                raise ValueError("base_station.axis must be nonzero")
            object.__setattr__(self, "axis", axis)
        if self.positions is not None:
            positions = tuple(
                _vector(p, f"base_station.positions[{i}]")
                for i, p in enumerate(self.positions)
            )
            if not positions:
                raise ValueError("base_station.positions must not be empty")
            object.__setattr__(self, "positions", positions)
            object.__setattr__(self, "n_antennas", len(positions))
        if self.n_antennas < 1:
            raise ValueError(
                f"base_station.n_antennas must be >= 1, got {self.n_antennas}"
            )
        if self.spacing is not None and self.spacing <= 0:
            raise ValueError(
                f"base_station.spacing must be positive, got {self.spacing}"
            )
        if self.pattern_exponent < 0:
            raise ValueError("base_station.pattern_exponent must be non-negative")


@dataclass(frozen=True)
class RisPanelConfig:
    """One planar RIS with a uniform rectangular element grid.

    Attributes:
        center: Panel center (m).
        normal: Panel normal, pointing towards the served half-space.
        rows: Elements along the in-plane second axis.
        cols: Elements along the in-plane first axis.
        spacing: Element spacing s_R (m); ``None`` means half a wavelength.
        gain_dbi: Element boresight gain (dBi); ``None`` uses the cos^q pattern.
        pattern_exponent: Element pattern exponent q.
    """

    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    normal: tuple[float, float, float] = (0.0, 0.0, 1.0)
    rows: int = 50
    cols: int = 50
    spacing: float | None = None
    gain_dbi: float | None = None
    pattern_exponent: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _vector(self.center, "ris.center"))
        normal = _vector(self.normal, "ris.normal")
        if np.linalg.norm(normal) == 0:
            raise ValueError("ris.normal must be a nonzero vector")
        object.__setattr__(self, "normal", normal)
        if self.rows < 1 or self.cols < 1:
            raise ValueError(
                f"RIS grid must be at least 1x1, got {self.rows}x{self.cols}"
            )
        if self.spacing is not None and self.spacing <= 0:
            raise ValueError(f"ris.spacing must be positive, got {self.spacing}")
        if self.pattern_exponent < 0:
            raise ValueError("ris.pattern_exponent must be non-negative")

    @property
    def n_elements(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class UserConfig:
    """User equipment.

    Attributes:
        position: True UE position (m).
        gain_dbi: Isotropic gain (dBi).
    """

    position: tuple[float, float, float] = (5.0, 5.0, 1.5)
    gain_dbi: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", _vector(self.position, "user.position"))


@dataclass(frozen=True)
class ScenarioConfig:
    """Full geometric and physical description of one simulated link.

    Defaults reproduce the reference setup: 30 GHz carrier, two BS antennas
    15 m above a 50x50 half-wavelength RIS, UE at (5, 5, 1.5), 30 dBm transmit
    power and -90 dBm noise.

    Attributes:
        wavelength: Carrier wavelength (m).
        base_station: BS array.
        panels: The K RISs.
        user: The UE.
        transmit_power_dbm: P_t (dBm).
        noise_power_dbm: UE noise sigma_u^2 (dBm).
        ris_noise_power_dbm: RIS noise sigma_r^2 (dBm); ``None`` means equal to
            the UE noise.
        power_model: RIS power conversion and consumption.
        resolution_bits: Phase resolution D; ``None`` for continuous phases.
        rician_factor_db: Rician factor of the direct link; ``None`` is LoS only.
        localization_std_m: Per-axis localization noise std sigma_l (m).
        ce_error_std: Relative channel-estimation error std.
        chi: Half angle of the reflect-priority region (rad); ``None`` means
            pi / 2^(D+1).
        use_optimal_chi: Use the asymptotically optimal half angle instead.
        adaptive_proportion: Without a configured half angle, let each RIS
            search its reflective fraction on the predicted link.
        zone_coupling_bits: Zone step (bits) whose curve spacing is compared
            against the element spacing; ``None`` uses the phase resolution.
        curve_samples: Uniform polar samples per zone curve.
        exact_axes: Exact (True) or Fresnel-approximate (False) semi-axes.
    """

    wavelength: float = DEFAULT_WAVELENGTH
    base_station: BaseStationConfig = field(default_factory=BaseStationConfig)
    panels: tuple[RisPanelConfig, ...] = (RisPanelConfig(),)
    user: UserConfig = field(default_factory=UserConfig)
    transmit_power_dbm: float = 30.0
    noise_power_dbm: float = -90.0
    ris_noise_power_dbm: float | None = None
    power_model: PowerModel = field(default_factory=PowerModel)
    resolution_bits: int | None = 1
    rician_factor_db: float | None = None
    localization_std_m: float = 0.0
    ce_error_std: float = 0.0
    chi: float | None = None
    use_optimal_chi: bool = False
    adaptive_proportion: bool = True
    zone_coupling_bits: int | None = 1
    curve_samples: int = 4096
    exact_axes: bool = True

    def __post_init__(self) -> None:
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if not self.panels:
            raise ValueError("At least one RIS panel is required")
        object.__setattr__(self, "panels", tuple(self.panels))
        for name in ("transmit_power_dbm", "noise_power_dbm"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.resolution_bits is not None and self.resolution_bits < 1:
            raise ValueError(
                f"resolution_bits must be >= 1 or None, got {self.resolution_bits}"
            )
        if self.zone_coupling_bits is not None and self.zone_coupling_bits < 1:
            raise ValueError("zone_coupling_bits must be >= 1 or None")
        if self.localization_std_m < 0:
            raise ValueError("localization_std_m must be non-negative")
        if self.ce_error_std < 0:
            raise ValueError("ce_error_std must be non-negative")
        if self.chi is not None:
            limit = np.pi / 2 ** (self.resolution_bits or 1)
            if not 0 <= self.chi <= limit + 1e-12:
                raise ValueError(f"chi must be in [0, {limit}], got {self.chi}")
        if self.curve_samples < 16:
            raise ValueError("curve_samples must be at least 16")
        for k, panel in enumerate(self.panels):
            spacing = self.element_spacing(k)
            low, high = self.wavelength / 10, self.wavelength / 2
            if not low - 1e-12 <= spacing <= high + 1e-12:
                logger.warning(
                    f"RIS {k} element spacing {spacing:g} m is outside "
                    f"[{self.wavelength / 10:g}, {self.wavelength / 2:g}] m"
                )

    @property
    def transmit_power_w(self) -> float:
        return dbm_to_watts(self.transmit_power_dbm)

    @property
    def ue_noise_w(self) -> float:
        return dbm_to_watts(self.noise_power_dbm)

    @property
    def ris_noise_w(self) -> float:
        if self.ris_noise_power_dbm is None:
            return self.ue_noise_w
        return dbm_to_watts(self.ris_noise_power_dbm)

    @property
    def n_antennas(self) -> int:
        return self.base_station.n_antennas

    @property
    def ue_position(self) -> npt.NDArray[np.float64]:
        return np.asarray(self.user.position, dtype=float)

    def element_spacing(self, k: int = 0) -> float:
        spacing = self.panels[k].spacing
        return self.wavelength / 2 if spacing is None else spacing

    def bs_positions(self) -> npt.NDArray[np.float64]:
        """Antenna positions, shape (N_T, 3)."""
        bs = self.base_station
        if bs.positions is not None:
            return np.asarray(bs.positions, dtype=float)
        center = np.asarray(bs.center, dtype=float)
        spacing = self.wavelength / 2 if bs.spacing is None else bs.spacing
        if bs.axis is not None:
            axis = np.asarray(bs.axis, dtype=float)
        else:
            ground = self.ue_position[:2] - center[:2]
            if np.linalg.norm(ground) < 1e-12:
                axis = np.array([1.0, 0.0, 0.0])
            else:
                axis = np.array([-ground[1], ground[0], 0.0])
        axis = axis / np.linalg.norm(axis)
        offsets = (np.arange(bs.n_antennas) - (bs.n_antennas - 1) / 2) * spacing
        return center + offsets[:, None] * axis

    def element_positions(self, k: int = 0) -> npt.NDArray[np.float64]:
        """Element positions of RIS ``k`` in row-major order, shape (N_R, 3)."""
        panel = self.panels[k]
        e1, e2 = _in_plane_axes(np.asarray(panel.normal, dtype=float))
        spacing = self.element_spacing(k)
        cols = (np.arange(panel.cols) - (panel.cols - 1) / 2) * spacing
        rows = (np.arange(panel.rows) - (panel.rows - 1) / 2) * spacing
        grid_r, grid_c = np.meshgrid(rows, cols, indexing="ij")
        return (
            np.asarray(panel.center, dtype=float)
            + grid_c.reshape(-1, 1) * e1
            + grid_r.reshape(-1, 1) * e2
        )

    def in_plane_coordinates(self, k: int = 0) -> npt.NDArray[np.float64]:
        """Element coordinates along the panel's two in-plane axes, shape (N_R, 2)."""
        panel = self.panels[k]
        e1, e2 = _in_plane_axes(np.asarray(panel.normal, dtype=float))
        rel = self.element_positions(k) - np.asarray(panel.center, dtype=float)
        return np.column_stack([rel @ e1, rel @ e2])

    def aperture_side(self, k: int = 0) -> float:
        """Longest side of RIS ``k`` (m)."""
        panel = self.panels[k]
        return max(panel.rows, panel.cols) * self.element_spacing(k)

    def aperture_diagonal(self, k: int = 0) -> float:
        panel = self.panels[k]
        return math.hypot(panel.rows, panel.cols) * self.element_spacing(k)

    def with_ris_size(self, n_elements: int) -> "ScenarioConfig":
        """Copy with every panel resized to ``n_elements`` elements.

        The grid is the factor pair closest to square, with ``rows <= cols``;
        perfect squares give square panels.
        """
        rows, cols = grid_shape(n_elements)
        panels = tuple(
            dataclasses.replace(panel, rows=rows, cols=cols) for panel in self.panels
        )
        return dataclasses.replace(self, panels=panels)

    @property
    def adapts_proportion(self) -> bool:
        """The element-wise selection searches its own reflective fraction."""
        return (
            self.adaptive_proportion and self.chi is None and not self.use_optimal_chi
        )

    def effective_chi(self) -> float:
        """Half angle used by the element-wise selection."""
        if self.chi is not None:
            return self.chi
        return np.pi / 2 ** ((self.resolution_bits or 1) + 1)


_NESTED = {
    "base_station": BaseStationConfig,
    "user": UserConfig,
    "power_model": PowerModel,
}


def _build(cls: type, data: Any, path: str) -> Any:
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ScenarioError(f"{path}: unknown field(s) {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if cls is ScenarioConfig and key in _NESTED:
            value = _build(_NESTED[key], value, f"{path}.{key}")
        elif cls is ScenarioConfig and key == "panels":
            if not isinstance(value, list):
                raise ScenarioError(f"{path}.panels: expected a list")
            value = tuple(
                _build(RisPanelConfig, item, f"{path}.panels[{i}]")
                for i, item in enumerate(value)
            )
        elif isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"{path}: {e}") from e


def scenario_from_dict(data: dict[str, Any]) -> ScenarioConfig:
    """Build a validated scenario; missing fields take their defaults."""
    return _build(ScenarioConfig, data, "scenario")


def scenario_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    return dataclasses.asdict(cfg)


def load_scenario(path: str | Path | None) -> ScenarioConfig:
    """Load a JSON scenario file.

    An empty file (or ``None``) yields the default scenario.

    Raises:
        ScenarioError: On malformed JSON or invalid fields.
        FileNotFoundError: If the file does not exist.
    """
    if path is None:
        return ScenarioConfig()
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return ScenarioConfig()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: invalid JSON ({e})") from e
    return scenario_from_dict(data)


def save_scenario(cfg: ScenarioConfig, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(
        json.dumps(scenario_to_dict(cfg), indent=2, allow_nan=False) + "\n",
        encoding="utf-8",
    )
    return path
