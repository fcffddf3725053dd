"""Uplink location estimation at the RIS through a power indicator."""

import logging
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .channel import ChannelSet
from .config import ScenarioConfig
from .geometry import Point3, as_point, as_points

logger = logging.getLogger("ewris")


@dataclass(frozen=True, eq=False)
class LocationEstimate:
    """Result of a grid search over UE hypotheses.

    Attributes:
        position: Winning grid point.
        indicator_power: Indicator value at the winning point (W-scaled).
        index: Index of the winning point in the grid.
        grid_size: Number of hypotheses evaluated.
        spacing: Grid step (m), when the grid was built by :func:`search_grid`.
        extent: Grid half-extent (m), when known.
        degenerate: True when every hypothesis produced the same indicator.
    """

    position: Point3
    indicator_power: float
    index: int
    grid_size: int
    spacing: float | None = None
    extent: float | None = None
    degenerate: bool = False


def distance_vector(
    elements: npt.ArrayLike, ue: npt.ArrayLike
) -> npt.NDArray[np.float64]:
    """Distance from every RIS element to the hypothesized UE position."""
    return np.linalg.norm(as_points(elements, "elements") - as_point(ue, "ue"), axis=1)


def le_switch_config(
    distances: npt.ArrayLike, wavelength: float
) -> npt.NDArray[np.complex128]:
    """Switch states folding destructive half-cycles onto the constructive one.

    Elements whose propagation phase 2 pi d / lambda lies in (-pi/2, pi/2]
    (mod 2 pi) keep state 0 (+1); the others are flipped by pi (-1).
    """
    if wavelength <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    distances = np.asarray(distances, dtype=float)
    phase = np.mod(2 * np.pi * distances / wavelength, 2 * np.pi)
    # Map into (-pi, pi] so that the constructive interval is (-pi/2, pi/2].
    centered = np.where(phase > np.pi, phase - 2 * np.pi, phase)
    keep = (centered > -np.pi / 2) & (centered <= np.pi / 2)
    return np.where(keep, 1.0 + 0j, -1.0 + 0j)


def indicator_power(
    switch: npt.ArrayLike, g: npt.ArrayLike, absorptive_efficiency: float
) -> float:
    """Power of the coherently combined absorbed uplink stream."""
    switch = np.asarray(switch, dtype=complex)
    g = np.asarray(g, dtype=complex)
    return float(abs(np.sum(switch * absorptive_efficiency * g)) ** 2)


def search_grid(
    center: npt.ArrayLike, extent: float, step: float
) -> npt.NDArray[np.float64]:
    """Cubic grid of hypotheses within ``extent`` of ``center`` at spacing ``step``."""
    center = as_point(center, "center")
    if extent < 0:
        raise ValueError(f"extent must be non-negative, got {extent}")
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    count = int(np.floor(extent / step + 1e-9))
    ticks = np.arange(-count, count + 1) * step
    gx, gy, gz = np.meshgrid(ticks, ticks, ticks, indexing="ij")
    return center + np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])


def estimate_location(
    cfg: ScenarioConfig,
    channels: ChannelSet,
    grid: npt.ArrayLike,
    *,
    spacing: float | None = None,
    extent: float | None = None,
) -> LocationEstimate:
    """Pick the grid point whose switch configuration maximizes the indicator.

    For each hypothesis the switch arrays of all RISs are set from the
    hypothesized element distances and the indicator powers against the true
    uplink channels are summed. Ties resolve to the smallest grid index.
    """
    grid = as_points(grid, "grid")
    if len(grid) == 0:
        raise ValueError("The search grid must not be empty")
    efficiency = cfg.power_model.absorptive_efficiency
    scores = np.zeros(len(grid))
    for k in range(channels.n_ris):
        elements = cfg.element_positions(k)
        g = channels.g[k]
        for i, point in enumerate(grid):
            switch = le_switch_config(distance_vector(elements, point), cfg.wavelength)
            scores[i] += indicator_power(switch, g, efficiency)

    best = int(np.argmax(scores))
    degenerate = bool(np.allclose(scores, scores[0], rtol=1e-12, atol=0.0))
    if degenerate and len(grid) > 1:
        logger.warning(
            "Location indicator is flat over the grid; returning the first hypothesis"
        )
        best = 0
    return LocationEstimate(
        position=grid[best].copy(),
        indicator_power=float(scores[best]),
        index=best,
        grid_size=len(grid),
        spacing=spacing,
        extent=extent,
        degenerate=degenerate,
    )


def sample_location_noise(sigma: float, rng: np.random.Generator) -> Point3:
    """I.i.d. N(0, sigma^2) displacement per axis."""
    if sigma < 0:
        raise ValueError(f"Localization noise std must be non-negative, got {sigma}")
    return rng.normal(0.0, sigma, size=3) if sigma > 0 else np.zeros(3)
