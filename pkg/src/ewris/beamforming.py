"""Distributed determine-then-align beamforming.

The BS fixes an MRT precoder from its own channel estimate. Each RIS then
locates the fractional Fresnel zones of every BS antenna on its aperture,
reflects with the elements lying close to a zone curve, and harvests with
the rest.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import numpy.typing as npt
from scipy.spatial import cKDTree

from .channel import ChannelSet, predicted_channels
from .config import ScenarioConfig
from .geometry import (
    FresnelZoneSpec,
    RisFrame,
    Window,
    ZoneCurve,
    as_point,
    axes_for_excess,
    intersect_plane,
)
from .metrics import scenario_chi, snr
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


def _wrap(phase: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Wrap into (-pi, pi]."""
    wrapped = np.mod(np.asarray(phase, dtype=float) + np.pi, 2 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


@dataclass(frozen=True, eq=False)
class Precoder:
    """BS precoder.

    Attributes:
        w: Unit-norm beamforming vector (N_T,).
        phases: Phase offsets of the estimated channel, one per antenna (rad).
    """

    w: npt.NDArray[np.complex128]
    phases: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        if not np.isclose(np.linalg.norm(self.w), 1.0, atol=1e-12):
            raise ValueError("The precoder must have unit norm")


def mrt_precoder(f_hat: npt.ArrayLike) -> Precoder:
    """Maximum ratio transmission for the estimated direct channel.

    ``w = f_hat / ||f_hat||`` so that ``f_hat^H w = ||f_hat||`` is real and
    positive.

    Raises:
        ValueError: If ``f_hat`` is the zero vector.
    """
    f_hat = np.atleast_1d(np.asarray(f_hat, dtype=complex))
    norm = np.linalg.norm(f_hat)
    if norm == 0:
        raise ValueError("MRT is undefined for a zero channel")
    return Precoder(w=f_hat / norm, phases=np.angle(f_hat))


def modified_axes(
    d: float, j: float, wavelength: float, psi: float, exact: bool = True
) -> tuple[float, float, float]:
    """Zone semi-axes with the precoding phase ``psi`` absorbed.

    The focal-sum target becomes ``d + j * wavelength - psi * wavelength / (2 pi)``.
    """
    if wavelength <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    return axes_for_excess(d, j * wavelength - psi * wavelength / (2 * np.pi), exact)


def band_width(
    spacing: npt.ArrayLike, resolution: int, chi: float
) -> npt.NDArray[np.float64]:
    """Width ``spacing * 2^D * chi / pi`` of the band kept around a zone curve.

    ``chi = pi / 2^D`` gives the full spacing, so adjacent bands tile the aperture.
    """
    limit = np.pi / 2**resolution
    if not 0 <= chi <= limit + 1e-12:
        raise ValueError(f"chi must be in [0, {limit}], got {chi}")
    return np.asarray(spacing, dtype=float) * 2**resolution * chi / np.pi


def decision_threshold(
    curve_j: ZoneCurve, curve_next: ZoneCurve, resolution: int, chi: float
) -> float:
    """Selection threshold tau of a zone from its spacing to the next zone."""
    spacing = curve_j.spacing_to(curve_next)
    if not np.isfinite(spacing):
        raise ValueError("Both zone curves must be non-empty")
    return float(band_width(spacing, resolution, chi))


def zone_phase(j: float, resolution: int) -> float:
    """Phase shift compensating the path difference of zone ``j``: mod(-2 pi j, 2 pi).

    Raises:
        ValueError: If ``j`` is not a positive multiple of 1/2^D.
    """
    levels = 2**resolution
    m = round(j * levels)
    if m <= 0 or abs(j * levels - m) > 1e-9:
        raise ValueError(
            f"Zone index must be a positive multiple of 1/{levels}, got {j}"
        )
    return 2 * np.pi * ((-m) % levels) / levels


def select_elements(
    elements: npt.ArrayLike,
    curve: ZoneCurve,
    tau: npt.ArrayLike,
    *,
    distances: npt.ArrayLike | None = None,
) -> npt.NDArray[np.bool_]:
    """Mark elements within ``tau`` of the zone curve (inclusive).

    ``tau`` may hold one threshold per element. Pass ``distances`` when the
    element-to-curve distances are already known.
    """
    if distances is None:
        distances = curve.distance_to(elements)
    return np.asarray(distances, dtype=float) <= np.asarray(tau, dtype=float)


def combine_across_antennas(
    indicators: list[npt.NDArray[np.bool_]] | tuple[npt.NDArray[np.bool_], ...],
) -> npt.NDArray[np.bool_]:
    """Entrywise product of per-antenna selections."""
    if not indicators:
        raise ValueError("At least one indicator vector is required")
    lengths = {len(i) for i in indicators}
    if len(lengths) != 1:
        raise ValueError("Indicator vectors must have equal lengths")
    return reduce(np.logical_and, (np.asarray(i, dtype=bool) for i in indicators))


def absorptive_complement(
    reflective: npt.ArrayLike, absorptive_efficiency: float
) -> npt.NDArray[np.float64]:
    """Absorb with every element outside the reflective support."""
    reflective = np.asarray(reflective)
    return np.where(np.abs(reflective) > 0, 0.0, absorptive_efficiency)


def eh_switch_design(
    distances: npt.ArrayLike, phases: npt.ArrayLike, wavelength: float
) -> npt.NDArray[np.complex128]:
    """Switch array aligning the incident field at each element.

    The incident composite phasor at element n is
    ``sum_t exp(j (psi_t + 2 pi D[t, n] / lambda))``; state 0 (+1) when its
    phase lies in (-pi/2, pi/2], pi (-1) otherwise.

    Args:
        distances: BS-to-element distances, shape (N_T, N_R).
        phases: Precoder phase offsets, shape (N_T,).
        wavelength: Carrier wavelength (m).
    """
    distances = np.atleast_2d(np.asarray(distances, dtype=float))
    phases = np.atleast_1d(np.asarray(phases, dtype=float))
    if distances.shape[0] != phases.shape[0]:
        raise ValueError(
            f"Expected {phases.shape[0]} rows of distances, got {distances.shape[0]}"
        )
    composite = np.sum(
        np.exp(1j * (phases[:, None] + 2 * np.pi * distances / wavelength)), axis=0
    )
    phi = _wrap(np.angle(composite))
    return np.where((phi > -np.pi / 2) & (phi <= np.pi / 2), 1.0 + 0j, -1.0 + 0j)


@dataclass(frozen=True, eq=False)
class BandTable:
    """Candidate (element, zone) pairs of one RIS at the widest half angle.

    Narrower half angles keep the rows whose ``width`` fits, so one table
    serves every ``chi``.

    Attributes:
        element: Element index per row.
        step: Zone step per row.
        width: Smallest selection fraction ``2^D chi / pi`` keeping the row,
            the largest ``2 d / local spacing`` over the antennas.
        total: Distance to the zone curve summed over the antennas (m).
        evaluations: Element-to-curve distance evaluations spent on the table.
    """

    element: npt.NDArray[np.intp]
    step: npt.NDArray[np.int64]
    width: npt.NDArray[np.float64]
    total: npt.NDArray[np.float64]
    evaluations: int


@dataclass(eq=False)
class ZoneLayout:
    """Zone curves of one RIS for every BS antenna, in the RIS-local frame.

    Zones are indexed by the integer step ``m``; the fractional index is
    ``j = m / 2^D``.

    Attributes:
        resolution: Phase resolution D.
        element_xy: In-plane element coordinates (N_R, 2).
        element_spacing: s_R (m).
        offsets: Residual precoding phase absorbed per antenna (rad).
        curves: Per antenna, zone step -> curve.
        spacing: Per antenna, zone step -> distance to the next zone's curve.
        max_step: Largest usable zone step (0 when none is usable).
    """

    resolution: int
    element_xy: npt.NDArray[np.float64]
    element_spacing: float
    offsets: npt.NDArray[np.float64]
    curves: list[dict[int, ZoneCurve]]
    spacing: list[dict[int, float]]
    max_step: int
    _tree: cKDTree | None = field(default=None, repr=False)
    _table: BandTable | None = field(default=None, repr=False)

    @property
    def max_index(self) -> float:
        """J as a fractional zone index."""
        return self.max_step / 2**self.resolution

    @property
    def element_tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.element_xy)
        return self._tree

    def crossing_steps(self, antenna: int = 0) -> list[int]:
        """Zone steps whose curve crosses the aperture for ``antenna``."""
        return sorted(m for m, c in self.curves[antenna].items() if not c.is_empty)

    def nominal_spacing(self, antenna: int, m: int) -> float | None:
        """Spacing of zone ``m`` to its successor, else to its predecessor, else
        the median spacing of ``antenna``; ``None`` when no zone has a neighbour.
        """
        spacing = self.spacing[antenna].get(m, np.inf)
        if not np.isfinite(spacing):
            spacing = self.spacing[antenna].get(m - 1, np.inf)
        if not np.isfinite(spacing):
            finite = [s for s in self.spacing[antenna].values() if np.isfinite(s)]
            if not finite:
                return None
            spacing = float(np.median(finite))
        return float(spacing)

    def threshold(self, antenna: int, m: int, chi: float) -> float | None:
        """tau for zone ``m`` of ``antenna``; ``None`` if it has no neighbour."""
        spacing = self.nominal_spacing(antenna, m)
        if spacing is None:
            return None
        return float(band_width(spacing, self.resolution, chi))

    def local_spacing(
        self, antenna: int, m: int, xy: npt.NDArray[np.float64]
    ) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], int]:
        """Distance of ``xy`` to zone ``m`` and the zone spacing measured there.

        The local spacing adds the distance to the nearer neighbouring curve
        (``m - 1`` or ``m + 1``) and falls back to :meth:`nominal_spacing`
        where neither neighbour crosses the aperture.

        Returns:
            Distances, local spacings and the number of distance evaluations.
        """
        curves = self.curves[antenna]
        distance = curves[m].distance_to(xy)
        evaluations = len(xy)
        nearest = np.full(len(xy), np.inf)
        for neighbour in (m - 1, m + 1):
            curve = curves.get(neighbour)
            if curve is None or curve.is_empty:
                continue
            nearest = np.minimum(nearest, curve.distance_to(xy))
            evaluations += len(xy)
        fallback = self.nominal_spacing(antenna, m)
        local = np.where(
            np.isfinite(nearest),
            distance + nearest,
            np.inf if fallback is None else fallback,
        )
        return distance, local, evaluations

    def band_table(self) -> BandTable:
        """Rows of every element lying in the widest band of a usable zone.

        A zone contributes an element when, for every antenna, the element is
        within half the local spacing of that antenna's zone curve.
        """
        if self._table is None:
            self._table = self._build_band_table()
        return self._table

    def _build_band_table(self) -> BandTable:
        rows: list[tuple[np.ndarray, ...]] = []
        evaluations = 0
        tree = self.element_tree
        n_antennas = len(self.curves)
        for m in self.crossing_steps(0):
            if m > self.max_step:
                break
            kept: list[npt.NDArray[np.intp]] = []
            widths: list[npt.NDArray[np.float64]] = []
            distances: list[npt.NDArray[np.float64]] = []
            for a in range(n_antennas):
                curve = self.curves[a].get(m)
                nominal = self.nominal_spacing(a, m)
                if curve is None or curve.is_empty or nominal is None:
                    break
                hits = tree.query_ball_point(
                    curve.points[:, :2], r=0.75 * nominal + self.element_spacing
                )
                candidates = np.unique(
                    np.concatenate([np.asarray(h, dtype=np.intp) for h in hits])
                )
                if len(candidates) == 0:
                    break
                xy = self.element_xy[candidates]
                distance, local, spent = self.local_spacing(a, m, xy)
                evaluations += spent
                inside = select_elements(xy, curve, local / 2, distances=distance)
                kept.append(candidates[inside])
                widths.append(2 * distance[inside] / np.maximum(local[inside], 1e-300))
                distances.append(distance[inside])
            if len(kept) != n_antennas:
                continue
            union = reduce(np.union1d, kept)
            common = union[
                combine_across_antennas([np.isin(union, k) for k in kept])
            ]
            if len(common) == 0:
                continue
            positions = [np.searchsorted(k, common) for k in kept]
            width = np.max([w[p] for w, p in zip(widths, positions)], axis=0)
            total = np.sum([d[p] for d, p in zip(distances, positions)], axis=0)
            rows.append((common, np.full(len(common), m), width, total))
        if not rows:
            empty = np.zeros(0)
            return BandTable(
                empty.astype(np.intp), empty.astype(np.int64), empty, empty, evaluations
            )
        element, step, width, total = (np.concatenate(c) for c in zip(*rows))
        return BandTable(
            element=element.astype(np.intp),
            step=step.astype(np.int64),
            width=width,
            total=total,
            evaluations=evaluations,
        )


def max_zone_index(
    curves: dict[int, ZoneCurve],
    element_spacing: float,
    resolution: int,
    coupling_bits: int | None = None,
) -> int:
    """Largest zone step whose curve stays farther than s_R from its successor.

    Steps are visited in increasing order over the curves crossing the
    aperture; the successor is ``2^(D - c)`` steps ahead for coupling
    resolution ``c`` (``D`` by default). A missing successor passes the check.

    Returns:
        The last passing step, or 0 when the first crossing zone already fails.
    """
    c = resolution if coupling_bits is None else min(coupling_bits, resolution)
    stride = 2 ** (resolution - c)
    last = 0
    for m in sorted(m for m, curve in curves.items() if not curve.is_empty):
        successor = curves.get(m + stride)
        gap = np.inf if successor is None else curves[m].spacing_to(successor)
        if gap - element_spacing > 0:
            last = m
        else:
            break
    return last


def _aperture_window(element_xy: npt.NDArray[np.float64], margin: float) -> Window:
    return (
        float(element_xy[:, 0].min() - margin),
        float(element_xy[:, 0].max() + margin),
        float(element_xy[:, 1].min() - margin),
        float(element_xy[:, 1].max() + margin),
    )


def residual_offsets(
    cfg: ScenarioConfig, precoder: Precoder, ue_hat: npt.ArrayLike
) -> npt.NDArray[np.float64]:
    """Per-antenna precoding phase not explained by the located geometry.

    Referenced to the predicted composite direct phase, so a common phase on
    the channel estimate cancels.
    """
    f_pred = predicted_channels(cfg, ue_hat).f
    reference = np.angle(np.vdot(f_pred, precoder.w))
    return _wrap(precoder.phases - np.angle(f_pred) - reference)


def build_zone_layout(
    cfg: ScenarioConfig,
    k: int,
    precoder: Precoder,
    ue_hat: npt.ArrayLike,
) -> ZoneLayout:
    """Compute the zone curves of RIS ``k`` for every BS antenna."""
    resolution = cfg.resolution_bits
    if resolution is None:
        raise ValueError("Zone layouts need a finite phase resolution")
    ue_hat = as_point(ue_hat, "ue_hat")
    panel = cfg.panels[k]
    wavelength = cfg.wavelength
    levels = 2**resolution
    s_r = cfg.element_spacing(k)

    frame = RisFrame.from_pose(panel.center, panel.normal, ue_hat)
    elements = frame.to_local(cfg.element_positions(k))
    bs = frame.to_local(cfg.bs_positions())
    ue = frame.to_local(ue_hat)
    element_xy = elements[:, :2]
    window = _aperture_window(element_xy, s_r)
    offsets = residual_offsets(cfg, precoder, ue_hat)

    coupling = resolution if cfg.zone_coupling_bits is None else cfg.zone_coupling_bits
    stride = 2 ** (resolution - min(coupling, resolution))

    curves: list[dict[int, ZoneCurve]] = []
    spacing: list[dict[int, float]] = []
    max_steps = []
    for t_idx, t in enumerate(bs):
        d = float(np.linalg.norm(ue - t))
        excess = (
            np.linalg.norm(elements - t, axis=1)
            + np.linalg.norm(elements - ue, axis=1)
            - d
        )
        shift = offsets[t_idx] / (2 * np.pi)
        lo = max(1, int(np.floor((excess.min() / wavelength + shift) * levels)) - 1)
        hi = int(np.ceil((excess.max() / wavelength + shift) * levels)) + 1 + stride
        zone_curves: dict[int, ZoneCurve] = {}
        for m in range(lo, hi + 1):
            if m / levels - shift <= 0:
                continue
            spec = FresnelZoneSpec.from_foci(
                t,
                ue,
                m / levels,
                wavelength,
                exact=cfg.exact_axes,
                phase_offset=offsets[t_idx],
                antenna=t_idx,
            )
            zone_curves[m] = intersect_plane(
                spec, cfg.curve_samples, window=window, max_gap=s_r / 4
            )
        gaps = {
            m: (
                zone_curves[m].spacing_to(zone_curves[m + 1])
                if m + 1 in zone_curves
                else np.inf
            )
            for m in zone_curves
        }
        curves.append(zone_curves)
        spacing.append(gaps)
        if not any(not c.is_empty for c in zone_curves.values()):
            logger.warning(f"RIS {k}: no zone of antenna {t_idx} crosses the aperture")
        max_steps.append(
            max_zone_index(zone_curves, s_r, resolution, cfg.zone_coupling_bits)
        )

    max_step = min(max_steps)
    if max_step == 0:
        logger.warning(
            f"RIS {k}: zone curves are closer than the element spacing; "
            "no element can be selected"
        )
    return ZoneLayout(
        resolution=resolution,
        element_xy=element_xy,
        element_spacing=s_r,
        offsets=offsets,
        curves=curves,
        spacing=spacing,
        max_step=max_step,
    )


@dataclass(frozen=True, eq=False)
class ZoneAssignment:
    """Element-to-zone assignment of one RIS.

    Attributes:
        zone_step: Zone step m per element, -1 for elements outside every band.
        thresholds: Nominal tau per (antenna, j).
        max_index: J.
        chi: Half angle of the reflect-priority region (rad).
        resolution: Phase resolution D.
        evaluations: Element-to-curve distance evaluations behind the selection.
    """

    zone_step: npt.NDArray[np.int64]
    thresholds: dict[tuple[int, float], float]
    max_index: float
    chi: float
    resolution: int
    evaluations: int = 0

    def __post_init__(self) -> None:
        limit = np.pi / 2**self.resolution
        if not 0 <= self.chi <= limit + 1e-12:
            raise ValueError(f"chi must be in [0, {limit}], got {self.chi}")
        if any(tau < 0 for tau in self.thresholds.values()):
            raise ValueError("Thresholds must be non-negative")

    @property
    def zone_index(self) -> npt.NDArray[np.float64]:
        """Fractional zone index j per element, NaN outside every band."""
        return np.where(
            self.zone_step >= 0, self.zone_step / 2**self.resolution, np.nan
        )

    @property
    def reflect_region(self) -> npt.NDArray[np.bool_]:
        """Elements tagged as reflect-priority; the rest are harvest-priority."""
        return self.zone_step >= 0

    @property
    def phases(self) -> npt.NDArray[np.float64]:
        levels = 2**self.resolution
        return np.where(
            self.reflect_region,
            2 * np.pi * np.mod(-self.zone_step, levels) / levels,
            0.0,
        )


def assign_zones(layout: ZoneLayout, chi: float) -> ZoneAssignment:
    """Select reflect-priority elements and their zones.

    An element is kept for zone m when, for every antenna, it lies within
    ``tau / 2`` of that antenna's zone-m curve, with tau the band width of
    the zone spacing measured at the element. The kept share of the aperture
    is therefore ``2^D chi / pi`` at every resolution. An element inside
    several bands joins the one with the smallest summed distance (ties to
    the smaller zone).
    """
    n = len(layout.element_xy)
    zone_step = np.full(n, -1, dtype=np.int64)
    levels = 2**layout.resolution
    if chi < 0 or chi > np.pi / levels + 1e-12:
        raise ValueError(f"chi must be in [0, {np.pi / levels}], got {chi}")
    if chi == 0 or layout.max_step == 0:
        return ZoneAssignment(zone_step, {}, layout.max_index, chi, layout.resolution)

    thresholds: dict[tuple[int, float], float] = {}
    for a in range(len(layout.curves)):
        for m in layout.crossing_steps(a):
            tau = layout.threshold(a, m, chi) if m <= layout.max_step else None
            if tau is not None:
                thresholds[(a, m / levels)] = tau

    table = layout.band_table()
    fraction = float(band_width(1.0, layout.resolution, chi))
    keep = table.width <= fraction + 1e-12
    element, step, total = table.element[keep], table.step[keep], table.total[keep]
    order = np.lexsort((step, total, element))
    first = np.unique(element[order], return_index=True)[1]
    zone_step[element[order][first]] = step[order][first]
    return ZoneAssignment(
        zone_step,
        thresholds,
        layout.max_index,
        chi,
        layout.resolution,
        evaluations=table.evaluations,
    )


@dataclass(frozen=True, eq=False)
class RisDesign:
    """Configuration of one RIS with its power budget and zone assignment.

    ``chi`` is the half angle the selection used, when one did.
    """

    configuration: RisConfiguration
    budget: PowerBudget
    assignment: ZoneAssignment | None = None
    chi: float | None = None

    @property
    def sustainable(self) -> bool:
        return self.budget.sustainable


def incident_amplitudes(
    h: npt.ArrayLike, w: npt.ArrayLike, transmit_power: float
) -> npt.NDArray[np.float64]:
    """Amplitude of the precoded field reaching each element (sqrt(W))."""
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    return np.abs(h.conj().T @ np.asarray(w, dtype=complex)) * np.sqrt(transmit_power)


def bs_ris_distances(cfg: ScenarioConfig, k: int) -> npt.NDArray[np.float64]:
    """Distances from every BS antenna to every element of RIS ``k``, (N_T, N_R)."""
    bs = cfg.bs_positions()
    elements = cfg.element_positions(k)
    return np.linalg.norm(elements[None, :, :] - bs[:, None, :], axis=2)


def assemble_configuration(
    cfg: ScenarioConfig,
    k: int,
    mask: npt.ArrayLike,
    phases: npt.ArrayLike,
    precoder: Precoder,
    h: npt.ArrayLike,
    *,
    assignment: ZoneAssignment | None = None,
    switch: npt.ArrayLike | None = None,
) -> RisDesign:
    """Complete a reflective selection into a self-consistent RIS configuration.

    The remaining elements absorb, the switch array aligns their incident
    field, and the harvested power sets the amplification. When the harvest
    cannot cover the circuits the RIS turns all-absorptive and is flagged
    inactive.
    """
    mask = np.asarray(mask, dtype=bool)
    phases = np.asarray(phases, dtype=float)
    model = cfg.power_model
    resolution = cfg.resolution_bits
    n = mask.shape[0]
    p_t = cfg.transmit_power_w

    if switch is None:
        switch = eh_switch_design(
            bs_ris_distances(cfg, k), precoder.phases, cfg.wavelength
        )
    switch = np.asarray(switch, dtype=complex)
    absorptive = np.where(mask, 0.0, model.absorptive_efficiency)
    harvest = harvested_power(
        switch, absorptive, h, precoder.w, p_t, cfg.ris_noise_w, model.eta1
    )
    available = available_power(harvest, model, n, resolution)

    n_reflective = int(np.count_nonzero(mask))
    if n_reflective and available >= 0:
        incident = incident_amplitudes(h, precoder.w, p_t)[mask]
        h_inc = float(np.sqrt(np.mean(incident**2)))
        rho = feasible_amplification(available, n_reflective, h_inc, model.rho_max)
        consumed = amplification_power(rho, n_reflective, h_inc)
        reflective = np.where(mask, rho * np.exp(1j * phases), 0.0)
        configuration = RisConfiguration(
            reflective=reflective,
            absorptive=absorptive,
            switch=switch,
            resolution=resolution,
        )
        budget = PowerBudget.settle(harvest, model, n, resolution, consumed)
        return RisDesign(configuration, budget, assignment)

    if n_reflective:
        logger.warning(
            f"RIS {k}: harvested power cannot cover the circuits; "
            "switching every element to absorptive"
        )
        absorptive = np.full(n, model.absorptive_efficiency)
        harvest = harvested_power(
            switch, absorptive, h, precoder.w, p_t, cfg.ris_noise_w, model.eta1
        )
    budget = PowerBudget.settle(harvest, model, n, resolution, 0.0)
    configuration = RisConfiguration.all_absorptive(
        switch,
        model.absorptive_efficiency,
        resolution,
        active=not n_reflective and budget.available >= 0,
    )
    return RisDesign(configuration, budget, assignment)


def predicted_compensation(
    cfg: ScenarioConfig,
    k: int,
    precoder: Precoder,
    ue_hat: npt.ArrayLike,
    predicted: ChannelSet | None = None,
) -> npt.NDArray[np.float64]:
    """Continuous phase shifts aligning each reflected path with the direct link.

    Computed from the located geometry only; phases in [0, 2 pi).
    """
    if predicted is None:
        predicted = predicted_channels(cfg, ue_hat)
    w = precoder.w
    direct = np.vdot(predicted.f, w)
    cascaded = predicted.g[k].conj() * (predicted.h[k].conj().T @ w)
    return np.mod(np.angle(direct) - np.angle(cascaded), 2 * np.pi)


def even_subset(n: int, proportion: float) -> npt.NDArray[np.bool_]:
    """Deterministic, evenly spread selection of ``floor(n * proportion)`` items."""
    if not 0 <= proportion <= 1:
        raise ValueError(f"proportion must be in [0, 1], got {proportion}")
    index = np.arange(n)
    upper = np.floor((index + 1) * proportion + 1e-12)
    return upper > np.floor(index * proportion + 1e-12)


PROPORTION_STEPS = (0.05, 0.0025)


def _chi_scale(resolution: int | None) -> int:
    return 2 if resolution is None else 2**resolution


def _design_at(
    cfg: ScenarioConfig,
    k: int,
    precoder: Precoder,
    ue_hat: npt.NDArray[np.float64],
    chi: float,
    layout: ZoneLayout | None,
    h: npt.ArrayLike,
    predicted: ChannelSet,
    switch: npt.ArrayLike | None = None,
) -> RisDesign:
    if cfg.resolution_bits is None:
        if not 0 <= chi <= np.pi / 2 + 1e-12:
            raise ValueError(f"chi must be in [0, pi/2], got {chi}")
        mask = even_subset(cfg.panels[k].n_elements, min(1.0, 2 * chi / np.pi))
        phases = predicted_compensation(cfg, k, precoder, ue_hat, predicted)
        design = assemble_configuration(
            cfg, k, mask, phases, precoder, h, switch=switch
        )
        return dataclasses.replace(design, chi=chi)

    assert layout is not None
    assignment = assign_zones(layout, chi)
    design = assemble_configuration(
        cfg,
        k,
        assignment.reflect_region,
        assignment.phases,
        precoder,
        h,
        assignment=assignment,
        switch=switch,
    )
    return dataclasses.replace(design, chi=chi)


def adapt_proportion(
    cfg: ScenarioConfig,
    k: int,
    precoder: Precoder,
    ue_hat: npt.ArrayLike,
    *,
    layout: ZoneLayout | None = None,
    h: npt.ArrayLike | None = None,
    steps: tuple[float, float] = PROPORTION_STEPS,
) -> RisDesign:
    """Element-wise design of RIS ``k`` with its reflective fraction searched.

    The fraction ``p = 2^D chi / pi`` runs over a coarse grid, then over a
    fine grid within one coarse step of the best point. Each candidate is
    scored by the SNR the located geometry predicts for RIS ``k`` alone, so
    only the precoder and the location estimate are needed. Only
    self-sustainable candidates compete (ties to the smaller fraction);
    without any the scenario's half angle is used.
    """
    ue_hat = as_point(ue_hat, "ue_hat")
    predicted = predicted_channels(cfg, ue_hat)
    if h is None:
        h = predicted.h[k]
    if cfg.resolution_bits is not None and layout is None:
        layout = build_zone_layout(cfg, k, precoder, ue_hat)
    coarse, fine = steps
    if not 0 < fine <= coarse <= 0.5:
        raise ValueError(f"steps must satisfy 0 < fine <= coarse <= 0.5, got {steps}")
    scale = _chi_scale(cfg.resolution_bits)
    switch = eh_switch_design(bs_ris_distances(cfg, k), precoder.phases, cfg.wavelength)
    alone = ChannelSet(f=predicted.f, h=(predicted.h[k],), g=(predicted.g[k],))
    p_t = cfg.transmit_power_w

    def evaluate(fraction: float) -> tuple[float, RisDesign]:
        chi = min(1.0, fraction) * np.pi / scale
        design = _design_at(cfg, k, precoder, ue_hat, chi, layout, h, predicted, switch)
        gain = snr(
            alone,
            precoder.w,
            [design.configuration],
            p_t,
            cfg.ue_noise_w,
            cfg.ris_noise_w,
        )
        return gain, design

    def search(fractions: npt.NDArray[np.float64]) -> tuple[float, RisDesign] | None:
        best = None
        for fraction in fractions:
            gain, design = evaluate(float(fraction))
            if design.sustainable and (best is None or gain > best[0]):
                best = (gain, design)
        return best

    best = search(np.round(np.arange(0.0, 1.0 + coarse / 2, coarse), 12))
    if best is None:
        logger.warning(
            f"RIS {k}: no reflective fraction is self-sustainable; "
            "using the scenario half angle"
        )
        return _design_at(
            cfg, k, precoder, ue_hat, scenario_chi(cfg, k), layout, h, predicted
        )
    centre = best[1].chi * scale / np.pi
    window = np.arange(centre - coarse, centre + coarse + fine / 2, fine)
    refined = search(np.round(window[(window >= 0) & (window <= 1)], 12))
    if refined is not None and refined[0] > best[0]:
        best = refined
    logger.debug(f"RIS {k}: reflective fraction {best[1].chi * scale / np.pi:.4f}")
    return best[1]


def design_element_wise(
    cfg: ScenarioConfig,
    k: int,
    precoder: Precoder,
    ue_hat: npt.ArrayLike,
    *,
    chi: float | None = None,
    layout: ZoneLayout | None = None,
    h: npt.ArrayLike | None = None,
) -> RisDesign:
    """Element-wise configuration of RIS ``k`` from the precoder and location estimate.

    With a finite resolution the zone curves drive the selection. With
    continuous phases an evenly spread proportion ``2 chi / pi`` of elements
    reflects with the predicted compensation phase. Without an explicit
    ``chi`` a scenario that adapts its proportion searches it with
    :func:`adapt_proportion`.
    """
    if chi is None and cfg.adapts_proportion:
        return adapt_proportion(cfg, k, precoder, ue_hat, layout=layout, h=h)
    chi = scenario_chi(cfg, k) if chi is None else chi
    ue_hat = as_point(ue_hat, "ue_hat")
    predicted = predicted_channels(cfg, ue_hat)
    if h is None:
        h = predicted.h[k]
    if cfg.resolution_bits is not None and layout is None:
        layout = build_zone_layout(cfg, k, precoder, ue_hat)
    return _design_at(cfg, k, precoder, ue_hat, chi, layout, h, predicted)


def configure_element_wise(
    cfg: ScenarioConfig,
    f_hat: npt.ArrayLike,
    ue_hat: npt.ArrayLike,
    *,
    chi: float | None = None,
) -> list[RisConfiguration]:
    """Element-wise configuration of every RIS.

    Args:
        cfg: Scenario.
        f_hat: Estimated direct channel, which fixes the MRT precoder.
        ue_hat: Estimated UE position.
        chi: Half angle of the reflect-priority region; defaults to the
            scenario's, or its asymptotic optimum with ``use_optimal_chi``.

    Returns:
        One configuration per RIS.
    """
    precoder = mrt_precoder(f_hat)
    predicted = predicted_channels(cfg, ue_hat)
    designs = [
        design_element_wise(cfg, k, precoder, ue_hat, chi=chi, h=predicted.h[k])
        for k in range(len(cfg.panels))
    ]
    return [d.configuration for d in designs]
