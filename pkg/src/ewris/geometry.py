"""Fresnel-zone geometry: ellipsoid parameters, RIS-local frames and plane curves."""

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import numpy.typing as npt
from scipy.spatial import cKDTree

logger = logging.getLogger("ewris")

Point3 = npt.NDArray[np.float64]

DEFAULT_CURVE_SAMPLES = 4096
_PLANE_TOL = 1e-9


def as_point(value: npt.ArrayLike, name: str = "point") -> Point3:
    """Validate and convert a 3-vector.

    Raises:
        ValueError: If the value is not three finite numbers.
    """
    point = np.asarray(value, dtype=float)
    if point.shape != (3,):
        raise ValueError(f"{name} must have three coordinates, got shape {point.shape}")
    if not np.all(np.isfinite(point)):
        raise ValueError(f"{name} must be finite, got {point.tolist()}")
    return point


def as_points(values: npt.ArrayLike, name: str = "points") -> npt.NDArray[np.float64]:
    points = np.atleast_2d(np.asarray(values, dtype=float))
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n, 3), got {points.shape}")
    if not np.all(np.isfinite(points)):
        raise ValueError(f"{name} must be finite")
    return points


def fresnel_radius(
    d1: float, d2: float, d_total: float, i: float, wavelength: float
) -> float:
    """Radius of the i-th Fresnel zone at distances d1, d2 from the foci.

    Args:
        d1: Distance from the first focus along the link (m).
        d2: Distance from the second focus along the link (m).
        d_total: Focal distance, d1 + d2 (m).
        i: Zone index (may be fractional).
        wavelength: Carrier wavelength (m).

    Returns:
        The zone radius in meters.
    """
    if d1 <= 0 or d2 <= 0 or d_total <= 0:
        raise ValueError(
            f"Distances must be positive, got d1={d1}, d2={d2}, d_total={d_total}"
        )
    if wavelength <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    if i < 0:
        raise ValueError(f"Zone index must be non-negative, got {i}")
    return float(np.sqrt(i * wavelength * d1 * d2 / d_total))


def axes_for_excess(
    d: float, excess: float, exact: bool = True
) -> tuple[float, float, float]:
    """Semi-axes of the ellipsoid whose focal sum exceeds ``d`` by ``excess`` meters."""
    if d <= 0:
        raise ValueError(f"Focal distance must be positive, got {d}")
    if excess < 0:
        raise ValueError(f"Path excess must be non-negative, got {excess}")
    a = (d + excess) / 2
    if exact:
        # a^2 - (d/2)^2 rewritten to avoid cancellation for small excess
        b = float(np.sqrt(excess * (2 * d + excess)) / 2)
    else:
        b = float(np.sqrt(excess * d / 2))
    return a, b, b


def fractional_axes(
    d: float, j: float, wavelength: float, exact: bool = True
) -> tuple[float, float, float]:
    """Semi-axes (a, b, c) of the fractional Fresnel ellipsoid with index ``j``.

    The focal sum of the ellipsoid is ``d + j * wavelength``. In exact mode
    ``b = c = sqrt(a**2 - (d/2)**2)``; in approximate mode
    ``b = c = sqrt(j * wavelength * d / 2)``.
    """
    if wavelength <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    if j < 0:
        raise ValueError(f"Zone index must be non-negative, got {j}")
    return axes_for_excess(d, j * wavelength, exact)


def rotation_matrix(alpha: float, beta: float) -> npt.NDArray[np.float64]:
    """Orientation of a zone ellipsoid with azimuth ``alpha``, elevation ``beta``.

    The first column is the major-axis direction. The matrix is orthonormal
    but not proper (det = -1 at zero angles); only the column directions matter
    for an ellipsoid of revolution.
    """
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    return np.array(
        [
            [ca * cb, -ca * sb, -sa],
            [sa * cb, -sa * sb, ca],
            [sb, cb, 0.0],
        ]
    )


def orientation_angles(t: npt.ArrayLike, u: npt.ArrayLike) -> tuple[float, float]:
    """Azimuth and elevation of the direction from ``t`` to ``u``."""
    direction = as_point(u, "u") - as_point(t, "t")
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise ValueError("Foci coincide; orientation is undefined")
    e = direction / norm
    return float(np.arctan2(e[1], e[0])), float(np.arcsin(np.clip(e[2], -1.0, 1.0)))


def zone_center(
    t: npt.ArrayLike, u: npt.ArrayLike, n_l: npt.ArrayLike | None = None
) -> Point3:
    """Center of the Fresnel ellipsoids with foci ``t`` and ``u + n_l``."""
    offset = np.zeros(3) if n_l is None else as_point(n_l, "n_l")
    return (as_point(t, "t") + as_point(u, "u") + offset) / 2


def focal_sum_residual(
    p: npt.ArrayLike,
    t: npt.ArrayLike,
    u: npt.ArrayLike,
    j: float,
    wavelength: float,
) -> npt.NDArray[np.float64] | float:
    """Deviation of ``p`` from the zone-``j`` path-difference condition (m).

    Accepts a single point or an ``(n, 3)`` array of points.
    """
    points = np.asarray(p, dtype=float)
    t = as_point(t, "t")
    u = as_point(u, "u")
    path = np.linalg.norm(points - t, axis=-1) + np.linalg.norm(points - u, axis=-1)
    residual = np.abs(path - np.linalg.norm(t - u) - j * wavelength)
    return float(residual) if np.ndim(residual) == 0 else residual


@dataclass(frozen=True, eq=False)
class FresnelZoneSpec:
    """Parameters of one fractional Fresnel ellipsoid.

    Attributes:
        j: Fractional zone index (multiple of 1/2^D).
        semi_major: Semi-axis along the focal line (m).
        semi_middle: Transverse semi-axis (m).
        semi_minor: Transverse semi-axis (m), equal to ``semi_middle``.
        center: Ellipsoid center.
        azimuth: Azimuth of the major axis (rad).
        elevation: Elevation of the major axis (rad).
        focal_distance: Distance between the foci (m).
        antenna: Index of the BS antenna acting as the first focus.
    """

    j: float
    semi_major: float
    semi_middle: float
    semi_minor: float
    center: Point3
    azimuth: float
    elevation: float
    focal_distance: float
    antenna: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", as_point(self.center, "center"))
        tol = 1e-12 * max(1.0, self.focal_distance)
        if self.semi_major < self.focal_distance / 2 - tol:
            raise ValueError(
                f"semi_major {self.semi_major} is shorter than half the focal "
                f"distance {self.focal_distance / 2}"
            )
        if abs(self.semi_middle - self.semi_minor) > tol:
            raise ValueError(
                "Zone ellipsoids are rotationally symmetric: b must equal c"
            )
        if self.semi_middle > self.semi_major + tol:
            raise ValueError("semi_middle cannot exceed semi_major")

    @classmethod
    def from_foci(
        cls,
        t: npt.ArrayLike,
        u: npt.ArrayLike,
        j: float,
        wavelength: float,
        *,
        exact: bool = True,
        noise: npt.ArrayLike | None = None,
        phase_offset: float = 0.0,
        antenna: int = 0,
    ) -> "FresnelZoneSpec":
        """Build the zone-``j`` ellipsoid for foci ``t`` and ``u``.

        ``phase_offset`` (rad) shortens the focal-sum target by
        ``phase_offset * wavelength / (2 pi)``. ``noise`` displaces only the
        center, leaving axes and orientation at their noiseless values.
        """
        t = as_point(t, "t")
        u = as_point(u, "u")
        d = float(np.linalg.norm(u - t))
        excess = j * wavelength - phase_offset * wavelength / (2 * np.pi)
        a, b, c = axes_for_excess(d, excess, exact)
        alpha, beta = orientation_angles(t, u)
        return cls(
            j=j,
            semi_major=a,
            semi_middle=b,
            semi_minor=c,
            center=zone_center(t, u, noise),
            azimuth=alpha,
            elevation=beta,
            focal_distance=d,
            antenna=antenna,
        )

    @property
    def rotation(self) -> npt.NDArray[np.float64]:
        return rotation_matrix(self.azimuth, self.elevation)

    @property
    def shape_matrix(self) -> npt.NDArray[np.float64]:
        """Maps unit vectors onto the ellipsoid surface (relative to the center)."""
        return self.rotation @ np.diag(
            [self.semi_major, self.semi_middle, self.semi_minor]
        )

    def surface(self, directions: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Surface points for unit ``directions`` of shape ``(n, 3)``."""
        s = np.atleast_2d(np.asarray(directions, dtype=float))
        s = s / np.linalg.norm(s, axis=1, keepdims=True)
        return self.center + s @ self.shape_matrix.T


@dataclass(frozen=True)
class CurveSample:
    """One point of a zone curve on the RIS plane."""

    point: Point3
    j: float
    antenna: int


@dataclass(eq=False)
class ZoneCurve:
    """Intersection of a zone ellipsoid with the z = 0 plane, as sampled polylines.

    Attributes:
        spec: The ellipsoid the curve belongs to.
        arcs: Polylines of shape ``(m, 3)``; a single arc when ``closed``.
        closed: Whether the only arc wraps around onto itself.
    """

    spec: FresnelZoneSpec
    arcs: list[npt.NDArray[np.float64]] = field(default_factory=list)
    closed: bool = False

    @property
    def is_empty(self) -> bool:
        return not any(len(arc) for arc in self.arcs)

    @cached_property
    def points(self) -> npt.NDArray[np.float64]:
        if self.is_empty:
            return np.empty((0, 3))
        return np.concatenate([arc for arc in self.arcs if len(arc)])

    @cached_property
    def _neighbours(self) -> tuple[npt.NDArray[np.intp], npt.NDArray[np.intp]]:
        prev, nxt = [], []
        offset = 0
        for arc in self.arcs:
            m = len(arc)
            if m == 0:
                continue
            idx = np.arange(offset, offset + m)
            p = idx - 1
            n = idx + 1
            if self.closed:
                p[0], n[-1] = idx[-1], idx[0]
            else:
                p[0], n[-1] = -1, -1
            prev.append(p)
            nxt.append(n)
            offset += m
        if not prev:
            return np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp)
        return np.concatenate(prev), np.concatenate(nxt)

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(self.points[:, :2])

    def samples(self) -> list[CurveSample]:
        return [
            CurveSample(point=p.copy(), j=self.spec.j, antenna=self.spec.antenna)
            for p in self.points
        ]

    def distance_to(self, query: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """In-plane distance from each query point to the polyline.

        Returns ``inf`` for every point when the curve is empty.
        """
        q = np.atleast_2d(np.asarray(query, dtype=float))[:, :2]
        if self.is_empty:
            return np.full(len(q), np.inf)
        xy = self.points[:, :2]
        dist, idx = self._tree.query(q)
        prev, nxt = self._neighbours
        best = np.asarray(dist, dtype=float)
        for other in (prev[idx], nxt[idx]):
            valid = other >= 0
            if not np.any(valid):
                continue
            a = xy[idx[valid]]
            b = xy[other[valid]]
            seg = b - a
            length2 = np.einsum("ij,ij->i", seg, seg)
            rel = q[valid] - a
            s = np.where(
                length2 > 0,
                np.einsum("ij,ij->i", rel, seg) / np.where(length2 > 0, length2, 1),
                0.0,
            )
            foot = a + np.clip(s, 0.0, 1.0)[:, None] * seg
            gap = np.linalg.norm(q[valid] - foot, axis=1)
            best[valid] = np.minimum(best[valid], gap)
        return best

    def spacing_to(self, other: "ZoneCurve") -> float:
        """Minimum pairwise distance between two curves (``inf`` if either is empty)."""
        if self.is_empty or other.is_empty:
            return float("inf")
        return float(
            min(
                other.distance_to(self.points).min(),
                self.distance_to(other.points).min(),
            )
        )


Window = tuple[float, float, float, float]


def _in_window(xy: npt.NDArray[np.float64], window: Window, pad: float) -> np.ndarray:
    xmin, xmax, ymin, ymax = window
    return (
        (xy[:, 0] >= xmin - pad)
        & (xy[:, 0] <= xmax + pad)
        & (xy[:, 1] >= ymin - pad)
        & (xy[:, 1] <= ymax + pad)
    )


def _runs(mask: npt.NDArray[np.bool_]) -> list[tuple[int, int]]:
    """Cyclic runs of True values as (start, stop) with stop possibly past the end."""
    n = len(mask)
    if mask.all():
        return [(0, n)]
    if not mask.any():
        return []
    start = int(np.argmin(mask))  # first False: no run straddles this index
    rolled = np.roll(mask, -start)
    runs = []
    i = 0
    while i < n:
        if rolled[i]:
            k = i
            while k < n and rolled[k]:
                k += 1
            runs.append((start + i, start + k))
            i = k
        else:
            i += 1
    return runs


def _segment_crossing(spec: FresnelZoneSpec) -> ZoneCurve:
    """Plane crossing of a zero-width (j = 0) ellipsoid, i.e. its focal segment."""
    e = spec.rotation[:, 0]
    f1 = spec.center - spec.semi_major * e
    f2 = spec.center + spec.semi_major * e
    z1, z2 = f1[2], f2[2]
    if abs(z1) <= _PLANE_TOL and abs(z2) <= _PLANE_TOL:
        arc = np.linspace(f1, f2, 64)
        arc[:, 2] = 0.0
        return ZoneCurve(spec, [arc])
    if z1 * z2 > 0:
        return ZoneCurve(spec, [])
    s = z1 / (z1 - z2)
    point = f1 + s * (f2 - f1)
    point[2] = 0.0
    return ZoneCurve(spec, [point[None, :]])


def intersect_plane(
    spec: FresnelZoneSpec,
    n_samples: int = DEFAULT_CURVE_SAMPLES,
    *,
    window: Window | None = None,
    max_gap: float | None = None,
) -> ZoneCurve:
    """Intersect a zone ellipsoid with the z = 0 plane.

    Surface points are ``center + M s`` with ``M`` the shape matrix and ``s`` a
    unit vector. The plane condition is linear in ``s``, so the admissible
    ``s`` form a circle on the unit sphere, parameterized by one polar angle.

    Args:
        spec: Zone ellipsoid, expressed in the RIS-local frame.
        n_samples: Uniform polar samples over the full curve.
        window: Optional ``(xmin, xmax, ymin, ymax)`` region of interest. When
            given, only the parts of the curve near the window are kept and
            they are resampled so that adjacent samples are at most
            ``max_gap`` apart.
        max_gap: Target sample spacing inside the window (m).

    Returns:
        The sampled curve; empty when the ellipsoid misses the plane.
    """
    if n_samples < 3:
        raise ValueError(f"n_samples must be at least 3, got {n_samples}")
    if spec.semi_middle == 0:
        return _segment_crossing(spec)

    m = spec.shape_matrix
    r = m[2]
    r_norm = float(np.linalg.norm(r))
    cz = float(spec.center[2])
    h = -cz / r_norm
    if abs(h) > 1:
        return ZoneCurve(spec, [])

    normal = r / r_norm
    helper = np.eye(3)[int(np.argmin(np.abs(normal)))]
    e1 = np.cross(normal, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    radius = np.sqrt(max(0.0, 1 - h * h))
    base = spec.center + h * (m @ normal)
    axis_a = radius * (m @ e1)
    axis_b = radius * (m @ e2)

    def evaluate(psi: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        pts = base + np.cos(psi)[:, None] * axis_a + np.sin(psi)[:, None] * axis_b
        pts[:, 2] = 0.0
        return pts

    psi = np.linspace(0.0, 2 * np.pi, n_samples, endpoint=False)
    coarse = evaluate(psi)
    if window is None:
        return ZoneCurve(spec, [coarse], closed=True)

    speed = float(np.linalg.norm(axis_a[:2]) + np.linalg.norm(axis_b[:2]))
    step = 2 * np.pi / n_samples
    coarse_gap = speed * step
    gap = coarse_gap if max_gap is None else min(max_gap, coarse_gap)
    inside = _in_window(coarse[:, :2], window, coarse_gap)
    runs = _runs(inside)
    if not runs:
        return ZoneCurve(spec, [])
    if runs == [(0, n_samples)]:
        count = max(n_samples, int(np.ceil(2 * np.pi * speed / gap)))
        fine = np.linspace(0.0, 2 * np.pi, count, endpoint=False)
        return ZoneCurve(spec, [evaluate(fine)], closed=True)

    arcs = []
    for start, stop in runs:
        lo = (start - 1) * step
        hi = stop * step
        count = int(np.ceil((hi - lo) * speed / gap)) + 1
        arcs.append(evaluate(np.linspace(lo, hi, max(count, 2))))
    return ZoneCurve(spec, arcs)


def curve_in_plane(
    spec: FresnelZoneSpec,
    n_samples: int = DEFAULT_CURVE_SAMPLES,
    *,
    window: Window | None = None,
    max_gap: float | None = None,
) -> list[CurveSample]:
    """Sample the intersection of ``spec`` with the RIS plane (z = 0).

    Returns an empty list when the ellipsoid does not reach the plane.
    """
    return intersect_plane(spec, n_samples, window=window, max_gap=max_gap).samples()


@dataclass(frozen=True, eq=False)
class RisFrame:
    """Rigid RIS-local frame: RIS plane at z = 0, UE projection at the origin.

    Attributes:
        origin: Global position of the local origin.
        axes: Rows are the local x, y, z axes in global coordinates.
    """

    origin: Point3
    axes: npt.NDArray[np.float64]

    @classmethod
    def from_pose(
        cls,
        ris_center: npt.ArrayLike,
        ris_normal: npt.ArrayLike,
        ue: npt.ArrayLike,
    ) -> "RisFrame":
        center = as_point(ris_center, "ris_center")
        normal = as_point(ris_normal, "ris_normal")
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            raise ValueError("ris_normal must be a nonzero vector")
        e3 = normal / norm
        ue = as_point(ue, "ue")
        origin = ue - np.dot(ue - center, e3) * e3

        # Local x follows global x projected onto the plane (global y if parallel).
        e1 = np.array([1.0, 0.0, 0.0]) - e3[0] * e3
        if np.linalg.norm(e1) < 1e-9:
            e1 = np.array([0.0, 1.0, 0.0]) - e3[1] * e3
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(e3, e1)
        return cls(origin=origin, axes=np.vstack([e1, e2, e3]))

    def to_local(self, points: npt.ArrayLike) -> npt.NDArray[np.float64]:
        p = np.asarray(points, dtype=float)
        return (p - self.origin) @ self.axes.T

    def to_global(self, points: npt.ArrayLike) -> npt.NDArray[np.float64]:
        p = np.asarray(points, dtype=float)
        return p @ self.axes + self.origin


def to_ris_frame(
    points: npt.ArrayLike,
    ris_center: npt.ArrayLike,
    ris_normal: npt.ArrayLike,
    ue: npt.ArrayLike,
) -> npt.NDArray[np.float64]:
    """Express global ``points`` in the RIS-local frame."""
    return RisFrame.from_pose(ris_center, ris_normal, ue).to_local(points)


def from_ris_frame(
    points: npt.ArrayLike,
    ris_center: npt.ArrayLike,
    ris_normal: npt.ArrayLike,
    ue: npt.ArrayLike,
) -> npt.NDArray[np.float64]:
    """Inverse of :func:`to_ris_frame`."""
    return RisFrame.from_pose(ris_center, ris_normal, ue).to_global(points)
