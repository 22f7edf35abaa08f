"""Spherical and projection geometry for omnidirectional media.

Angle conventions used across the whole package:

* azimuth in degrees, range [-180, 180), increasing counter-clockwise when
  seen from above (positive azimuth is to the left of the forward
  direction);
* elevation in degrees, range [-90, 90], positive up;
* tilt in degrees, range [-180, 180), rotation around the viewing axis.

The 3D embedding places the forward direction (az=0, el=0) on +X and the
zenith (el=90) on +Y; the +Z axis pierces the sphere at az=-90 (to the
right of forward):

    d = (cos el * cos az,  sin el,  -cos el * sin az)

Equirectangular (ERP) pictures map azimuth/elevation linearly to pixels
with the left picture edge at az=+180 and the top edge at el=+90:

    u = (0.5 - az / 360) * width
    v = (0.5 - el / 180) * height
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

TWO_PI = 2.0 * math.pi
FULL_SPHERE_STERADIANS = 4.0 * math.pi

#: Default stratified sampling grid for region overlap estimation.
DEFAULT_OVERLAP_SAMPLES = (64, 64)


def wrap_degrees(angle: float) -> float:
    """Wrap an angle in degrees into [-180, 180)."""
    wrapped = math.fmod(angle + 180.0, 360.0)
    if wrapped < 0.0:
        wrapped += 360.0
    return wrapped - 180.0


@dataclass(frozen=True)
class ViewingOrientation:
    """A viewing direction: azimuth, elevation and tilt in degrees."""

    azimuth: float = 0.0
    elevation: float = 0.0
    tilt: float = 0.0

    def is_normalized(self) -> bool:
        return (
            -180.0 <= self.azimuth < 180.0
            and -90.0 <= self.elevation <= 90.0
            and -180.0 <= self.tilt < 180.0
        )


@dataclass(frozen=True)
class SphereRegion:
    """An azimuth/elevation-bounded region on the unit sphere.

    The region spans ``azimuth_range`` degrees of azimuth and
    ``elevation_range`` degrees of elevation, both centred on ``center``.
    Elevation extents are clamped to the poles at evaluation time.
    """

    center: ViewingOrientation = field(default_factory=ViewingOrientation)
    azimuth_range: float = 360.0
    elevation_range: float = 180.0

    def elevation_bounds(self) -> tuple[float, float]:
        """Pole-clamped (min, max) elevation of the region in degrees."""
        half = self.elevation_range / 2.0
        lo = max(self.center.elevation - half, -90.0)
        hi = min(self.center.elevation + half, 90.0)
        return lo, hi

    def contains(self, azimuth: float, elevation: float) -> bool:
        """Inclusive membership test, handling azimuth wrap-around."""
        lo, hi = self.elevation_bounds()
        if not lo <= elevation <= hi:
            return False
        return abs(wrap_degrees(azimuth - self.center.azimuth)) <= self.azimuth_range / 2.0


@dataclass(frozen=True)
class Rect2D:
    """A pixel-aligned rectangle with a top-left origin."""

    x: int
    y: int
    width: int
    height: int

    def fits_within(self, dims: "PictureDims") -> bool:
        return (
            self.x >= 0
            and self.y >= 0
            and self.x + self.width <= dims.width
            and self.y + self.height <= dims.height
        )


@dataclass(frozen=True)
class PictureDims:
    """Width and height of a decoded picture in pixels."""

    width: int
    height: int


class CubeFace(Enum):
    """Cube map face identifiers, named by the axis they sit on."""

    POS_X = "+X"
    NEG_X = "-X"
    POS_Y = "+Y"
    NEG_Y = "-Y"
    POS_Z = "+Z"
    NEG_Z = "-Z"


# Per-face orthonormal frame: outward normal, image-right, image-down.
# Image orientation convention: looking out from the cube centre through
# the face, +X/-X/+Z/-Z keep physical up (+Y) as image up; the top face
# (+Y) has image-down pointing forward (+X), the bottom face (-Y) has
# image-down pointing backward (-X).
_FACE_FRAMES: dict[CubeFace, tuple[tuple[float, float, float], ...]] = {
    CubeFace.POS_X: ((1, 0, 0), (0, 0, 1), (0, -1, 0)),
    CubeFace.NEG_X: ((-1, 0, 0), (0, 0, -1), (0, -1, 0)),
    CubeFace.POS_Y: ((0, 1, 0), (0, 0, 1), (1, 0, 0)),
    CubeFace.NEG_Y: ((0, -1, 0), (0, 0, 1), (-1, 0, 0)),
    CubeFace.POS_Z: ((0, 0, 1), (-1, 0, 0), (0, -1, 0)),
    CubeFace.NEG_Z: ((0, 0, -1), (1, 0, 0), (0, -1, 0)),
}

# Tie-break order when a direction lies exactly on a face edge or corner.
FACE_PRIORITY = (
    CubeFace.POS_X,
    CubeFace.NEG_X,
    CubeFace.POS_Y,
    CubeFace.NEG_Y,
    CubeFace.POS_Z,
    CubeFace.NEG_Z,
)


def normalize_orientation(
    azimuth: float, elevation: float, tilt: float = 0.0
) -> ViewingOrientation:
    """Map arbitrary real-valued angles onto canonical ranges.

    Elevation beyond a pole reflects back and rotates azimuth and tilt by
    180 degrees, so the returned orientation describes the same physical
    viewing direction.
    """
    el = wrap_degrees(elevation)
    if el > 90.0:
        el = 180.0 - el
        azimuth += 180.0
        tilt += 180.0
    elif el < -90.0:
        el = -180.0 - el
        azimuth += 180.0
        tilt += 180.0
    return ViewingOrientation(wrap_degrees(azimuth), el, wrap_degrees(tilt))


def unit_vector(azimuth: float, elevation: float) -> tuple[float, float, float]:
    """Unit direction vector for an azimuth/elevation pair in degrees."""
    az = math.radians(azimuth)
    el = math.radians(elevation)
    return (
        math.cos(el) * math.cos(az),
        math.sin(el),
        -math.cos(el) * math.sin(az),
    )


def vector_to_az_el(x: float, y: float, z: float) -> tuple[float, float]:
    """Azimuth/elevation in degrees of a (not necessarily unit) vector."""
    norm = math.sqrt(x * x + y * y + z * z)
    if norm == 0.0:
        raise ValueError("cannot derive a direction from the zero vector")
    el = math.degrees(math.asin(max(-1.0, min(1.0, y / norm))))
    az = math.degrees(math.atan2(-z, x)) if (x != 0.0 or z != 0.0) else 0.0
    return wrap_degrees(az), el


def erp_sphere_to_pixel(
    o: ViewingOrientation, dims: PictureDims
) -> tuple[float, float]:
    """Project a viewing direction onto a continuous ERP pixel coordinate.

    Returns (u, v) with u in [0, width] and v in [0, height].
    """
    _check_dims(dims)
    u = (0.5 - o.azimuth / 360.0) * dims.width
    v = (0.5 - o.elevation / 180.0) * dims.height
    return u, v


def erp_pixel_to_sphere(u: float, v: float, dims: PictureDims) -> ViewingOrientation:
    """Inverse ERP mapping; exact algebraic inverse of erp_sphere_to_pixel.

    Raises ValueError for pixel coordinates outside the picture.
    """
    _check_dims(dims)
    if not 0.0 <= u <= dims.width or not 0.0 <= v <= dims.height:
        raise ValueError(
            f"pixel ({u}, {v}) outside picture {dims.width}x{dims.height}"
        )
    azimuth = (0.5 - u / dims.width) * 360.0
    elevation = (0.5 - v / dims.height) * 180.0
    return ViewingOrientation(wrap_degrees(azimuth), elevation, 0.0)


def cmp_sphere_to_face_pixel(
    o: ViewingOrientation, face_size: float
) -> tuple[CubeFace, float, float]:
    """Gnomonic cube-map projection of a viewing direction.

    The face is picked by the dominant axis of the unit direction vector;
    exact ties on edges/corners go to the earlier face in FACE_PRIORITY.
    (u, v) lie in [0, face_size] with the per-face image orientation
    documented on _FACE_FRAMES.
    """
    if face_size <= 0:
        raise ValueError("face_size must be positive")
    d = unit_vector(o.azimuth, o.elevation)
    best = max(abs(c) for c in d)
    for face in FACE_PRIORITY:
        n, r, dn = _FACE_FRAMES[face]
        depth = _dot(d, n)
        if depth == best:
            a = _dot(d, r) / depth
            b = _dot(d, dn) / depth
            u = (a + 1.0) * face_size / 2.0
            v = (b + 1.0) * face_size / 2.0
            return face, u, v
    raise AssertionError("unreachable: some face must dominate")


def cmp_face_pixel_to_sphere(
    face: CubeFace, u: float, v: float, face_size: float
) -> ViewingOrientation:
    """Inverse cube-map projection for a continuous face pixel."""
    if face_size <= 0:
        raise ValueError("face_size must be positive")
    if not 0.0 <= u <= face_size or not 0.0 <= v <= face_size:
        raise ValueError(f"pixel ({u}, {v}) outside face of size {face_size}")
    n, r, dn = _FACE_FRAMES[face]
    a = 2.0 * u / face_size - 1.0
    b = 2.0 * v / face_size - 1.0
    d = tuple(n[i] + a * r[i] + b * dn[i] for i in range(3))
    az, el = vector_to_az_el(*d)
    return ViewingOrientation(az, el, 0.0)


def viewport_region(o: ViewingOrientation, hfov: float, vfov: float) -> SphereRegion:
    """The sphere region visible for a viewing orientation and field of view."""
    if not 0.0 < hfov <= 360.0:
        raise ValueError(f"horizontal field of view {hfov} outside (0, 360]")
    if not 0.0 < vfov <= 180.0:
        raise ValueError(f"vertical field of view {vfov} outside (0, 180]")
    return SphereRegion(center=o, azimuth_range=hfov, elevation_range=vfov)


def region_solid_angle(r: SphereRegion) -> float:
    """Solid angle of a sphere region in steradians.

    For the azimuth/elevation-bounded region shape this is
    az_range_rad * (sin el_max - sin el_min) with elevations clamped to
    the poles.
    """
    lo, hi = r.elevation_bounds()
    d_az = math.radians(r.azimuth_range)
    return d_az * (math.sin(math.radians(hi)) - math.sin(math.radians(lo)))


def region_overlap_fraction(
    a: SphereRegion,
    b: SphereRegion,
    samples: tuple[int, int] = DEFAULT_OVERLAP_SAMPLES,
) -> float:
    """Fraction of region a's solid angle that lies inside region b.

    Uses deterministic stratified sampling of a: a regular grid in
    (azimuth, sin elevation) space, which makes every sample carry equal
    solid angle. Results are reproducible bit-for-bit for fixed inputs
    and sample counts.
    """
    az_off, el = region_sample_grid(a, samples)
    inside = region_contains_arrays(b, az_off + a.center.azimuth, el)
    return float(np.count_nonzero(inside)) / inside.size


def region_sample_grid(
    a: SphereRegion, samples: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray]:
    """Stratified sample points of a region, equal solid angle per sample.

    Returns (azimuth offsets from a's centre, elevations), both flat
    float64 arrays of length samples[0] * samples[1].
    """
    n_az, n_el = samples
    if n_az <= 0 or n_el <= 0:
        raise ValueError("sample counts must be positive")
    lo, hi = a.elevation_bounds()
    z_lo, z_hi = math.sin(math.radians(lo)), math.sin(math.radians(hi))
    az_off = (np.arange(n_az) + 0.5) / n_az * a.azimuth_range - a.azimuth_range / 2.0
    z = (np.arange(n_el) + 0.5) / n_el * (z_hi - z_lo) + z_lo
    el = np.degrees(np.arcsin(np.clip(z, -1.0, 1.0)))
    az_grid, el_grid = np.meshgrid(az_off, el)
    return az_grid.ravel(), el_grid.ravel()


def region_contains_arrays(
    r: SphereRegion, azimuth: np.ndarray, elevation: np.ndarray
) -> np.ndarray:
    """Vectorized inclusive membership test for arrays of directions."""
    lo, hi = r.elevation_bounds()
    diff = np.abs(_wrap_degrees_array(azimuth - r.center.azimuth))
    return (elevation >= lo) & (elevation <= hi) & (diff <= r.azimuth_range / 2.0)


def _wrap_degrees_array(angles: np.ndarray) -> np.ndarray:
    return np.mod(angles + 180.0, 360.0) - 180.0


def _dot(a: tuple[float, ...], b: tuple[float, ...]) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _check_dims(dims: PictureDims) -> None:
    if dims.width <= 0 or dims.height <= 0:
        raise ValueError(f"picture dimensions must be positive, got {dims}")
