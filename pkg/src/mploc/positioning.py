"""Position computation from channel observations.

Two geometric methods are implemented:

* Direct positioning: convert a measured range and departure-side bearing to a
  2D fix, correcting the slant range for the antenna height offset.
* Single-bounce positioning: a path that bounced exactly once constrains the
  receiver to a straight line. Sliding the unknown scatterer along the
  departure ray from r=0 to r=d sweeps the candidate receiver positions
  between two endpoints, and the receiver must lie on the line through them.
  With two such paths the receiver sits at the intersection of the two lines.

Bearing roles: beta is the departure bearing (site toward the scatterer) and
alpha is the bearing from the receiver toward the last scatterer, i.e. the
direction the arriving ray is seen from. For a direct path those two rays are
anti-parallel and the constraint line degenerates, which is exactly why
unfiltered multipath pairs produce wild fixes.

The epoch pipeline classifies every observation with the reflection-order
ensemble, keeps single-bounce paths, and positions from the strongest two;
when fewer than two survive it falls back to the strongest two paths overall.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .channel import C, Measurement
from .classifier import Ensemble, predict
from .errors import DataError, DegenerateGeometry, DomainError, ParallelLines
from .geometry import Bearing, Line, Point2, intersect_lines
from .raytracer import GnbId, GnbSite


@dataclass(frozen=True)
class SphericalObs:
    """A slant range plus azimuth/elevation pair for the 3D conversion."""

    d_prime: float
    alpha: Bearing
    phi: float

    def __post_init__(self):
        if self.d_prime <= 0:
            raise DomainError(f"range must be positive, got {self.d_prime}")
        if not -90.0 < self.phi < 90.0:
            raise DomainError(f"elevation must lie in (-90, 90), got {self.phi}")


class FixMethod(enum.Enum):
    LOS = "LoS"
    SBR = "SBR"
    FALLBACK = "FallbackStrongestTwo"


class PipelineMode(enum.Enum):
    SBR_ONLY = "sbr"
    LOS_PREFERRED = "los"


@dataclass(frozen=True)
class PositionFix:
    """A 2D estimate tagged with how it was produced."""

    p: Point2
    method: FixMethod
    contributing: tuple[int, ...]
    t: float
    gnb_id: GnbId


@dataclass(frozen=True)
class Outage:
    """An epoch for which no fix could be produced."""

    t: float
    gnb_id: GnbId
    reason: str


def spherical_to_cartesian_3d(gnb: GnbSite, obs: SphericalObs) -> tuple[float, float, float]:
    """3D point at slant range d', azimuth alpha, elevation phi from the site."""
    a = obs.alpha.radians
    p = math.radians(obs.phi)
    return (
        gnb.position.x + obs.d_prime * math.sin(a) * math.cos(p),
        gnb.position.y + obs.d_prime * math.cos(a) * math.cos(p),
        gnb.height + obs.d_prime * math.sin(p),
    )


def los_position_2d(gnb: GnbSite, r3: float, alpha: Bearing, ue_height: float = 0.0) -> Point2:
    """2D fix from a direct-path slant range and azimuth.

    The ground range is sqrt(r3^2 - dz^2) with dz the antenna height offset;
    a slant range not exceeding |dz| is geometrically impossible.
    """
    dz = gnb.height - ue_height
    if r3 <= abs(dz):
        raise DomainError(f"slant range {r3} m cannot be <= height offset {abs(dz)} m")
    d = math.sqrt(r3 * r3 - dz * dz)
    ux, uy = alpha.unit()
    return Point2(gnb.position.x + d * ux, gnb.position.y + d * uy)


def scatterer_point(gnb: Point2, beta: Bearing, r: float) -> Point2:
    """Bounce point at distance r along the departure bearing beta."""
    ux, uy = beta.unit()
    return Point2(gnb.x + r * ux, gnb.y + r * uy)


def sbr_line(gnb: Point2, alpha: Bearing, beta: Bearing, d: float) -> Line:
    """Constraint line for a single-bounce path of total length d.

    The candidate receiver position at scatterer distance r is
    gnb + r*u(beta) - (d - r)*u(alpha); the endpoints r=0 and r=d span the
    line. When alpha and beta are anti-parallel the endpoints coincide and the
    path carries no positional information.
    """
    if d <= 0:
        raise DomainError(f"path length must be positive, got {d}")
    ax, ay = alpha.unit()
    bx, by = beta.unit()
    p0 = Point2(gnb.x - d * ax, gnb.y - d * ay)
    p1 = Point2(gnb.x + d * bx, gnb.y + d * by)
    if p0.distance_to(p1) <= 1e-9:
        raise DegenerateGeometry(
            f"arrival bearing {alpha.degrees:.6f} opposes departure bearing "
            f"{beta.degrees:.6f}; constraint line is undefined"
        )
    return Line.from_points(p0, p1)


def measurement_range(m: Measurement) -> float:
    """Path length implied by the time of arrival, assuming synchronized clocks."""
    return m.toa * C


def sbr_position(gnb: Point2, m1: Measurement, m2: Measurement) -> Point2:
    """Intersect the constraint lines of two single-bounce observations."""
    l1 = sbr_line(gnb, m1.aoa, m1.aod, measurement_range(m1))
    l2 = sbr_line(gnb, m2.aoa, m2.aod, measurement_range(m2))
    return intersect_lines(l1, l2)


def _strongest(indices: Sequence[int], measurements: Sequence[Measurement], k: int) -> list[int]:
    """The k indices with the highest signal strength; ties by lower index."""
    return sorted(indices, key=lambda i: (-measurements[i].rss, i))[:k]


def pipeline_step(
    measurements: Sequence[Measurement],
    ensemble: Ensemble,
    gnb: GnbSite,
    mode: PipelineMode = PipelineMode.SBR_ONLY,
    ue_height: float = 0.0,
) -> Union[PositionFix, Outage]:
    """Classify one epoch's observations for one site and produce a fix.

    SBR-only: when at least two observations are predicted single-bounce,
    intersect the two strongest; otherwise fall back to the two strongest
    observations regardless of predicted order. LoS-preferred: when any
    observation is predicted direct, position the strongest such observation
    directly; otherwise behave like SBR-only. Degenerate geometry or fewer
    than two usable paths yields an Outage.
    """
    if not measurements:
        return Outage(t=math.nan, gnb_id=gnb.id, reason="no measurements")
    t = measurements[0].t
    feats = [[m.toa, m.aoa.degrees, m.aod.degrees, m.rss] for m in measurements]
    predicted = [predict(ensemble, f)[0] for f in feats]

    if mode is PipelineMode.LOS_PREFERRED:
        direct = [i for i, c in enumerate(predicted) if c == 0]
        if direct:
            i = _strongest(direct, measurements, 1)[0]
            m = measurements[i]
            try:
                # departure bearing is the site-to-receiver azimuth on a direct path
                p = los_position_2d(gnb, measurement_range(m), m.aod, ue_height)
            except DomainError as e:
                return Outage(t=t, gnb_id=gnb.id, reason=str(e))
            return PositionFix(p=p, method=FixMethod.LOS, contributing=(i,), t=t, gnb_id=gnb.id)

    single_bounce = [i for i, c in enumerate(predicted) if c == 1]
    if len(single_bounce) >= 2:
        pick = _strongest(single_bounce, measurements, 2)
        method = FixMethod.SBR
    elif len(measurements) >= 2:
        pick = _strongest(range(len(measurements)), measurements, 2)
        method = FixMethod.FALLBACK
    else:
        return Outage(t=t, gnb_id=gnb.id, reason="fewer than two paths in epoch")
    try:
        p = sbr_position(gnb.position, measurements[pick[0]], measurements[pick[1]])
    except (DegenerateGeometry, ParallelLines, DomainError) as e:
        return Outage(t=t, gnb_id=gnb.id, reason=str(e))
    return PositionFix(p=p, method=method, contributing=tuple(pick), t=t, gnb_id=gnb.id)


# ---------------------------------------------------------------------------
# classifier-free baselines used for comparison runs
# ---------------------------------------------------------------------------

def strongest_two_position(measurements: Sequence[Measurement], gnb: Point2) -> Point2:
    """Intersect the constraint lines of the two strongest paths, unfiltered."""
    if len(measurements) < 2:
        raise DataError("need at least two paths")
    pick = _strongest(range(len(measurements)), measurements, 2)
    return sbr_position(gnb, measurements[pick[0]], measurements[pick[1]])


def los_position_strongest(measurements: Sequence[Measurement], gnb: GnbSite,
                           ue_height: float = 0.0) -> Point2:
    """Position the strongest path as if it were direct (no classification).

    Mirrors positioning schemes that trust the dominant path; when that path
    actually bounced, the departure bearing points at the scatterer and the
    range covers the whole detour, so the fix lands far from the receiver.
    """
    if not measurements:
        raise DataError("empty epoch")
    i = _strongest(range(len(measurements)), measurements, 1)[0]
    m = measurements[i]
    return los_position_2d(gnb, measurement_range(m), m.aod, ue_height)
