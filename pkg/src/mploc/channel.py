"""Conversion of geometric paths into noisy channel observations.

Each propagation path becomes one observation carrying the four features used
downstream: time of arrival, arrival bearing, departure bearing, and received
signal strength. Received power follows free-space path loss plus a fixed
per-bounce wall loss; all noise is zero-mean Gaussian.

Determinism contract: every observation's noise is drawn from a substream
keyed by (seed, epoch index, site id, path index), so regenerating a dataset
with the same inputs reproduces it byte for byte regardless of evaluation
order or worker count.
"""

from __future__ import annotations

import csv
import math
import zlib
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError, DomainError
from .geometry import Bearing, Point2
from .raytracer import GnbId, PropagationPath, Scene, trace_paths

C = 299_792_458.0  # speed of light, m/s (exact)

DATASET_HEADER = ["t", "gnb_id", "toa_s", "aoa_deg", "aod_deg", "rss_dbm", "label",
                  "ue_x", "ue_y", "path_len_m"]
TRAJECTORY_HEADER = ["t", "x", "y", "z"]


@dataclass(frozen=True)
class RadioConfig:
    """Carrier and transmit-power settings (mmWave defaults)."""

    carrier_hz: float = 28e9
    bandwidth_hz: float = 400e6
    tx_power_dbm: float = 30.0

    def __post_init__(self):
        if self.carrier_hz <= 0 or self.bandwidth_hz <= 0:
            raise DomainError("carrier_hz and bandwidth_hz must be positive")


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian observation noise. sigma_range is in meters and is converted
    to a time-of-arrival sigma via the speed of light."""

    sigma_range: float = 0.10
    sigma_angle: float = 1.0
    sigma_rss: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.sigma_range, self.sigma_angle, self.sigma_rss) < 0:
            raise DomainError("noise sigmas must be >= 0")

    def stream(self, *key: int) -> np.random.Generator:
        """Deterministic substream for a structural key (epoch, site, path)."""
        return np.random.default_rng(np.random.SeedSequence((self.seed,) + key))


@dataclass(frozen=True)
class GroundTruth:
    """Generating geometry attached to an observation for evaluation."""

    ue: Point2
    path_len_m: float


@dataclass(frozen=True)
class Measurement:
    """One channel observation: the four features plus provenance."""

    toa: float
    aoa: Bearing
    aod: Bearing
    rss: float
    label: Optional[int]
    gnb_id: GnbId
    t: float
    truth: Optional[GroundTruth] = None


@dataclass(frozen=True)
class TrajectoryPoint:
    """One epoch of the receiver trajectory."""

    t: float
    position: Point2
    z: float = 0.0


@dataclass(frozen=True)
class OutageMarker:
    """An (epoch, site) pair for which the tracer found no path at all."""

    t: float
    gnb_id: GnbId


@dataclass
class GeneratedDataset:
    measurements: list[Measurement]
    outages: list[OutageMarker]


def fspl_db(distance: float, carrier: float) -> float:
    """Free-space path loss 20*log10(4*pi*d*f/c) in dB."""
    if distance <= 0 or carrier <= 0:
        raise DomainError(f"fspl requires positive distance and carrier, got ({distance}, {carrier})")
    return 20.0 * math.log10(distance) + 20.0 * math.log10(carrier) + 20.0 * math.log10(4.0 * math.pi / C)


def _gnb_key(gnb_id: GnbId) -> int:
    """Stable non-negative integer key for substream derivation."""
    if isinstance(gnb_id, bool):
        return int(gnb_id)
    if isinstance(gnb_id, int):
        return gnb_id & 0xFFFFFFFF
    return zlib.crc32(str(gnb_id).encode("utf-8"))


def path_to_measurement(
    path: PropagationPath,
    radio: RadioConfig,
    noise: NoiseModel,
    scene: Scene,
    *,
    gnb_id: GnbId = 0,
    t: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    with_truth: bool = True,
) -> Measurement:
    """Convert one path into an observation.

    Draw order is fixed (range, aoa, aod, rss) so substreams stay reproducible.
    """
    if rng is None:
        rng = noise.stream()
    eps_range = rng.normal(0.0, noise.sigma_range)
    eps_aoa = rng.normal(0.0, noise.sigma_angle)
    eps_aod = rng.normal(0.0, noise.sigma_angle)
    eps_rss = rng.normal(0.0, noise.sigma_rss)

    bounce_loss = sum(scene.walls[w].loss_db for w in path.wall_ids)
    rss = radio.tx_power_dbm - fspl_db(path.length, radio.carrier_hz) - bounce_loss + eps_rss
    return Measurement(
        toa=(path.length + eps_range) / C,
        aoa=Bearing(path.aoa.degrees + eps_aoa),
        aod=Bearing(path.aod.degrees + eps_aod),
        rss=rss,
        label=path.order,
        gnb_id=gnb_id,
        t=t,
        truth=GroundTruth(ue=path.vertices[-1], path_len_m=path.length) if with_truth else None,
    )


def associated_gnbs(scene: Scene, ue: Point2, count: int = 2) -> list:
    """The `count` nearest sites by 2D distance; ties broken by lower id."""

    def sort_key(g):
        iid = (0, g.id, "") if isinstance(g.id, (int, float)) else (1, 0, str(g.id))
        return (ue.distance_to(g.position), iid)

    return sorted(scene.gnbs, key=sort_key)[:count]


def generate_dataset(
    scene: Scene,
    trajectory: Sequence[TrajectoryPoint],
    radio: RadioConfig = RadioConfig(),
    noise: NoiseModel = NoiseModel(),
    max_order: int = 3,
    *,
    n_associated: int = 2,
    with_truth: bool = True,
) -> GeneratedDataset:
    """Trace and observe every epoch of a trajectory.

    Each epoch is associated with its nearest and second-nearest site; every
    traced path to an associated site yields one measurement. An (epoch, site)
    pair with no path at all is recorded as an outage marker rather than an
    error. No shuffling happens here.
    """
    if not trajectory:
        raise DataError("empty trajectory")
    measurements: list[Measurement] = []
    outages: list[OutageMarker] = []
    for epoch_idx, pt in enumerate(trajectory):
        for gnb in associated_gnbs(scene, pt.position, n_associated):
            paths = trace_paths(scene, gnb.position, pt.position, max_order)
            if not paths:
                outages.append(OutageMarker(t=pt.t, gnb_id=gnb.id))
                continue
            for path_idx, path in enumerate(paths):
                rng = noise.stream(epoch_idx, _gnb_key(gnb.id), path_idx)
                measurements.append(path_to_measurement(
                    path, radio, noise, scene,
                    gnb_id=gnb.id, t=pt.t, rng=rng, with_truth=with_truth,
                ))
    return GeneratedDataset(measurements=measurements, outages=outages)


# ---------------------------------------------------------------------------
# CSV formats
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def write_trajectory_csv(points: Iterable[TrajectoryPoint], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRAJECTORY_HEADER)
        for p in points:
            w.writerow([_fmt(p.t), _fmt(p.position.x), _fmt(p.position.y), _fmt(p.z)])


def read_trajectory_csv(path) -> list[TrajectoryPoint]:
    points = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != TRAJECTORY_HEADER:
            raise DataError(f"trajectory header must be {','.join(TRAJECTORY_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                points.append(TrajectoryPoint(
                    t=float(row[0]), position=Point2(float(row[1]), float(row[2])),
                    z=float(row[3]),
                ))
            except (IndexError, ValueError) as e:
                raise DataError(f"trajectory line {lineno}: {e}") from e
    if not points:
        raise DataError("trajectory file has no epochs")
    return points


def _parse_gnb_id(text: str) -> GnbId:
    try:
        return int(text)
    except ValueError:
        return text


def write_dataset_csv(measurements: Iterable[Measurement], path, *, with_truth: bool = True) -> None:
    header = DATASET_HEADER if with_truth else DATASET_HEADER[:7]
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for m in measurements:
            row = [_fmt(m.t), str(m.gnb_id), _fmt(m.toa), _fmt(m.aoa.degrees),
                   _fmt(m.aod.degrees), _fmt(m.rss),
                   "" if m.label is None else str(m.label)]
            if with_truth:
                if m.truth is None:
                    raise DataError("measurement lacks ground truth but truth columns requested")
                row += [_fmt(m.truth.ue.x), _fmt(m.truth.ue.y), _fmt(m.truth.path_len_m)]
            w.writerow(row)


def read_dataset_csv(path) -> list[Measurement]:
    out = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header not in (DATASET_HEADER, DATASET_HEADER[:7]):
            raise DataError(f"dataset header must start {','.join(DATASET_HEADER[:7])}")
        has_truth = header == DATASET_HEADER
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                truth = None
                if has_truth:
                    truth = GroundTruth(ue=Point2(float(row[7]), float(row[8])),
                                        path_len_m=float(row[9]))
                out.append(Measurement(
                    t=float(row[0]), gnb_id=_parse_gnb_id(row[1]), toa=float(row[2]),
                    aoa=Bearing(float(row[3])), aod=Bearing(float(row[4])),
                    rss=float(row[5]),
                    label=None if row[6] == "" else int(row[6]),
                    truth=truth,
                ))
            except (IndexError, ValueError) as e:
                raise DataError(f"dataset line {lineno}: {e}") from e
    if not out:
        raise DataError("dataset file has no rows")
    return out
