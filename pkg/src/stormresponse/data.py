"""Hindcast ingestion, storm-peak extraction and steepness/period conversions.

Sea states are 3-hour summaries of (significant wave height, mean
zero-crossing period).  Storms are isolated as runs of sea states above a
high quantile of hs, de-clustered with a minimum calm gap, and each storm
contributes one peak (its largest hs together with the steepness at that
record).
"""

from __future__ import annotations

import csv
import datetime as _dt
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

G = 9.81  # gravitational acceleration, m/s^2
SECONDS_PER_YEAR = 365.25 * 86400.0


def steepness_from_period(hs, t2):
    """Wave steepness s2 = 2*pi*hs / (g*t2^2) for hs [m], t2 [s]."""
    hs = np.asarray(hs, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    out = 2.0 * np.pi * hs / (G * t2 ** 2)
    return float(out) if out.ndim == 0 else out


def period_from_steepness(hs, s2):
    """Inverse of :func:`steepness_from_period`: t2 = sqrt(2*pi*hs/(g*s2))."""
    hs = np.asarray(hs, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    out = np.sqrt(2.0 * np.pi * hs / (G * s2))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HindcastSeries:
    """Ordered sea-state series: epoch timestamps [s], hs [m], t2 [s]."""

    time: np.ndarray
    hs: np.ndarray
    t2: np.ndarray
    cadence: float = 10800.0

    def __post_init__(self):
        for name in ("time", "hs", "t2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.time.size == 0:
            raise DataError("no records")
        if not (np.diff(self.time) > 0).all():
            raise DataError("timestamps are not strictly increasing")
        if not (self.hs > 0).all():
            raise DataError("hs must be positive")
        if not (self.t2 > 0).all():
            raise DataError("t2 must be positive")

    def __len__(self):
        return self.time.size

    @property
    def years_spanned(self) -> float:
        return float(self.time[-1] - self.time[0]) / SECONDS_PER_YEAR


@dataclass(frozen=True)
class StormPeakSample:
    """Storm-peak (hs, s2) pairs with the annual event rate n_an."""

    hs: np.ndarray
    s2: np.ndarray
    n_an: float
    years_spanned: float

    def __post_init__(self):
        object.__setattr__(self, "hs", np.asarray(self.hs, dtype=float))
        object.__setattr__(self, "s2", np.asarray(self.s2, dtype=float))
        if self.hs.shape != self.s2.shape:
            raise DataError("hs and s2 must have equal length")
        if not (self.hs > 0).all():
            raise DataError("storm peak hs must be positive")
        if not ((self.s2 > 0) & (self.s2 < 1)).all():
            raise DataError("storm peak s2 must lie in (0, 1)")
        if self.n_an <= 0:
            raise DataError("n_an must be positive")

    def __len__(self):
        return self.hs.size


@dataclass(frozen=True)
class PeakExtractionConfig:
    """Storm isolation settings.

    ``threshold_quantile`` sets the hs level separating storm from calm;
    runs of exceedances closer than ``min_gap`` calm states are merged into
    one storm.  ``threshold`` optionally pins the absolute hs threshold,
    making extraction independent of the sample quantile (useful when the
    same storms must be recovered from augmented series).
    """

    threshold_quantile: float = 0.7
    min_gap: int = 4
    threshold: float | None = field(default=None)

    def __post_init__(self):
        if not 0.0 < self.threshold_quantile < 1.0:
            raise DataError("threshold_quantile must lie in (0, 1)")
        if self.min_gap < 1:
            raise DataError("min_gap must be >= 1")


def _parse_time(token: str, row: int) -> float:
    token = token.strip()
    try:
        return float(int(token))
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    try:
        iso = token.replace("Z", "+00:00")
        stamp = _dt.datetime.fromisoformat(iso)
        if stamp.tzinfo is None:
            stamp = stamp.replace(tzinfo=_dt.timezone.utc)
        return stamp.timestamp()
    except ValueError:
        raise DataError(f"row {row}: unparseable time {token!r}") from None


def load_hindcast(path, cadence: float = 10800.0) -> HindcastSeries:
    """Read a ``time,hs,t2`` CSV into a validated :class:`HindcastSeries`.

    ``time`` may be ISO-8601 or integer epoch seconds.  Any invalid row
    raises :class:`DataError` naming the (1-based, data) row index.
    """
    times, hss, t2s = [], [], []
    try:
        fh = open(path, "r", newline="")
    except OSError as exc:
        raise DataError(f"cannot open hindcast file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError("no records")
        cols = [c.strip().lower() for c in header]
        if cols[:3] != ["time", "hs", "t2"]:
            raise DataError(f"expected header time,hs,t2 but found {','.join(header)}")
        for i, parts in enumerate(reader, start=1):
            if not parts or all(not p.strip() for p in parts):
                continue
            if len(parts) < 3:
                raise DataError(f"row {i}: expected 3 fields, found {len(parts)}")
            t = _parse_time(parts[0], i)
            try:
                hs = float(parts[1])
                t2 = float(parts[2])
            except ValueError:
                raise DataError(f"row {i}: non-numeric hs/t2") from None
            if hs <= 0:
                raise DataError(f"row {i}: hs must be positive, found {hs}")
            if t2 <= 0:
                raise DataError(f"row {i}: t2 must be positive, found {t2}")
            if times and t <= times[-1]:
                raise DataError(f"row {i}: time not increasing")
            times.append(t)
            hss.append(hs)
            t2s.append(t2)
    if not times:
        raise DataError("no records")
    return HindcastSeries(np.array(times), np.array(hss), np.array(t2s), cadence=cadence)


def _exceedance_runs(above: np.ndarray) -> list[tuple[int, int]]:
    """Half-open [start, stop) index ranges of consecutive True values."""
    idx = np.flatnonzero(np.diff(np.concatenate(([False], above, [False])).astype(int)))
    return list(zip(idx[0::2], idx[1::2]))


def extract_storm_peaks(
    series: HindcastSeries, cfg: PeakExtractionConfig | None = None
) -> StormPeakSample:
    """Isolate storms and return one (hs, s2) peak per storm.

    A storm is a maximal run of sea states with hs above the threshold;
    runs separated by fewer than ``cfg.min_gap`` calm states are merged.
    The peak is the record of largest hs in the storm, with steepness
    computed from its period.
    """
    cfg = cfg or PeakExtractionConfig()
    thr = cfg.threshold
    if thr is None:
        thr = float(np.quantile(series.hs, cfg.threshold_quantile))
    above = series.hs > thr
    if not above.any():
        raise DataError(f"no exceedances of threshold {thr:.6g}")
    runs = _exceedance_runs(above)
    merged: list[list[int]] = [list(runs[0])]
    for start, stop in runs[1:]:
        if start - merged[-1][1] < cfg.min_gap:
            merged[-1][1] = stop
        else:
            merged.append([start, stop])
    peak_hs, peak_s2 = [], []
    for start, stop in merged:
        j = start + int(np.argmax(series.hs[start:stop]))
        peak_hs.append(series.hs[j])
        peak_s2.append(steepness_from_period(series.hs[j], series.t2[j]))
    years = series.years_spanned
    if years <= 0:
        raise DataError("series spans zero time")
    return StormPeakSample(
        hs=np.array(peak_hs),
        s2=np.array(peak_s2),
        n_an=len(peak_hs) / years,
        years_spanned=years,
    )


def write_peaks_csv(sample: StormPeakSample, path) -> None:
    """Write storm peaks as an ``hs,s2`` CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hs", "s2"])
        for h, s in zip(sample.hs, sample.s2):
            writer.writerow([repr(float(h)), repr(float(s))])


def read_peaks_csv(path, n_an: float, years_spanned: float) -> StormPeakSample:
    """Read an ``hs,s2`` CSV back into a sample; rate metadata is external."""
    hs, s2 = [], []
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header[:2]] != ["hs", "s2"]:
            raise DataError(f"expected header hs,s2 in {path}")
        for i, parts in enumerate(reader, start=1):
            if not parts:
                continue
            try:
                hs.append(float(parts[0]))
                s2.append(float(parts[1]))
            except (ValueError, IndexError):
                raise DataError(f"row {i}: malformed peak row") from None
    if not hs:
        raise DataError("no records")
    return StormPeakSample(np.array(hs), np.array(s2), n_an=n_an, years_spanned=years_spanned)
