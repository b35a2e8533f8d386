"""CSV ingestion, hourly resampling, profile bundles and synthetic days.

Input CSVs use one canonical shape: a ``timestamp,value`` header, ISO-8601
local timestamps and decimal values. Prices are currency/kWh, loads and
generation kW.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from hems.env import HOURS_PER_DAY, DayProfile
from hems.errors import ValidationError

UNITS = ("currency/kWh", "kW")


@dataclass
class RawSeries:
    points: list[tuple[dt.datetime, float]]
    unit: str = "kW"

    def __post_init__(self):
        if self.unit not in UNITS:
            raise ValidationError(f"unit must be one of {UNITS}, got {self.unit!r}")
        prev = None
        for ts, v in self.points:
            if prev is not None and ts <= prev:
                raise ValidationError(f"timestamps not strictly increasing at {ts.isoformat()}")
            if not math.isfinite(v) or v < 0:
                raise ValidationError(f"invalid value {v} at {ts.isoformat()}")
            prev = ts


@dataclass
class DatasetSplit:
    train_days: list[DayProfile] = field(default_factory=list)
    eval_days: list[DayProfile] = field(default_factory=list)

    def all_days(self) -> list[DayProfile]:
        """Union of both roles, one profile per date, ordered by date."""
        by_date: dict[str, DayProfile] = {}
        for d in self.train_days + self.eval_days:
            if d.date in by_date and by_date[d.date] != d:
                raise ValidationError(f"conflicting profiles for {d.date}")
            by_date[d.date] = d
        return [by_date[k] for k in sorted(by_date)]


def read_series(
    path: str | os.PathLike,
    unit: str = "kW",
    timestamp_col: str = "timestamp",
    value_col: str = "value",
) -> RawSeries:
    """Read a CSV feed; other column names can be mapped onto the canonical pair."""
    points = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or timestamp_col not in reader.fieldnames or value_col not in reader.fieldnames:
            raise ValidationError(f"{path}: expected columns {timestamp_col!r} and {value_col!r}")
        for lineno, row in enumerate(reader, start=2):
            try:
                ts = dt.datetime.fromisoformat(row[timestamp_col].strip())
                v = float(row[value_col])
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            if ts.tzinfo is not None:
                ts = ts.replace(tzinfo=None)
            points.append((ts, v))
    return RawSeries(points, unit)


def resample_hourly(series: RawSeries, day: dt.date) -> list[float]:
    """Arithmetic mean of the points falling inside each hour of ``day``."""
    start = dt.datetime.combine(day, dt.time())
    buckets: list[list[float]] = [[] for _ in range(HOURS_PER_DAY)]
    prev = None
    for ts, v in series.points:
        if prev is not None and ts <= prev:
            raise ValidationError(f"timestamps not strictly increasing at {ts.isoformat()}")
        prev = ts
        offset = ts - start
        if offset < dt.timedelta(0) or offset >= dt.timedelta(days=1):
            continue
        buckets[int(offset.total_seconds() // 3600)].append(v)
    out = []
    for h, b in enumerate(buckets):
        if not b:
            raise ValidationError(f"no data for {day.isoformat()} hour {h:02d}")
        out.append(math.fsum(b) / len(b))
    return out


def _day_range(start: dt.date, days: int) -> list[dt.date]:
    return [start + dt.timedelta(days=i) for i in range(days)]


def build_profiles(
    price: RawSeries,
    background: RawSeries,
    renewable: RawSeries,
    price_days: Sequence[dt.date],
    background_days: Sequence[dt.date] | None = None,
    renewable_days: Sequence[dt.date] | None = None,
) -> list[DayProfile]:
    """Zip day ``i`` of every source into profile ``i``.

    Sources may come from different years; profiles are dated by the price
    calendar. Load and generation day ranges default to the price days.
    """
    background_days = list(price_days) if background_days is None else list(background_days)
    renewable_days = list(price_days) if renewable_days is None else list(renewable_days)
    lens = {len(price_days), len(background_days), len(renewable_days)}
    if len(lens) != 1:
        raise ValidationError(
            f"day range lengths differ: price={len(price_days)}, "
            f"background={len(background_days)}, renewable={len(renewable_days)}"
        )
    return [
        DayProfile(
            date=pd.isoformat(),
            price=resample_hourly(price, pd),
            background=resample_hourly(background, bd),
            renewable=resample_hourly(renewable, rd),
        )
        for pd, bd, rd in zip(price_days, background_days, renewable_days)
    ]


def ingest(
    price_csv,
    background_csv,
    renewable_csv,
    train_start: dt.date,
    train_days: int,
    eval_start: dt.date,
    eval_days: int,
    load_train_start: dt.date | None = None,
    load_eval_start: dt.date | None = None,
) -> DatasetSplit:
    if train_days < 1 or eval_days < 1:
        raise ValidationError("train_days and eval_days must be >= 1")
    price = read_series(price_csv, "currency/kWh")
    background = read_series(background_csv, "kW")
    renewable = read_series(renewable_csv, "kW")

    def split(p_start, l_start, n):
        pdays = _day_range(p_start, n)
        ldays = _day_range(l_start or p_start, n)
        return build_profiles(price, background, renewable, pdays, ldays, ldays)

    return DatasetSplit(
        train_days=split(train_start, load_train_start, train_days),
        eval_days=split(eval_start, load_eval_start, eval_days),
    )


def _smooth_bump(hours: np.ndarray, center: float, width: float) -> np.ndarray:
    # circular distance so bumps wrap around midnight
    d = np.abs(hours - center)
    d = np.minimum(d, HOURS_PER_DAY - d)
    return np.exp(-0.5 * (d / width) ** 2)


def synth_generate(seed: int, days: int, start: dt.date = dt.date(2021, 5, 1)) -> list[DayProfile]:
    """Seeded synthetic days.

    Price: evening-peaked diurnal curve with a pronounced midday trough that
    overlaps the solar peak, plus noise. Renewable: daytime bell with a
    per-day cloud factor. Background: morning and evening peaks on a base load.
    """
    if days < 1:
        raise ValidationError("days must be >= 1")
    rng = np.random.default_rng(seed)
    hours = np.arange(HOURS_PER_DAY, dtype=float) + 0.5
    out = []
    for i in range(days):
        trough_center = 12.5 + rng.uniform(-1.5, 1.5)
        trough_depth = rng.uniform(0.06, 0.10)
        price = (
            0.15
            + 0.08 * _smooth_bump(hours, 19.0, 2.5)
            + 0.02 * _smooth_bump(hours, 8.0, 1.5)
            - 0.03 * _smooth_bump(hours, 3.5, 1.5)
            - trough_depth * _smooth_bump(hours, trough_center, 1.5)
            + rng.normal(0.0, 0.008, HOURS_PER_DAY)
        )
        price = np.maximum(price, 0.01)

        cloud = rng.uniform(0.3, 1.0)
        daylight = (hours > 6.0) & (hours < 20.0)
        renewable = cloud * 1.2 * _smooth_bump(hours, 13.0, 2.5) * daylight
        renewable = np.maximum(renewable * (1.0 + rng.normal(0.0, 0.1, HOURS_PER_DAY)), 0.0)

        background = (
            0.2
            + 0.4 * _smooth_bump(hours, 7.5, 1.2)
            + 0.7 * _smooth_bump(hours, 19.5, 1.8)
            + rng.normal(0.0, 0.05, HOURS_PER_DAY)
        )
        background = np.maximum(background, 0.05)

        out.append(
            DayProfile(
                date=(start + dt.timedelta(days=i)).isoformat(),
                price=np.round(price, 6).tolist(),
                background=np.round(background, 6).tolist(),
                renewable=np.round(renewable, 6).tolist(),
            )
        )
    return out


def dump_bundle(profiles: Iterable[DayProfile]) -> str:
    return json.dumps([p.to_dict() for p in profiles], indent=1)


def save_bundle(profiles: Iterable[DayProfile], path: str | os.PathLike) -> None:
    Path(path).write_text(dump_bundle(profiles) + "\n")


def load_bundle(path: str | os.PathLike) -> list[DayProfile]:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read profile bundle {path}: {exc}") from exc
    if not isinstance(raw, list):
        raise ValidationError("profile bundle must be a JSON array")
    profiles = [DayProfile.from_dict(d) for d in raw]
    dates = [p.date for p in profiles]
    if len(set(dates)) != len(dates):
        raise ValidationError("duplicate dates in profile bundle")
    return profiles


def select_days(profiles: Sequence[DayProfile], start: str | None = None, end: str | None = None) -> list[DayProfile]:
    """Profiles with ``start <= date <= end`` (ISO strings, inclusive)."""
    out = [p for p in profiles if (start is None or p.date >= start) and (end is None or p.date <= end)]
    if not out:
        raise ValidationError(f"no profiles between {start} and {end}")
    return out


def find_day(profiles: Sequence[DayProfile], date: str) -> DayProfile:
    for p in profiles:
        if p.date == date:
            return p
    raise ValidationError(f"day {date} not in bundle")
