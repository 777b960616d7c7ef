"""Price-series ingestion and per-session preprocessing.

Raw prices enter as ``timestamp,symbol,price`` CSV rows, get cut into trading
sessions, resampled onto a common grid (last observation carried forward), and
turned into zero-mean unit-variance log-return segments. Variance is always
the population convention (divide by length), so downstream power identities
hold exactly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateInputError,
    EmptyResultError,
    ValidationError,
)

DEFAULT_MIN_SEGMENT_LENGTH = 64


@dataclass(frozen=True)
class PriceSeries:
    """Timestamped prices for one symbol; timestamps are UTC epoch seconds."""

    symbol: str
    timestamps: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=float)
        px = np.asarray(self.prices, dtype=float)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "prices", px)
        if ts.shape != px.shape or ts.ndim != 1:
            raise ValidationError(f"{self.symbol}: timestamps and prices must be equal-length 1-d arrays")
        if len(ts) == 0:
            raise ValidationError(f"{self.symbol}: empty price series")
        if np.any(np.diff(ts) <= 0):
            bad = int(np.argmax(np.diff(ts) <= 0))
            raise ValidationError(
                f"{self.symbol}: timestamps not strictly increasing at index {bad + 1}"
            )
        if np.any(px <= 0) or not np.all(np.isfinite(px)):
            raise ValidationError(f"{self.symbol}: prices must be positive and finite")

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclass(frozen=True)
class SessionCalendar:
    """Ordered, non-overlapping (open, close) windows in epoch seconds."""

    sessions: tuple[tuple[float, float], ...]

    def __post_init__(self):
        sessions = tuple((float(o), float(c)) for o, c in self.sessions)
        object.__setattr__(self, "sessions", sessions)
        if not sessions:
            raise ValidationError("calendar has no sessions")
        for i, (o, c) in enumerate(sessions):
            if not o < c:
                raise ValidationError(f"session {i}: open {o} not before close {c}")
            if i > 0 and o < sessions[i - 1][1]:
                raise ValidationError(f"session {i} overlaps or precedes session {i - 1}")

    def __len__(self) -> int:
        return len(self.sessions)


@dataclass(frozen=True)
class StandardizedReturns:
    """Zero-mean unit-variance return segment for one symbol and session."""

    symbol: str
    session_index: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if abs(float(v.mean())) > 1e-9 or abs(float(v.var()) - 1.0) > 1e-9:
            raise ValidationError(
                f"{self.symbol} session {self.session_index}: values are not standardized"
            )

    def __len__(self) -> int:
        return len(self.values)


def to_log_returns(prices) -> np.ndarray:
    """Log-returns ln(p[k+1]/p[k]) of a positive price path.

    Accepts a :class:`PriceSeries` or a bare array. Raises
    :class:`DegenerateInputError` for fewer than 2 samples and
    :class:`ValidationError` for non-positive prices.
    """
    if isinstance(prices, PriceSeries):
        p = prices.prices
    else:
        p = np.asarray(prices, dtype=float)
    if p.size < 2:
        raise DegenerateInputError("need at least 2 prices to form returns")
    if np.any(p <= 0):
        raise ValidationError("prices must be positive")
    return np.diff(np.log(p))


def standardize(values) -> np.ndarray:
    """Affine map of ``values`` to sample mean 0 and population variance 1.

    Zero-variance input (a halted or illiquid session) raises
    :class:`DegenerateInputError`.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise DegenerateInputError("need at least 2 values to standardize")
    mean = v.mean()
    std = v.std()  # ddof=0
    if std == 0.0 or not np.isfinite(std):
        raise DegenerateInputError("zero-variance input cannot be standardized")
    return (v - mean) / std


def segment_sessions(
    prices: PriceSeries,
    calendar: SessionCalendar,
    min_samples: int = DEFAULT_MIN_SEGMENT_LENGTH,
) -> tuple[dict[int, PriceSeries], list[int]]:
    """Cut a price series at session boundaries.

    Returns ``(segments, short_sessions)`` where ``segments`` maps session
    index to the sub-series with ``open <= t <= close``, and ``short_sessions``
    lists sessions that had samples but fewer than ``min_samples`` of them
    (excluded from downstream analysis). Sessions with no samples at all are
    silently absent. Raises :class:`EmptyResultError` when no sample falls in
    any session.
    """
    segments: dict[int, PriceSeries] = {}
    short: list[int] = []
    ts = prices.timestamps
    any_hit = False
    for idx, (open_t, close_t) in enumerate(calendar.sessions):
        lo = np.searchsorted(ts, open_t, side="left")
        hi = np.searchsorted(ts, close_t, side="right")
        n = hi - lo
        if n == 0:
            continue
        any_hit = True
        if n < min_samples:
            short.append(idx)
            continue
        segments[idx] = PriceSeries(prices.symbol, ts[lo:hi], prices.prices[lo:hi])
    if not any_hit:
        raise EmptyResultError(f"{prices.symbol}: no sample falls in any calendar session")
    return segments, short


def session_grid(session: tuple[float, float], grid_step: float) -> np.ndarray:
    """Sampling grid open, open+step, ... up to and including close."""
    if grid_step <= 0:
        raise ValidationError("grid step must be positive")
    open_t, close_t = session
    n = int(np.floor((close_t - open_t) / grid_step)) + 1
    return open_t + grid_step * np.arange(n)


def align_and_fill(
    segments: dict[str, PriceSeries],
    session: tuple[float, float],
    grid_step: float,
    symbols: list[str] | None = None,
) -> tuple[np.ndarray, dict[str, np.ndarray], list[str]]:
    """Resample one session's segments onto a shared grid by LOCF.

    Grid points before a symbol's first trade take its first observed price.
    Returns ``(grid, values, missing)``; ``missing`` lists requested symbols
    with no observations in the session, flagged for exclusion from this
    session's matrices.
    """
    grid = session_grid(session, grid_step)
    if symbols is None:
        symbols = sorted(segments)
    values: dict[str, np.ndarray] = {}
    missing: list[str] = []
    for sym in symbols:
        seg = segments.get(sym)
        if seg is None or len(seg) == 0:
            missing.append(sym)
            continue
        # index of last observation at or before each grid point; -1 -> leading gap
        pos = np.searchsorted(seg.timestamps, grid, side="right") - 1
        values[sym] = seg.prices[np.maximum(pos, 0)]
    return grid, values, missing


# ---------------------------------------------------------------------------
# CSV ingestion


def parse_timestamp(text: str) -> float:
    """Epoch seconds from either a numeric string or ISO-8601 (UTC assumed)."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    iso = text.replace("Z", "+00:00")
    try:
        dt = datetime.fromisoformat(iso)
    except ValueError as exc:
        raise ValueError(f"unrecognized timestamp {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def read_prices_csv(
    path: str | Path, skip_bad_rows: bool = False
) -> tuple[dict[str, PriceSeries], list[str]]:
    """Read ``timestamp,symbol,price`` rows into per-symbol series.

    Parsing is strict: malformed rows are reported with their line numbers and
    abort the read unless ``skip_bad_rows`` is set, in which case they are
    returned for the run report. Rows may be interleaved across symbols; each
    symbol's samples are sorted by timestamp, and duplicate timestamps within
    a symbol are rejected.
    """
    path = Path(path)
    bad: list[str] = []
    per_symbol: dict[str, list[tuple[float, float]]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:3]] != ["timestamp", "symbol", "price"]:
            raise ValidationError(f"{path}: expected header 'timestamp,symbol,price'")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                if len(row) != 3:
                    raise ValueError(f"expected 3 fields, got {len(row)}")
                ts = parse_timestamp(row[0])
                sym = row[1].strip()
                if not sym:
                    raise ValueError("empty symbol")
                price = float(row[2])
                if not np.isfinite(price) or price <= 0:
                    raise ValueError(f"non-positive price {row[2]}")
            except ValueError as exc:
                bad.append(f"{path.name} line {lineno}: {exc}")
                continue
            per_symbol.setdefault(sym, []).append((ts, price))
    if bad and not skip_bad_rows:
        raise ValidationError(
            "malformed rows (rerun with --skip-bad-rows to drop them):\n  " + "\n  ".join(bad)
        )
    series: dict[str, PriceSeries] = {}
    for sym in sorted(per_symbol):
        rows = sorted(per_symbol[sym])
        ts = np.array([r[0] for r in rows])
        dup = np.flatnonzero(np.diff(ts) == 0)
        if dup.size:
            raise ValidationError(f"{path.name}: duplicate timestamp {ts[dup[0]]:.0f} for {sym}")
        series[sym] = PriceSeries(sym, ts, np.array([r[1] for r in rows]))
    if not series:
        raise EmptyResultError(f"{path}: no usable rows")
    return series, bad


def read_calendar_csv(path: str | Path) -> SessionCalendar:
    """Read an ``open,close`` per-session CSV into a calendar."""
    path = Path(path)
    sessions: list[tuple[float, float]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["open", "close"]:
            raise ValidationError(f"{path}: expected header 'open,close'")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                if len(row) != 2:
                    raise ValueError(f"expected 2 fields, got {len(row)}")
                sessions.append((parse_timestamp(row[0]), parse_timestamp(row[1])))
            except ValueError as exc:
                raise ValidationError(f"{path.name} line {lineno}: {exc}") from exc
    if not sessions:
        raise ValidationError(f"{path}: calendar has no sessions")
    return SessionCalendar(tuple(sessions))
