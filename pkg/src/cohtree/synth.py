"""Synthetic processes with known ground truth.

Every estimator in this package is exercised against these generators: white
noise (unit-power, flat spectrum), circularly delayed copies (zero-correlation
but full-coherence pairs), AR(1) drivers, and planted factor markets whose
group structure is known in advance. All output is a pure function of the
spec, including the seed; reruns with the same spec produce identical values.

The delay is circular rather than truncating so both series keep the same
length and the same sample multiset. A delayed copy is the sharpest test of
the two metrics: the correlation of a white series with its own delay is near
zero (distance near sqrt(2)) while the coherence stays near one (distance
near zero), because the delay is a pure phase shift.

factor_market builds ``member k of group g = loading_g * factor_g delayed by
k*lag + noise * eps``. With white factors and lag >= 1, within-group pairs
are nearly uncorrelated yet strongly coherent, planting exactly the structure
a coherence taxonomy should recover and a correlation taxonomy should miss.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .graph import SectorLabeling
from .metrics import fmt_sig12
from .series import standardize

GENERATOR_KINDS = ("white", "delayed_copy", "ar1", "factor_market")

# group g of a factor market gets sector g from this cycle
_SYNTH_SECTORS = (
    "Financial",
    "Technology",
    "Energy",
    "Services",
    "Healthcare",
    "Utilities",
    "Consumer",
    "Basic Material",
    "Capital Goods",
    "Transportations",
    "Conglomerates",
)


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters for one synthetic process.

    ``length`` counts return samples. ``loading`` may be a single float
    applied to every group or one float per group; ``noise`` defaults to
    ``sqrt(1 - loading^2)`` so members have unit variance before the final
    standardization.
    """

    kind: str
    length: int
    seed: int
    delay: int = 1
    phi: float = 0.0
    n_groups: int = 3
    group_size: int = 4
    loading: float | tuple[float, ...] = 0.9
    lag: int = 1
    noise: float | None = None

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValidationError(f"unknown generator kind {self.kind!r}, expected one of {GENERATOR_KINDS}")
        if self.length < 2:
            raise ValidationError(f"length must be >= 2, got {self.length}")
        if not -1.0 < self.phi < 1.0:
            raise ValidationError(f"AR coefficient must satisfy |phi| < 1, got {self.phi}")
        if self.kind == "delayed_copy" and not 0 <= self.delay < self.length:
            raise ValidationError(f"delay must lie in [0, {self.length}), got {self.delay}")
        if self.kind == "factor_market":
            if self.n_groups < 1 or self.group_size < 2:
                raise ValidationError(
                    f"factor market needs >= 1 group of size >= 2, got {self.n_groups} x {self.group_size}"
                )
            if self.lag < 0:
                raise ValidationError(f"lag must be >= 0, got {self.lag}")
            for g, l in enumerate(self.loadings):
                if not 0.0 < l <= 1.0:
                    raise ValidationError(f"loading for group {g} must lie in (0, 1], got {l}")
            if self.noise is not None and not self.noise > 0.0:
                raise ValidationError(f"noise level must be > 0, got {self.noise}")

    @property
    def loadings(self) -> tuple[float, ...]:
        if isinstance(self.loading, tuple):
            if len(self.loading) != self.n_groups:
                raise ValidationError(
                    f"{len(self.loading)} loadings given for {self.n_groups} groups"
                )
            return self.loading
        return (float(self.loading),) * self.n_groups


def white_noise(spec: GeneratorSpec) -> np.ndarray:
    """Standard normal sequence, deterministic under the spec's seed."""
    return np.random.default_rng(spec.seed).standard_normal(spec.length)


def delayed_copy(base, d: int) -> np.ndarray:
    """Circular shift of ``base`` by ``d`` samples: result[t] = base[t - d]."""
    base = np.asarray(base, dtype=float)
    if not 0 <= d < len(base):
        raise ValidationError(f"delay must lie in [0, {len(base)}), got {d}")
    return np.roll(base, d)


def _ar1_values(rng: np.random.Generator, n: int, phi: float) -> np.ndarray:
    """AR(1) with unit marginal variance at every t (stationary start)."""
    x = np.empty(n)
    x[0] = rng.standard_normal()
    e = rng.standard_normal(n - 1) * np.sqrt(1.0 - phi * phi)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t - 1]
    return x


def ar1(spec: GeneratorSpec) -> np.ndarray:
    return _ar1_values(np.random.default_rng(spec.seed), spec.length, spec.phi)


@dataclass(frozen=True)
class SyntheticMarket:
    """Generated series keyed by symbol plus their planted labels."""

    series: dict[str, np.ndarray]
    labels: SectorLabeling


def factor_market(spec: GeneratorSpec) -> SyntheticMarket:
    """Planted-cluster market: per group one independent driver (white, or
    AR(1) when phi != 0), members are the driver delayed by k*lag plus
    idiosyncratic noise, then standardized."""
    if spec.kind != "factor_market":
        raise ValidationError(f"factor_market called with kind {spec.kind!r}")
    rng = np.random.default_rng(spec.seed)
    n = spec.length
    series: dict[str, np.ndarray] = {}
    labels: dict[str, tuple[str, str]] = {}
    for g in range(spec.n_groups):
        loading = spec.loadings[g]
        noise = spec.noise if spec.noise is not None else float(np.sqrt(1.0 - loading * loading))
        if not noise > 0.0:
            raise ValidationError(
                f"group {g}: loading {loading} leaves zero default noise; pass an explicit noise level"
            )
        factor = _ar1_values(rng, n, spec.phi) if spec.phi != 0.0 else rng.standard_normal(n)
        sector = _SYNTH_SECTORS[g % len(_SYNTH_SECTORS)]
        prefix = chr(ord("A") + g % 26) + ("" if g < 26 else str(g // 26))
        for k in range(spec.group_size):
            eps = rng.standard_normal(n)
            raw = loading * np.roll(factor, k * spec.lag) + noise * eps
            sym = f"{prefix}{k}"
            series[sym] = standardize(raw)
            labels[sym] = (sector, sector)
    return SyntheticMarket(series, SectorLabeling(labels))


# ---------------------------------------------------------------------------
# dataset writer: same CSV schema the pipeline ingests


def write_dataset(
    out_dir,
    series: dict[str, np.ndarray],
    labels: SectorLabeling,
    sessions: int,
    grid_step: float,
    manifest: dict,
    start: float = 86400.0,
) -> dict[str, str]:
    """Render generated return series as a price dataset on disk.

    Each series is split into ``sessions`` equal blocks of returns; block s
    becomes one trading session (one per day, or one per several days when
    the grid outgrows a day) with one price row every ``grid_step`` seconds,
    integrated as
    ``p[k+1] = p[k] * exp(0.001 * r[k])`` from a base of 100. Writes
    ``prices.csv``, ``calendar.csv``, ``labels.csv``, and ``manifest.json``
    (which records the seed), returns their paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    symbols = sorted(series)
    if not symbols:
        raise ValidationError("no series to write")
    n = len(series[symbols[0]])
    if any(len(series[s]) != n for s in symbols):
        raise ValidationError("all series must have equal length")
    if sessions < 1 or n % sessions != 0:
        raise ValidationError(
            f"length {n} does not split into {sessions} equal sessions"
        )
    per = n // sessions  # returns per session; prices per session = per + 1
    # one session per day, or per several days when the grid outgrows one
    day = 86400.0
    stride = day * max(1.0, float(np.ceil((per * grid_step + 3600.0) / day)))
    price_lines = ["timestamp,symbol,price"]
    calendar_lines = ["open,close"]
    for s in range(sessions):
        open_t = start + s * stride
        close_t = open_t + per * grid_step
        calendar_lines.append(f"{fmt_sig12(open_t)},{fmt_sig12(close_t)}")
        prices = {
            sym: 100.0 * np.exp(np.concatenate(([0.0], np.cumsum(0.001 * series[sym][s * per:(s + 1) * per]))))
            for sym in symbols
        }
        for k in range(per + 1):
            t = fmt_sig12(open_t + k * grid_step)
            for sym in symbols:
                price_lines.append(f"{t},{sym},{fmt_sig12(float(prices[sym][k]))}")
    label_lines = ["symbol,sector,industry"]
    for sym in symbols:
        label_lines.append(f"{sym},{labels.sector_of(sym)},{labels.industry_of(sym)}")

    paths = {
        "prices": out / "prices.csv",
        "calendar": out / "calendar.csv",
        "labels": out / "labels.csv",
        "manifest": out / "manifest.json",
    }
    paths["prices"].write_text("\n".join(price_lines) + "\n", encoding="utf-8")
    paths["calendar"].write_text("\n".join(calendar_lines) + "\n", encoding="utf-8")
    paths["labels"].write_text("\n".join(label_lines) + "\n", encoding="utf-8")
    manifest = dict(manifest)
    manifest.update({"sessions": sessions, "grid_step": grid_step, "symbols": symbols})
    paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return {k: str(v) for k, v in paths.items()}


def spec_manifest(spec: GeneratorSpec) -> dict:
    d = asdict(spec)
    if isinstance(d["loading"], tuple):
        d["loading"] = list(d["loading"])
    return {"generator": d}
