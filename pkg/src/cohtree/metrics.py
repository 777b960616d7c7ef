"""Pairwise distances between return series and their session matrices.

Two metrics are supported:

* correlation distance ``sqrt(2 * (1 - rho))`` -- the Euclidean distance
  between the unit-normalized sample vectors, hence a true metric;
* coherence distance ``sqrt((1/2pi) * integral(1 - C(omega)))`` over
  ``[-pi, pi]`` -- zero for pairs related by any linear time-invariant filter
  (delays included), one for spectrally unrelated pairs.

The modeling-error identity ties them to a regression view: for standardized
series, the residual power of the best constant-gain fit of one series on the
other equals the squared correlation distance exactly.

Correlations and coherences are clamped into their valid ranges before the
square roots, so rounding noise cannot abort a long pairwise run. Distances
are averaged across sessions as distances (never as correlations that are
converted afterwards).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateInputError,
    InsufficientDataError,
    ValidationError,
)
from .spectral import (
    CoherenceSpectrum,
    SpectralConfig,
    coherence,
    coherence_from_spectra,
    welch_csd,
    welch_psd,
)

METRIC_KINDS = ("correlation", "coherence")


def fmt_sig12(value: float) -> str:
    """Serialize a float with 12 significant digits (deterministic exports)."""
    return format(value, ".12g")


# ---------------------------------------------------------------------------
# pairwise metrics


def pearson_correlation(x, y) -> float:
    """Sample Pearson correlation, population-variance convention, clamped to
    [-1, 1]. Constant input raises :class:`DegenerateInputError`."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValidationError(f"need two equal-length series of >= 2 samples, got {x.shape} and {y.shape}")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(np.mean(xc * xc))
    sy = np.sqrt(np.mean(yc * yc))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateInputError("correlation of a constant series is undefined")
    rho = float(np.mean(xc * yc) / (sx * sy))
    return min(1.0, max(-1.0, rho))


def correlation_distance(x, y) -> float:
    """``sqrt(2 * (1 - rho))``; 0 for identical, 2 for anti-identical."""
    d = np.sqrt(2.0 * (1.0 - pearson_correlation(x, y)))
    assert 0.0 <= d <= 2.0
    return float(d)


def model_gain(x_i, x_j) -> float:
    """Ratio of sample second moments, power(x_j) / power(x_i)."""
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    p_i = float(np.mean(x_i * x_i))
    if p_i <= 0.0:
        raise DegenerateInputError("zero-power reference series")
    return float(np.mean(x_j * x_j)) / p_i


def residual_power_ratio(x_i, x_j) -> float:
    """Residual-to-signal power of the constant-gain fit of ``x_j`` on ``x_i``.

    Both inputs must be standardized (zero mean, unit power); only then does
    the identity ``ratio == correlation_distance**2`` hold exactly, which is
    why non-standardized input is rejected.
    """
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    for name, v in (("x_i", x_i), ("x_j", x_j)):
        if abs(float(v.mean())) > 1e-9 or abs(float(np.mean(v * v)) - 1.0) > 1e-9:
            raise ValidationError(f"{name} is not standardized (zero mean, unit power required)")
    alpha = model_gain(x_i, x_j)
    e = x_j - alpha * x_i
    return float(np.mean(e * e) / np.mean(x_j * x_j))


def coherence_distance_from_spectrum(coh: CoherenceSpectrum) -> float:
    """Quadrature step: trapezoidal integral of ``1 - C`` over the [0, pi]
    grid, doubled for the symmetric half and normalized by ``2*pi``, rooted.

    Trapezoid keeps the endpoints exact at any grid size: C == 1 gives 0 and
    C == 0 gives 1.
    """
    integral = float(np.trapezoid(1.0 - coh.values, coh.frequencies))
    d = np.sqrt(integral / np.pi)
    assert 0.0 <= d <= 1.0
    return float(d)


def coherence_distance(x, y, cfg: SpectralConfig = SpectralConfig()) -> float:
    """Coherence-deficit distance between two equal-length series."""
    return coherence_distance_from_spectrum(coherence(x, y, cfg))


# ---------------------------------------------------------------------------
# distance matrices


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric pairwise distances with zero diagonal.

    ``counts[i, j]`` is the number of sessions contributing to entry (i, j)
    (1 everywhere for a single-session matrix); entries backed by zero
    sessions are NaN. ``excluded`` reports symbols dropped from the
    computation, e.g. absent or halted in the session.
    """

    symbols: tuple[str, ...]
    values: np.ndarray
    kind: str
    counts: np.ndarray | None = None
    excluded: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ValidationError(f"unknown metric kind {self.kind!r}")
        v = np.asarray(self.values, dtype=float)
        n = len(self.symbols)
        if v.shape != (n, n):
            raise ValidationError(f"matrix shape {v.shape} does not match {n} symbols")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "symbols", tuple(self.symbols))
        object.__setattr__(self, "excluded", tuple(self.excluded))
        if self.counts is None:
            object.__setattr__(self, "counts", np.ones((n, n), dtype=int))
        else:
            object.__setattr__(self, "counts", np.asarray(self.counts, dtype=int))
        if np.any(np.abs(np.diag(v)) > 1e-12):
            raise ValidationError("diagonal must be zero")
        finite = np.isfinite(v)
        if not np.array_equal(finite, finite.T):
            raise ValidationError("missing entries must be symmetric")
        both = finite & finite.T
        if np.any(np.abs((v - v.T)[both]) > 1e-12):
            raise ValidationError("matrix must be symmetric within 1e-12")
        hi = 2.0 if self.kind == "correlation" else 1.0
        if np.any(v[finite] < 0.0) or np.any(v[finite] > hi):
            raise ValidationError(f"{self.kind} distances must lie in [0, {hi:g}]")

    @property
    def n(self) -> int:
        return len(self.symbols)

    def entry(self, a: str, b: str) -> float:
        i, j = self.symbols.index(a), self.symbols.index(b)
        return float(self.values[i, j])

    def missing_pairs(self) -> list[tuple[str, str]]:
        """Unordered symbol pairs whose entry has no backing session."""
        out = []
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if not np.isfinite(self.values[i, j]):
                    out.append((self.symbols[i], self.symbols[j]))
        return out


def session_distance_matrix(
    data: dict[str, np.ndarray],
    kind: str,
    cfg: SpectralConfig = SpectralConfig(),
    excluded: tuple[str, ...] = (),
) -> DistanceMatrix:
    """All-pairs distance matrix for one session.

    ``data`` maps symbol to its aligned standardized returns; symbols are
    ordered lexicographically in the result. Each unordered pair is computed
    once. For the coherence metric, per-symbol auto-spectra are estimated once
    and shared across pairs.
    """
    if kind not in METRIC_KINDS:
        raise ValidationError(f"unknown metric kind {kind!r}")
    symbols = tuple(sorted(data))
    if len(symbols) < 2:
        raise InsufficientDataError(f"need >= 2 symbols in a session, got {len(symbols)}")
    n = len(symbols)
    values = np.zeros((n, n))
    if kind == "coherence":
        for sym in symbols:
            if cfg.n_segments(len(data[sym])) < 2:
                raise InsufficientDataError(
                    f"{sym}: {len(data[sym])} samples give < 2 averaged segments "
                    f"(segment {cfg.segment_length}, stride {cfg.stride})"
                )
        psds = {sym: welch_psd(data[sym], cfg) for sym in symbols}
        for i in range(n):
            for j in range(i + 1, n):
                pxy = welch_csd(data[symbols[i]], data[symbols[j]], cfg)
                coh = coherence_from_spectra(psds[symbols[i]], psds[symbols[j]], pxy)
                values[i, j] = values[j, i] = coherence_distance_from_spectrum(coh)
    else:
        for i in range(n):
            for j in range(i + 1, n):
                values[i, j] = values[j, i] = correlation_distance(
                    data[symbols[i]], data[symbols[j]]
                )
    return DistanceMatrix(symbols, values, kind, excluded=tuple(excluded))


def average_matrices(per_session: list[DistanceMatrix]) -> DistanceMatrix:
    """Entrywise mean over sessions, masked by pairwise presence.

    The symbol set is the union across sessions; an entry averages only the
    sessions in which both of its symbols are present, and the per-entry
    session count is kept. Entries with no backing session come out NaN.
    """
    if not per_session:
        raise ValidationError("no session matrices to average")
    kinds = {m.kind for m in per_session}
    if len(kinds) != 1:
        raise ValidationError(f"cannot average mixed metric kinds {sorted(kinds)}")
    symbols = tuple(sorted(set().union(*(m.symbols for m in per_session))))
    n = len(symbols)
    pos = {s: i for i, s in enumerate(symbols)}
    total = np.zeros((n, n))
    counts = np.zeros((n, n), dtype=int)
    for m in per_session:
        idx = np.array([pos[s] for s in m.symbols])
        finite = np.isfinite(m.values)
        total[np.ix_(idx, idx)] += np.where(finite, m.values, 0.0)
        counts[np.ix_(idx, idx)] += finite.astype(int)
    with np.errstate(invalid="ignore"):
        mean = np.where(counts > 0, total / np.maximum(counts, 1), np.nan)
    np.fill_diagonal(mean, 0.0)
    np.fill_diagonal(counts, len(per_session))
    return DistanceMatrix(symbols, mean, per_session[0].kind, counts=counts)


def triangle_violation(matrix: DistanceMatrix) -> float:
    """Worst triangle-inequality slack ``d(a,c) - d(a,b) - d(b,c)`` over all
    triples; <= 0 means the matrix is metric on this data. Diagnostic only --
    the coherence distance is not asserted to be a metric."""
    v = matrix.values
    worst = -np.inf
    for b in range(matrix.n):
        through = v[:, b][:, None] + v[b, :][None, :]
        slack = v - through
        np.fill_diagonal(slack, -np.inf)
        slack[b, :] = -np.inf
        slack[:, b] = -np.inf
        worst = max(worst, float(np.nanmax(slack)))
    return worst


# ---------------------------------------------------------------------------
# serialization


def matrix_to_csv(matrix: DistanceMatrix) -> str:
    """Full symmetric matrix as CSV with symbol header row and column."""
    lines = ["symbol," + ",".join(matrix.symbols)]
    for i, sym in enumerate(matrix.symbols):
        lines.append(sym + "," + ",".join(fmt_sig12(v) for v in matrix.values[i]))
    return "\n".join(lines) + "\n"


def matrix_from_csv(text: str, kind: str) -> DistanceMatrix:
    rows = [r.split(",") for r in text.strip().splitlines()]
    if not rows or rows[0][0] != "symbol":
        raise ValidationError("distance CSV must start with a 'symbol' header")
    symbols = tuple(rows[0][1:])
    if len(rows) != len(symbols) + 1:
        raise ValidationError("distance CSV row count does not match header")
    values = np.empty((len(symbols), len(symbols)))
    for i, row in enumerate(rows[1:]):
        if row[0] != symbols[i] or len(row) != len(symbols) + 1:
            raise ValidationError(f"distance CSV row {i + 2} is inconsistent with the header")
        values[i] = [float(v) for v in row[1:]]
    return DistanceMatrix(symbols, values, kind)


def matrix_to_json(matrix: DistanceMatrix) -> str:
    """JSON form carrying the metric kind, session counts, and exclusions."""
    payload = {
        "metric_kind": matrix.kind,
        "symbols": list(matrix.symbols),
        "distances": [[fmt_sig12(v) for v in row] for row in matrix.values],
        "session_counts": [[int(c) for c in row] for row in matrix.counts],
        "excluded": list(matrix.excluded),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def matrix_from_json(text: str) -> DistanceMatrix:
    payload = json.loads(text)
    return DistanceMatrix(
        tuple(payload["symbols"]),
        np.array([[float(v) for v in row] for row in payload["distances"]]),
        payload["metric_kind"],
        counts=np.array(payload["session_counts"], dtype=int),
        excluded=tuple(payload["excluded"]),
    )
