"""End-to-end orchestration: prices in, per-session matrices, averaged
matrix, taxonomy tree, scores, and figures out.

Session and symbol exclusion policy, applied before any spectral work:

* a session is dropped when its sampling grid yields fewer than 2 returns,
  or (when the coherence metric runs) fewer than 2 Welch segments;
* a symbol is dropped from a session when it has no ticks there, too few
  ticks, or a constant price path;
* after that, symbols are dropped globally, most-uncovered first, until
  every remaining pair shares at least one session, so the averaged matrix
  has no holes and both metrics see exactly the same data.

Every exclusion is recorded in the run report with its reason. All artifacts
are accumulated in memory, staged into ``<out>/quarantine``, and only moved
to their final paths once the whole run has succeeded; a failed run leaves
whatever was computed in the quarantine directory and nothing else.
"""
from __future__ import annotations

import io
import json
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import (
    CohtreeError,
    EmptyResultError,
    InsufficientDataError,
    UsageError,
    ValidationError,
)
from .graph import (
    EMPTY_LABELING,
    EXPORT_FORMATS,
    export_tree,
    minimum_spanning_tree,
    read_labels_csv,
    sector_adjacency_score,
    sector_subtree_score,
)
from .metrics import (
    METRIC_KINDS,
    DistanceMatrix,
    average_matrices,
    fmt_sig12,
    matrix_to_csv,
    matrix_to_json,
    session_distance_matrix,
    triangle_violation,
)
from .series import (
    DEFAULT_MIN_SEGMENT_LENGTH,
    align_and_fill,
    read_calendar_csv,
    read_prices_csv,
    segment_sessions,
    session_grid,
    standardize,
    to_log_returns,
)
from .spectral import SpectralConfig

METRIC_CHOICES = METRIC_KINDS + ("both",)


@dataclass(frozen=True)
class PipelineConfig:
    """Validated invocation: input paths, metric selection, estimator
    settings, output destination. Construction errors are usage errors."""

    prices: Path
    calendar: Path
    labels: Path | None = None
    metric: str = "both"
    segment_length: int = 512
    overlap: float = 0.5
    window: str = "hann"
    grid_size: int | None = None
    grid_step: float = 120.0
    min_segment_length: int = DEFAULT_MIN_SEGMENT_LENGTH
    out_dir: Path = Path("cohtree-out")
    exports: tuple[str, ...] = EXPORT_FORMATS
    skip_bad_rows: bool = False

    def __post_init__(self):
        object.__setattr__(self, "prices", Path(self.prices))
        object.__setattr__(self, "calendar", Path(self.calendar))
        if self.labels is not None:
            object.__setattr__(self, "labels", Path(self.labels))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        object.__setattr__(self, "exports", tuple(self.exports))
        if self.metric not in METRIC_CHOICES:
            raise UsageError(f"metric must be one of {METRIC_CHOICES}, got {self.metric!r}")
        if not self.exports or any(f not in EXPORT_FORMATS for f in self.exports):
            raise UsageError(f"export formats must be among {EXPORT_FORMATS}, got {self.exports}")
        if self.grid_step <= 0:
            raise UsageError(f"grid step must be positive, got {self.grid_step}")
        if self.min_segment_length < 2:
            raise UsageError(f"minimum segment length must be >= 2, got {self.min_segment_length}")
        try:
            self.spectral()
        except ValidationError as e:
            raise UsageError(str(e)) from e

    def spectral(self) -> SpectralConfig:
        return SpectralConfig(
            segment_length=self.segment_length,
            overlap_fraction=self.overlap,
            window=self.window,
            grid_size=self.grid_size,
        )

    @property
    def metric_kinds(self) -> tuple[str, ...]:
        return METRIC_KINDS if self.metric == "both" else (self.metric,)


# ---------------------------------------------------------------------------
# flat key=value config files

_CONFIG_KEYS = (
    "prices",
    "calendar",
    "labels",
    "metric",
    "segment_length",
    "overlap",
    "window",
    "grid_size",
    "grid_step",
    "min_segment_length",
    "out",
    "export",
    "skip_bad_rows",
)
_PATH_KEYS = ("prices", "calendar", "labels", "out")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Flat ``key=value`` lines; blank lines and ``#`` comments ignored."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{source}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise UsageError(f"{source}:{lineno}: duplicate config key {key!r}")
        values[key] = value
    return values


def _parse_bool(value: str, key: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise UsageError(f"config key {key!r} expects a boolean, got {value!r}")


def build_pipeline_config(values: dict[str, str], base_dir: Path) -> PipelineConfig:
    """Turn raw config strings (file values merged with flag overrides) into
    a validated PipelineConfig. Relative paths resolve against ``base_dir``."""
    def path_of(key: str) -> Path:
        p = Path(values[key])
        return p if p.is_absolute() else base_dir / p

    for required in ("prices", "calendar"):
        if required not in values:
            raise UsageError(f"config is missing required key {required!r}")
    kwargs: dict = {"prices": path_of("prices"), "calendar": path_of("calendar")}
    if "labels" in values:
        kwargs["labels"] = path_of("labels")
    if "out" in values:
        kwargs["out_dir"] = path_of("out")
    if "metric" in values:
        kwargs["metric"] = values["metric"]
    if "window" in values:
        kwargs["window"] = values["window"]
    if "export" in values:
        kwargs["exports"] = tuple(f.strip() for f in values["export"].split(",") if f.strip())
    if "skip_bad_rows" in values:
        kwargs["skip_bad_rows"] = _parse_bool(values["skip_bad_rows"], "skip_bad_rows")
    for key, conv in (
        ("segment_length", int),
        ("grid_size", int),
        ("min_segment_length", int),
        ("overlap", float),
        ("grid_step", float),
    ):
        if key in values:
            try:
                kwargs[key] = conv(values[key])
            except ValueError:
                raise UsageError(f"config key {key!r} expects {conv.__name__}, got {values[key]!r}")
    return PipelineConfig(**kwargs)


# ---------------------------------------------------------------------------
# run report


@dataclass
class RunReport:
    """What the run did: inputs, exclusions with reasons, scores, timing."""

    config: dict
    symbols: list[str] = field(default_factory=list)
    sessions_used: list[int] = field(default_factory=list)
    excluded_symbols: dict[str, str] = field(default_factory=dict)
    excluded_sessions: dict[int, str] = field(default_factory=dict)
    session_symbol_exclusions: dict[int, dict[str, str]] = field(default_factory=dict)
    bad_rows: list[str] = field(default_factory=list)
    scores: dict[str, dict] = field(default_factory=dict)
    timing_seconds: dict[str, float] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        payload = asdict(self)
        payload["excluded_sessions"] = {str(k): v for k, v in self.excluded_sessions.items()}
        payload["session_symbol_exclusions"] = {
            str(k): v for k, v in self.session_symbol_exclusions.items()
        }
        payload["timing_seconds"] = {k: round(v, 6) for k, v in self.timing_seconds.items()}
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _config_echo(config: PipelineConfig) -> dict:
    echo = asdict(config)
    for key in ("prices", "calendar", "labels", "out_dir"):
        if echo[key] is not None:
            echo[key] = str(echo[key])
    echo["exports"] = list(echo["exports"])
    return echo


# ---------------------------------------------------------------------------
# the pipeline


def _check_inputs(config: PipelineConfig) -> None:
    paths = [("prices", config.prices), ("calendar", config.calendar)]
    if config.labels is not None:
        paths.append(("labels", config.labels))
    for name, path in paths:
        if not path.is_file():
            raise UsageError(f"{name} file does not exist: {path}")


def _pair_coverage(session_data: dict[int, dict]) -> dict[tuple[str, str], int]:
    coverage: dict[tuple[str, str], int] = {}
    for data in session_data.values():
        syms = sorted(data)
        for i in range(len(syms)):
            for j in range(i + 1, len(syms)):
                pair = (syms[i], syms[j])
                coverage[pair] = coverage.get(pair, 0) + 1
    return coverage


def _drop_uncovered_symbols(
    session_data: dict[int, dict], report: RunReport
) -> None:
    """Iteratively drop the symbol with the most uncovered pairings until
    every remaining pair shares a session. Ties drop the lexicographically
    greatest symbol, so the result is deterministic."""
    while True:
        symbols = sorted(set().union(*(set(d) for d in session_data.values()), set()))
        if len(symbols) < 2:
            break
        coverage = _pair_coverage(session_data)
        holes: dict[str, int] = {s: 0 for s in symbols}
        any_hole = False
        for i in range(len(symbols)):
            for j in range(i + 1, len(symbols)):
                if coverage.get((symbols[i], symbols[j]), 0) == 0:
                    holes[symbols[i]] += 1
                    holes[symbols[j]] += 1
                    any_hole = True
        if not any_hole:
            break
        worst = max(holes.values())
        drop = max(s for s, h in holes.items() if h == worst)
        report.excluded_symbols[drop] = (
            f"no shared session with {worst} other symbol(s); averaged matrix would have holes"
        )
        for s, data in list(session_data.items()):
            data.pop(drop, None)
            if len(data) < 2:
                report.excluded_sessions[s] = "fewer than 2 symbols after exclusions"
                del session_data[s]


def run_pipeline(config: PipelineConfig) -> RunReport:
    """Execute the full analysis and write artifacts under ``config.out_dir``.

    Per metric kind the output directory contains per-session matrices
    (``sessions/session_NNN.csv``), the averaged matrix (CSV and JSON), tree
    exports in the configured formats, ``scores.json``, and rendered
    ``tree.png`` / ``matrix.png``; ``report.json`` at the root records
    exclusions, scores, and timing.
    """
    t0 = time.perf_counter()
    _check_inputs(config)
    report = RunReport(config=_config_echo(config))
    artifacts: dict[str, bytes] = {}
    try:
        _run_into(config, report, artifacts)
    except CohtreeError:
        report.outputs = sorted(artifacts) + ["report.json"]
        artifacts["report.json"] = report.to_json().encode("utf-8")
        _write_files(config.out_dir / "quarantine", artifacts)
        raise
    report.timing_seconds["total"] = time.perf_counter() - t0
    report.outputs = sorted(artifacts) + ["report.json"]
    artifacts["report.json"] = report.to_json().encode("utf-8")
    _write_files(config.out_dir / "quarantine", artifacts)
    _promote(config.out_dir, artifacts)
    return report


def _run_into(config: PipelineConfig, report: RunReport, artifacts: dict[str, bytes]) -> None:
    t_ingest = time.perf_counter()
    scfg = config.spectral()
    kinds = config.metric_kinds
    series, bad_rows = read_prices_csv(config.prices, skip_bad_rows=config.skip_bad_rows)
    report.bad_rows = list(bad_rows)
    calendar = read_calendar_csv(config.calendar)
    labels = read_labels_csv(config.labels) if config.labels is not None else EMPTY_LABELING

    segments_by_symbol: dict[str, dict[int, object]] = {}
    for sym in sorted(series):
        try:
            segments, short = segment_sessions(series[sym], calendar, config.min_segment_length)
        except EmptyResultError:
            report.excluded_symbols[sym] = "no samples inside any calendar session"
            continue
        for s in short:
            report.session_symbol_exclusions.setdefault(s, {})[sym] = (
                f"fewer than {config.min_segment_length} samples in session"
            )
        if segments:
            segments_by_symbol[sym] = segments
        else:
            report.excluded_symbols[sym] = "no session with enough samples"
    if len(segments_by_symbol) < 2:
        raise InsufficientDataError(
            f"need >= 2 usable symbols, got {len(segments_by_symbol)} "
            f"(excluded: {sorted(report.excluded_symbols) or 'none'})"
        )
    report.timing_seconds["ingest"] = time.perf_counter() - t_ingest

    # session feasibility, alignment, and standardization
    t_sessions = time.perf_counter()
    session_data: dict[int, dict] = {}
    for s, window in enumerate(calendar.sessions):
        present = sorted(sym for sym, segs in segments_by_symbol.items() if s in segs)
        if len(present) < 2:
            if present or s in report.session_symbol_exclusions:
                report.excluded_sessions[s] = "fewer than 2 symbols with enough samples"
            else:
                report.excluded_sessions[s] = "no data in session"
            continue
        n_returns = len(session_grid(window, config.grid_step)) - 1
        if n_returns < 2:
            report.excluded_sessions[s] = (
                f"grid step {config.grid_step:g}s yields {n_returns} return samples"
            )
            continue
        if "coherence" in kinds and scfg.n_segments(n_returns) < 2:
            report.excluded_sessions[s] = (
                f"{n_returns} return samples give < 2 Welch segments of {scfg.segment_length}"
            )
            continue
        segs = {sym: segments_by_symbol[sym][s] for sym in present}
        _, aligned, _ = align_and_fill(segs, window, config.grid_step)
        data = {}
        for sym in present:
            try:
                data[sym] = standardize(to_log_returns(aligned[sym]))
            except CohtreeError as e:
                report.session_symbol_exclusions.setdefault(s, {})[sym] = str(e)
        if len(data) >= 2:
            session_data[s] = data
        else:
            report.excluded_sessions[s] = "fewer than 2 non-degenerate symbols"
    if not session_data:
        raise InsufficientDataError(
            f"no usable sessions (excluded: {dict(sorted(report.excluded_sessions.items()))})"
        )
    _drop_uncovered_symbols(session_data, report)
    if not session_data:
        raise InsufficientDataError("no usable sessions after symbol exclusions")
    final_symbols = sorted(set().union(*(set(d) for d in session_data.values())))
    if len(final_symbols) < 2:
        raise InsufficientDataError(f"need >= 2 usable symbols, got {len(final_symbols)}")
    report.symbols = final_symbols
    report.sessions_used = sorted(session_data)
    report.timing_seconds["sessions"] = time.perf_counter() - t_sessions

    # distances, averaging, trees, scores
    t_distances = time.perf_counter()
    averaged: dict[str, DistanceMatrix] = {}
    for kind in kinds:
        per_session = []
        for s in sorted(session_data):
            absent = tuple(sym for sym in final_symbols if sym not in session_data[s])
            try:
                matrix = session_distance_matrix(session_data[s], kind, scfg, excluded=absent)
            except CohtreeError as e:
                raise type(e)(f"session {s} ({kind}): {e}") from e
            per_session.append(matrix)
            artifacts[f"{kind}/sessions/session_{s:03d}.csv"] = matrix_to_csv(matrix).encode("utf-8")
        averaged[kind] = average_matrices(per_session)
        artifacts[f"{kind}/average.csv"] = matrix_to_csv(averaged[kind]).encode("utf-8")
        artifacts[f"{kind}/average.json"] = matrix_to_json(averaged[kind]).encode("utf-8")
    report.timing_seconds["distances"] = time.perf_counter() - t_distances

    t_trees = time.perf_counter()
    from .figures import render_matrix, render_tree  # matplotlib only when reporting

    for kind in kinds:
        tree = minimum_spanning_tree(averaged[kind], labels)
        for fmt in config.exports:
            artifacts[f"{kind}/tree.{fmt}"] = export_tree(tree, labels, fmt).encode("utf-8")
        scores = {
            "metric_kind": kind,
            "adjacency": {
                level: fmt_sig12(sector_adjacency_score(tree, labels, level))
                for level in ("sector", "industry")
            },
            "subtree": {
                level: fmt_sig12(sector_subtree_score(tree, labels, level))
                for level in ("sector", "industry")
            },
            "total_tree_weight": fmt_sig12(tree.total_weight),
            "triangle_violation": fmt_sig12(triangle_violation(averaged[kind])),
        }
        report.scores[kind] = scores
        artifacts[f"{kind}/scores.json"] = (
            json.dumps(scores, indent=2, sort_keys=True) + "\n"
        ).encode("utf-8")
        for name, render, obj in (
            ("tree.png", render_tree, tree),
            ("matrix.png", render_matrix, averaged[kind]),
        ):
            buf = io.BytesIO()
            render(obj, buf, title=f"{kind} taxonomy" if name == "tree.png" else f"{kind} distances")
            artifacts[f"{kind}/{name}"] = buf.getvalue()
    report.timing_seconds["trees_and_figures"] = time.perf_counter() - t_trees


# ---------------------------------------------------------------------------
# staged writes


def _write_files(stage_dir: Path, artifacts: dict[str, bytes]) -> None:
    for relpath, blob in sorted(artifacts.items()):
        target = stage_dir / relpath
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(blob)


def _promote(out_dir: Path, artifacts: dict[str, bytes]) -> None:
    """Move staged files from the quarantine directory onto their final
    paths, then clear the (now empty) staging tree."""
    stage = out_dir / "quarantine"
    for relpath in sorted(artifacts):
        final = out_dir / relpath
        final.parent.mkdir(parents=True, exist_ok=True)
        os.replace(stage / relpath, final)
    for dirpath, _, _ in os.walk(stage, topdown=False):
        try:
            os.rmdir(dirpath)
        except OSError:  # leftovers from an earlier failed run stay put
            pass
