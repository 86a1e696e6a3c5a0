"""Grid-sweep orchestration: per-cell training and evaluation, report
assembly and persistence, table rendering, and synthetic benchmark series."""

from __future__ import annotations

import datetime
import json
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    DivergenceError,
    ReportFormatError,
    ReportVersionError,
)
from .metrics import (
    ForecastSet,
    HorizonSpec,
    MetricRow,
    evaluate_horizons,
    metric_row,
    random_walk,
)
from .mlp import Architecture, TrainConfig, predict, train_multi_restart
from .series import TimeSeries, fit_scaler, make_windows

_REPORT_FORMAT = "fxcast-grid-report"
_REPORT_VERSION = 1

_SYNTH_EPOCH = datetime.date(2000, 1, 7)


@dataclass(frozen=True)
class GridConfig:
    """Factorial sweep over input lags and hidden widths."""

    input_levels: tuple = tuple(range(1, 11))
    hidden_levels: tuple = (6, 12, 18, 24, 30)
    train_cfg: TrainConfig = TrainConfig()
    horizon_spec: HorizonSpec = HorizonSpec()
    scale: bool = True

    def __post_init__(self):
        object.__setattr__(self, "input_levels", tuple(int(v) for v in self.input_levels))
        object.__setattr__(self, "hidden_levels", tuple(int(v) for v in self.hidden_levels))
        for name in ("input_levels", "hidden_levels"):
            levels = getattr(self, name)
            if not levels:
                raise DataError(f"{name} must be nonempty")
            if levels[0] < 1:
                raise DataError(f"{name} must be positive")
            if any(b <= a for a, b in zip(levels, levels[1:])):
                raise DataError(f"{name} must be strictly increasing")

    @property
    def cell_count(self) -> int:
        return len(self.input_levels) * len(self.hidden_levels)


@dataclass(frozen=True, eq=False)
class CellResult:
    """Metrics for one (p, h) grid cell.

    ``train_seconds`` is wall-clock bookkeeping: it is excluded from equality
    and never persisted, so report files stay reproducible run to run.
    """

    p: int
    h: int
    in_sample: MetricRow
    out_sample: tuple  # ((label, MetricRow), ...)
    best_sse: float
    train_seconds: float = 0.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, CellResult):
            return NotImplemented
        return (
            self.p == other.p
            and self.h == other.h
            and self.in_sample == other.in_sample
            and self.out_sample == other.out_sample
            and self.best_sse == other.best_sse
        )


@dataclass(frozen=True)
class CellFailure:
    """A grid cell that produced no usable network."""

    p: int
    h: int
    error: str


@dataclass(frozen=True)
class InputAverage:
    """Per-input-level mean of each metric over the hidden levels."""

    p: int
    in_sample: MetricRow
    out_sample: tuple


@dataclass(frozen=True, eq=False)
class GridReport:
    """Everything a sweep produced, plus the exact configuration that ran it."""

    cells: tuple
    failures: tuple
    per_input_averages: tuple
    random_walk_rows: tuple
    config: GridConfig
    series_name: str
    train_len: int
    test_len: int

    @property
    def master_seed(self) -> int:
        return self.config.train_cfg.master_seed

    @classmethod
    def build(cls, cells, failures, random_walk_rows, config, series_name, train_len, test_len):
        cells = tuple(sorted(cells, key=lambda c: (c.p, c.h)))
        failures = tuple(sorted(failures, key=lambda f: (f.p, f.h)))
        return cls(
            cells=cells,
            failures=failures,
            per_input_averages=_input_averages(cells, config),
            random_walk_rows=tuple(random_walk_rows),
            config=config,
            series_name=series_name,
            train_len=train_len,
            test_len=test_len,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridReport):
            return NotImplemented
        return (
            self.cells == other.cells
            and self.failures == other.failures
            and self.per_input_averages == other.per_input_averages
            and self.random_walk_rows == other.random_walk_rows
            and self.config == other.config
            and self.series_name == other.series_name
            and self.train_len == other.train_len
            and self.test_len == other.test_len
        )


def _mean_row(rows) -> MetricRow:
    n = len(rows)
    return MetricRow(
        rmse=sum(r.rmse for r in rows) / n,
        mae=sum(r.mae for r in rows) / n,
        mape=sum(r.mape for r in rows) / n,
    )


def _input_averages(cells, config: GridConfig) -> tuple:
    averages = []
    for p in config.input_levels:
        group = [c for c in cells if c.p == p]
        if not group:
            continue
        labels = config.horizon_spec.labels
        out_rows = tuple(
            (label, _mean_row([dict(c.out_sample)[label] for c in group]))
            for label in labels
        )
        averages.append(
            InputAverage(
                p=p,
                in_sample=_mean_row([c.in_sample for c in group]),
                out_sample=out_rows,
            )
        )
    return tuple(averages)


def evaluate_cell(train_series: TimeSeries, test_series: TimeSeries, p: int, h: int,
                  cfg: GridConfig):
    """Train one (p, h) cell and score it; returns (CellResult, best network).

    In-sample metrics cover the N - p training patterns. Out-of-sample
    forecasts are one-step-ahead with teacher forcing: the input for test
    position t is always the p most recent actual observations (train tail,
    then preceding test actuals) — never the model's own forecasts. All
    metrics are computed in original units.
    """
    started = time.perf_counter()
    if len(train_series) <= p:
        raise DataError(f"training series length {len(train_series)} must exceed p={p}")

    if cfg.scale:
        scaler = fit_scaler(train_series)
        train_values = scaler.apply(train_series.values)
    else:
        scaler = None
        train_values = train_series.values
    scaled_train = TimeSeries(train_series.dates, train_values, train_series.name)
    data = make_windows(scaled_train, p)

    arch = Architecture(input_count=p, hidden_count=h)
    result = train_multi_restart(arch, data, cfg.train_cfg)
    net = result.best_net

    in_pred = predict(net, data.inputs)
    if scaler is not None:
        in_pred = scaler.invert(in_pred)
    in_row = metric_row(ForecastSet(train_series.values[p:], in_pred))

    combined = np.concatenate((train_series.values[-p:], test_series.values))
    if scaler is not None:
        combined = scaler.apply(combined)
    test_inputs = np.lib.stride_tricks.sliding_window_view(combined, p)[: len(test_series)]
    out_pred = predict(net, test_inputs)
    if scaler is not None:
        out_pred = scaler.invert(out_pred)
    out_rows = evaluate_horizons(
        ForecastSet(test_series.values, out_pred), cfg.horizon_spec
    )

    cell = CellResult(
        p=p,
        h=h,
        in_sample=in_row,
        out_sample=out_rows,
        best_sse=result.best_sse,
        train_seconds=time.perf_counter() - started,
    )
    return cell, net


def run_cell(train_series: TimeSeries, test_series: TimeSeries, p: int, h: int,
             cfg: GridConfig) -> CellResult:
    """Train and score one grid cell."""
    cell, _ = evaluate_cell(train_series, test_series, p, h, cfg)
    return cell


def random_walk_rows(train_series: TimeSeries, test_series: TimeSeries,
                     spec: HorizonSpec) -> tuple:
    """Per-horizon metric rows for the naive random-walk benchmark."""
    fs = random_walk(float(train_series.values[-1]), test_series.values)
    return evaluate_horizons(fs, spec)


def _cell_task(args):
    train_series, test_series, p, h, cfg = args
    try:
        return run_cell(train_series, test_series, p, h, cfg)
    except (DataError, DivergenceError) as exc:
        return CellFailure(p=p, h=h, error=str(exc))


def run_grid(train_series: TimeSeries, test_series: TimeSeries, grid: GridConfig,
             workers: int = 1, sink=None, progress=None) -> GridReport:
    """Evaluate every (p, h) cell of the grid and assemble the report.

    Cells run independently — serially, or on a process pool when
    ``workers`` > 1 — and the output is identical either way: restart seeds
    depend only on (master_seed, p, h, restart), and records are reduced in
    (p, h) order regardless of completion order. With ``sink`` set, records
    stream out incrementally so an interrupted sweep leaves a valid prefix.

    Per-cell failures (e.g. every restart diverged) are recorded in the
    report instead of aborting the remaining cells.
    """
    if workers < 1:
        raise DataError("workers must be at least 1")
    rw_rows = random_walk_rows(train_series, test_series, grid.horizon_spec)

    writer = _ReportWriter(sink) if sink is not None else None
    if writer is not None:
        writer.header(grid, train_series.name, len(train_series), len(test_series))
        writer.random_walk(rw_rows)

    order = [(p, h) for p in grid.input_levels for h in grid.hidden_levels]
    outcomes: dict = {}
    emitted = 0
    done = 0

    def emit_ready():
        nonlocal emitted
        while emitted < len(order) and order[emitted] in outcomes:
            item = outcomes[order[emitted]]
            if writer is not None:
                writer.record(item)
            emitted += 1

    def note(item):
        nonlocal done
        done += 1
        outcomes[(item.p, item.h)] = item
        emit_ready()
        if progress is not None:
            progress(done, len(order), item)

    if workers == 1:
        for p, h in order:
            note(_cell_task((train_series, test_series, p, h, grid)))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pending = {
                pool.submit(_cell_task, (train_series, test_series, p, h, grid))
                for p, h in order
            }
            while pending:
                finished, pending = wait(pending, return_when=FIRST_COMPLETED)
                for future in finished:
                    note(future.result())

    cells = [v for v in outcomes.values() if isinstance(v, CellResult)]
    failures = [v for v in outcomes.values() if isinstance(v, CellFailure)]
    return GridReport.build(
        cells, failures, rw_rows, grid,
        train_series.name, len(train_series), len(test_series),
    )


# ---------------------------------------------------------------------------
# report persistence: versioned line-delimited JSON records
# ---------------------------------------------------------------------------


def _row_to_json(row: MetricRow) -> dict:
    return {"rmse": row.rmse, "mae": row.mae, "mape": row.mape}


def _row_from_json(obj) -> MetricRow:
    return MetricRow(rmse=obj["rmse"], mae=obj["mae"], mape=obj["mape"])


def _labelled_rows_to_json(rows) -> list:
    return [[label, _row_to_json(row)] for label, row in rows]


def _labelled_rows_from_json(obj) -> tuple:
    return tuple((label, _row_from_json(row)) for label, row in obj)


def _config_to_json(config: GridConfig) -> dict:
    cfg = config.train_cfg
    return {
        "input_levels": list(config.input_levels),
        "hidden_levels": list(config.hidden_levels),
        "train_cfg": {
            "learning_rate": cfg.learning_rate,
            "max_epochs": cfg.max_epochs,
            "min_sse_delta": cfg.min_sse_delta,
            "restarts": cfg.restarts,
            "init_half_width": cfg.init_half_width,
            "master_seed": cfg.master_seed,
        },
        "horizons": [[label, length] for label, length in config.horizon_spec.windows],
        "scale": config.scale,
    }


def _config_from_json(obj) -> GridConfig:
    return GridConfig(
        input_levels=tuple(obj["input_levels"]),
        hidden_levels=tuple(obj["hidden_levels"]),
        train_cfg=TrainConfig(**obj["train_cfg"]),
        horizon_spec=HorizonSpec(tuple((l, n) for l, n in obj["horizons"])),
        scale=obj["scale"],
    )


class _ReportWriter:
    """Streams report records to a text sink, one JSON object per line."""

    def __init__(self, sink):
        self._sink = sink

    def _line(self, obj):
        self._sink.write(json.dumps(obj) + "\n")
        flush = getattr(self._sink, "flush", None)
        if flush is not None:
            flush()

    def header(self, config, series_name, train_len, test_len):
        self._line(
            {
                "format": _REPORT_FORMAT,
                "version": _REPORT_VERSION,
                "series": series_name,
                "train_len": train_len,
                "test_len": test_len,
                "master_seed": config.train_cfg.master_seed,
                "config": _config_to_json(config),
            }
        )

    def random_walk(self, rows):
        self._line({"type": "random_walk", "rows": _labelled_rows_to_json(rows)})

    def record(self, item):
        if isinstance(item, CellResult):
            self._line(
                {
                    "type": "cell",
                    "p": item.p,
                    "h": item.h,
                    "in_sample": _row_to_json(item.in_sample),
                    "out_sample": _labelled_rows_to_json(item.out_sample),
                    "best_sse": item.best_sse,
                }
            )
        else:
            self._line({"type": "failure", "p": item.p, "h": item.h, "error": item.error})


def save_report(report: GridReport, sink):
    """Write a complete report in the streaming line format."""
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8") as handle:
            save_report(report, handle)
        return
    writer = _ReportWriter(sink)
    writer.header(report.config, report.series_name, report.train_len, report.test_len)
    writer.random_walk(report.random_walk_rows)
    for item in sorted(
        list(report.cells) + list(report.failures), key=lambda r: (r.p, r.h)
    ):
        writer.record(item)


def load_report(source) -> GridReport:
    """Read a report written by save_report / run_grid.

    Raises ReportVersionError for an unsupported version tag and
    ReportFormatError for corrupt or truncated payloads (including a record
    count short of the grid declared in the header).
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            return load_report(handle)

    lines = [line for line in source.read().splitlines() if line.strip()]
    if not lines:
        raise ReportFormatError("empty report file")

    def parse_line(index, text):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ReportFormatError(f"corrupt report line {index + 1}: {exc}") from None
        if not isinstance(obj, dict):
            raise ReportFormatError(f"corrupt report line {index + 1}: not a record")
        return obj

    header = parse_line(0, lines[0])
    if header.get("format") != _REPORT_FORMAT:
        raise ReportFormatError("not a grid report file")
    if header.get("version") != _REPORT_VERSION:
        raise ReportVersionError(f"unsupported report version {header.get('version')!r}")
    try:
        config = _config_from_json(header["config"])
        series_name = header["series"]
        train_len = int(header["train_len"])
        test_len = int(header["test_len"])
    except (KeyError, TypeError, ValueError, DataError) as exc:
        raise ReportFormatError(f"corrupt report header: {exc}") from None

    rw_rows = None
    cells = []
    failures = []
    seen = set()
    for index, text in enumerate(lines[1:], start=1):
        obj = parse_line(index, text)
        kind = obj.get("type")
        try:
            if kind == "random_walk":
                if rw_rows is not None:
                    raise ReportFormatError("duplicate random_walk record")
                rw_rows = _labelled_rows_from_json(obj["rows"])
            elif kind == "cell":
                key = (obj["p"], obj["h"])
                if key in seen:
                    raise ReportFormatError(f"duplicate cell record {key}")
                seen.add(key)
                cells.append(
                    CellResult(
                        p=int(obj["p"]),
                        h=int(obj["h"]),
                        in_sample=_row_from_json(obj["in_sample"]),
                        out_sample=_labelled_rows_from_json(obj["out_sample"]),
                        best_sse=float(obj["best_sse"]),
                    )
                )
            elif kind == "failure":
                key = (obj["p"], obj["h"])
                if key in seen:
                    raise ReportFormatError(f"duplicate cell record {key}")
                seen.add(key)
                failures.append(
                    CellFailure(p=int(obj["p"]), h=int(obj["h"]), error=str(obj["error"]))
                )
            else:
                raise ReportFormatError(f"unknown record type {kind!r} on line {index + 1}")
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ReportFormatError):
                raise
            raise ReportFormatError(f"corrupt report line {index + 1}: {exc}") from None

    if rw_rows is None:
        raise ReportFormatError("missing random_walk record (truncated file?)")
    expected = config.cell_count
    if len(seen) != expected:
        raise ReportFormatError(
            f"truncated report: expected {expected} cell records, found {len(seen)}"
        )
    try:
        return GridReport.build(
            cells, failures, rw_rows, config, series_name, train_len, test_len
        )
    except (KeyError, DataError) as exc:
        raise ReportFormatError(f"inconsistent report records: {exc}") from None


# ---------------------------------------------------------------------------
# table rendering
# ---------------------------------------------------------------------------

_VIEWS = ("in_sample", "out_sample_by_input", "hidden_effect")


def _fmt(value: float) -> str:
    return f"{value:.8f}"


def _render_row(columns, widths) -> str:
    return "".join(str(c).ljust(w) for c, w in zip(columns, widths)).rstrip()


def render_table(report: GridReport, which: str) -> str:
    """Render one report view as fixed-format text, 8 decimals per metric.

    Views: ``in_sample`` (one row per cell plus an Avgr row per input
    level), ``out_sample_by_input`` (hidden-averaged rows per input level
    and horizon, ending with the RW benchmark row), and ``hidden_effect``
    (per-cell out-of-sample rows per horizon).
    """
    if which == "in_sample":
        lines = _render_in_sample(report)
    elif which == "out_sample_by_input":
        lines = _render_out_sample(report)
    elif which == "hidden_effect":
        lines = _render_hidden_effect(report)
    else:
        raise DataError(f"unknown view {which!r}; expected one of {_VIEWS}")
    return "\n".join(lines) + "\n"


def _render_in_sample(report: GridReport):
    widths = (7, 8, 15, 15, 15)
    lines = [_render_row(("Input", "Hidden", "RMSE", "MAE", "MAPE"), widths)]
    failures = {(f.p, f.h): f for f in report.failures}
    averages = {a.p: a for a in report.per_input_averages}
    cells = {(c.p, c.h): c for c in report.cells}
    for p in report.config.input_levels:
        for h in report.config.hidden_levels:
            cell = cells.get((p, h))
            if cell is not None:
                row = cell.in_sample
                lines.append(
                    _render_row((p, h, _fmt(row.rmse), _fmt(row.mae), _fmt(row.mape)), widths)
                )
            else:
                failure = failures[(p, h)]
                lines.append(_render_row((p, h, f"FAILED: {failure.error}"), widths[:3]))
        avg = averages.get(p)
        if avg is not None:
            row = avg.in_sample
            lines.append(
                _render_row(
                    ("Avgr", "", _fmt(row.rmse), _fmt(row.mae), _fmt(row.mape)), widths
                )
            )
    return lines


def _render_out_sample(report: GridReport):
    widths = (7, 15, 15, 15)
    lines = []
    averages = {a.p: a for a in report.per_input_averages}
    rw = dict(report.random_walk_rows)
    for block, (label, _) in enumerate(report.config.horizon_spec.windows):
        if block:
            lines.append("")
        lines.append(
            _render_row(
                ("Input", f"RMSE({label})", f"MAE({label})", f"MAPE({label})"), widths
            )
        )
        for p in report.config.input_levels:
            avg = averages.get(p)
            if avg is None:
                lines.append(_render_row((p, "FAILED: no surviving cells"), widths[:2]))
                continue
            row = dict(avg.out_sample)[label]
            lines.append(
                _render_row((p, _fmt(row.rmse), _fmt(row.mae), _fmt(row.mape)), widths)
            )
        row = rw[label]
        lines.append(
            _render_row(("RW", _fmt(row.rmse), _fmt(row.mae), _fmt(row.mape)), widths)
        )
    return lines


def _render_hidden_effect(report: GridReport):
    widths = (10, 7, 8, 15, 15, 15)
    sample = f"N={report.train_len}"
    lines = []
    failures = {(f.p, f.h): f for f in report.failures}
    cells = {(c.p, c.h): c for c in report.cells}
    for block, (label, _) in enumerate(report.config.horizon_spec.windows):
        if block:
            lines.append("")
        lines.append(
            _render_row(
                ("Sample", "Input", "Hidden",
                 f"RMSE({label})", f"MAE({label})", f"MAPE({label})"),
                widths,
            )
        )
        for p in report.config.input_levels:
            for h in report.config.hidden_levels:
                cell = cells.get((p, h))
                if cell is None:
                    failure = failures[(p, h)]
                    lines.append(
                        _render_row((sample, p, h, f"FAILED: {failure.error}"), widths[:4])
                    )
                    continue
                row = dict(cell.out_sample)[label]
                lines.append(
                    _render_row(
                        (sample, p, h, _fmt(row.rmse), _fmt(row.mae), _fmt(row.mape)),
                        widths,
                    )
                )
    return lines


# ---------------------------------------------------------------------------
# synthetic benchmark series
# ---------------------------------------------------------------------------

_SYNTH_KINDS = ("logistic_map", "noisy_ar1", "sine")


def synthesize_series(kind: str, n: int, seed: int = 0, **params) -> TimeSeries:
    """Generate a benchmark series with weekly dates from a fixed epoch.

    Kinds and parameters:
      logistic_map: x[t+1] = r * x[t] * (1 - x[t]); r=4.0, x0=0.3
      noisy_ar1:    y[t+1] = phi * y[t] + e[t], e ~ uniform(-sigma, sigma);
                    phi=0.8, sigma=0.1, y0=0.0 (the only kind that uses seed)
      sine:         y[t] = sin(omega * t); omega=0.1
    """
    if n < 2:
        raise DataError("synthetic series length must be at least 2")
    if kind == "logistic_map":
        values = _logistic_map(n, **params)
    elif kind == "noisy_ar1":
        values = _noisy_ar1(n, seed, **params)
    elif kind == "sine":
        values = _sine(n, **params)
    else:
        raise DataError(f"unknown series kind {kind!r}; expected one of {_SYNTH_KINDS}")
    dates = tuple(_SYNTH_EPOCH + datetime.timedelta(weeks=i) for i in range(n))
    return TimeSeries(dates=dates, values=values, name=kind)


def _reject_unknown(kind, params, allowed):
    unknown = set(params) - set(allowed)
    if unknown:
        raise DataError(f"invalid {kind} parameters: {sorted(unknown)}")


def _logistic_map(n, **params):
    _reject_unknown("logistic_map", params, ("r", "x0"))
    r = float(params.get("r", 4.0))
    x0 = float(params.get("x0", 0.3))
    if r <= 0.0:
        raise DataError("logistic_map requires r > 0")
    if not 0.0 < x0 < 1.0:
        raise DataError("logistic_map requires x0 in (0, 1)")
    values = np.empty(n)
    values[0] = x0
    for t in range(n - 1):
        values[t + 1] = r * values[t] * (1.0 - values[t])
    return values


def _noisy_ar1(n, seed, **params):
    _reject_unknown("noisy_ar1", params, ("phi", "sigma", "y0"))
    phi = float(params.get("phi", 0.8))
    sigma = float(params.get("sigma", 0.1))
    y0 = float(params.get("y0", 0.0))
    if sigma < 0.0:
        raise DataError("noisy_ar1 requires sigma >= 0")
    rng = np.random.default_rng(int(seed) & ((1 << 64) - 1))
    noise = rng.uniform(-sigma, sigma, size=n - 1)
    values = np.empty(n)
    values[0] = y0
    for t in range(n - 1):
        values[t + 1] = phi * values[t] + noise[t]
    return values


def _sine(n, **params):
    _reject_unknown("sine", params, ("omega",))
    omega = float(params.get("omega", 0.1))
    return np.sin(omega * np.arange(n, dtype=float))
