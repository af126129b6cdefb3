"""Per-window metrics, the CSV contract, and run comparison.

The CSV is the machine-readable record of a run.  Columns, in order:

    window_start_ms, link_src, link_dst, bytes, batches,
    max_batch_bytes, pending_max, staleness_max_ms

One row per (time window, link) with any activity, sorted by window
then link; header row mandatory; Unix line endings.  Identical
scenarios and seeds produce byte-identical files.  Host-dependent
figures (ingestion ops/sec) go to the JSON summary next to the CSV,
never into the CSV itself.

bytes/batches/max_batch_bytes are charged at batch delivery time.
staleness_max_ms is the oldest age (delivery time minus the update's
original write time) among updates delivered in the window.
pending_max is the largest shipping backlog (updates queued for the
link) observed at an event boundary inside the window.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ScenarioError
from .shipping import Batch
from .simnet import SimNet

Link = tuple[int, int]

CSV_COLUMNS = ("window_start_ms", "link_src", "link_dst", "bytes", "batches",
               "max_batch_bytes", "pending_max", "staleness_max_ms")


@dataclass(frozen=True, slots=True)
class Row:
    """One (window, link) line of the CSV."""

    window_start_ms: int
    link_src: int
    link_dst: int
    bytes: int
    batches: int
    max_batch_bytes: int
    pending_max: int
    staleness_max_ms: int


@dataclass(slots=True)
class MetricsCollector:
    """Accumulates the engine-side metrics (staleness, backlog) that the
    network layer cannot see; merges with the network's byte accounting
    into CSV rows."""

    window_ms: int
    staleness: dict[tuple[Link, int], int] = field(default_factory=dict)
    pending: dict[tuple[Link, int], int] = field(default_factory=dict)
    max_staleness_ms: int = 0

    def note_delivery(self, link: Link, batch: Batch, now: int) -> None:
        window = now // self.window_ms
        worst = self.staleness.get((link, window), 0)
        for u in batch.updates:
            age = now - u.wall_ms
            if age > worst:
                worst = age
        self.staleness[(link, window)] = worst
        if worst > self.max_staleness_ms:
            self.max_staleness_ms = worst

    def sample_pending(self, link: Link, count: int, now: int) -> None:
        key = (link, now // self.window_ms)
        if count > self.pending.get(key, 0):
            self.pending[key] = count

    def build_rows(self, net: SimNet) -> list[Row]:
        windows: dict[tuple[int, Link], Row] = {}
        keys: set[tuple[Link, int]] = set()
        for link, stats in net.stats.items():
            keys.update((link, w) for w in stats.bytes)
        keys.update(self.staleness)
        keys.update(self.pending)
        for link, window in keys:
            stats = net.stats[link]
            windows[(window, link)] = Row(
                window_start_ms=window * self.window_ms,
                link_src=link[0],
                link_dst=link[1],
                bytes=stats.bytes.get(window, 0),
                batches=stats.batches.get(window, 0),
                max_batch_bytes=stats.max_batch_bytes.get(window, 0),
                pending_max=self.pending.get((link, window), 0),
                staleness_max_ms=self.staleness.get((link, window), 0),
            )
        return [windows[key] for key in sorted(windows)]


def write_csv(path: str | Path, rows: list[Row]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow((row.window_start_ms, row.link_src, row.link_dst,
                             row.bytes, row.batches, row.max_batch_bytes,
                             row.pending_max, row.staleness_max_ms))


def read_csv(path: str | Path) -> list[Row]:
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise ScenarioError(f"cannot read metrics CSV: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(CSV_COLUMNS):
            raise ScenarioError(f"{path}: not a metrics CSV (bad header)")
        return [Row(*(int(v) for v in line)) for line in reader if line]


def write_summary(path: str | Path, summary: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True, slots=True)
class Comparison:
    """Peak, volume and batch-count relation of run B to run A."""

    peak_bytes_a: int
    peak_bytes_b: int
    total_bytes_a: int
    total_bytes_b: int
    batches_a: int
    batches_b: int
    max_batch_bytes_a: int
    max_batch_bytes_b: int

    @property
    def peak_ratio(self) -> float:
        return _ratio(self.peak_bytes_b, self.peak_bytes_a)

    @property
    def total_ratio(self) -> float:
        return _ratio(self.total_bytes_b, self.total_bytes_a)

    @property
    def batch_ratio(self) -> float:
        return _ratio(self.batches_b, self.batches_a)


def _ratio(b: int, a: int) -> float:
    return math.inf if a == 0 and b else (b / a if a else 1.0)


def compare_runs(csv_a: str | Path, csv_b: str | Path) -> Comparison:
    """Compare two run CSVs produced with the same metric window size.

    Window sizes come from the runs' JSON summaries when present, else
    are inferred from the window starts; a detectable mismatch is
    rejected.
    """
    rows_a, rows_b = read_csv(csv_a), read_csv(csv_b)
    win_a, win_b = _window_of(csv_a, rows_a), _window_of(csv_b, rows_b)
    if win_a is not None and win_b is not None and win_a != win_b:
        raise ScenarioError(
            f"metric window mismatch: {csv_a} uses {win_a}ms, {csv_b} uses {win_b}ms")
    return Comparison(
        peak_bytes_a=max((r.bytes for r in rows_a), default=0),
        peak_bytes_b=max((r.bytes for r in rows_b), default=0),
        total_bytes_a=sum(r.bytes for r in rows_a),
        total_bytes_b=sum(r.bytes for r in rows_b),
        batches_a=sum(r.batches for r in rows_a),
        batches_b=sum(r.batches for r in rows_b),
        max_batch_bytes_a=max((r.max_batch_bytes for r in rows_a), default=0),
        max_batch_bytes_b=max((r.max_batch_bytes for r in rows_b), default=0),
    )


def format_comparison(comp: Comparison) -> str:
    lines = [
        f"peak window bytes : A={comp.peak_bytes_a} B={comp.peak_bytes_b} "
        f"ratio={comp.peak_ratio:.4f}",
        f"total bytes       : A={comp.total_bytes_a} B={comp.total_bytes_b} "
        f"ratio={comp.total_ratio:.4f}",
        f"batches           : A={comp.batches_a} B={comp.batches_b} "
        f"ratio={comp.batch_ratio:.4f}",
        f"max batch bytes   : A={comp.max_batch_bytes_a} B={comp.max_batch_bytes_b}",
    ]
    return "\n".join(lines)


def _window_of(csv_path: str | Path, rows: list[Row]) -> int | None:
    summary_path = Path(str(csv_path)[: -len(".csv")] + ".summary.json") \
        if str(csv_path).endswith(".csv") else None
    if summary_path is not None and summary_path.exists():
        try:
            with open(summary_path, encoding="utf-8") as fh:
                window = json.load(fh).get("window_ms")
            if isinstance(window, int) and window > 0:
                return window
        except (OSError, ValueError):
            pass
    starts = sorted({r.window_start_ms for r in rows if r.window_start_ms > 0})
    if not starts:
        return None
    return math.gcd(*starts)
