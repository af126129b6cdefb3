"""
Bounded shipping vs. the poll-everything baseline
=================================================

Runs the same bursty all-write load (5,000 writes every 100 ms, 100,000
total) three ways: the plain baseline that pushes a whole second's
accumulation on every poll, a tight 0.5% pending bound, and a loose 2%
bound.  Same payload either way; the bounds decide whether it moves as
a few tall spikes or as a steady stream of right-sized batches.
"""

import tempfile
from pathlib import Path

from georep import compare_runs, format_comparison, load_scenario, run_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
NAMES = ("write-burst-plain", "write-burst-bounded05pct", "write-burst-bounded2pct")

with tempfile.TemporaryDirectory() as tmp:
    results = {}
    for name in NAMES:
        scenario = load_scenario(SCENARIOS / f"{name}.ini")
        results[name] = run_scenario(scenario, Path(tmp) / name)

    print(f"{'run':22} {'batches':>8} {'peak window B':>14} {'max batch B':>12}")
    for name in NAMES:
        s = results[name].summary
        max_batch = max(r.max_batch_bytes for r in results[name].rows)
        print(f"{name:22} {s['total_batches']:>8} "
              f"{s['peak_window_bytes']:>14} {max_batch:>12}")

    # The comparison helper reads the two CSV artifacts back, so the
    # numbers below come from the on-disk contract, not from memory.
    print("\nplain baseline vs 0.5% pending bound:")
    print(format_comparison(compare_runs(
        results["write-burst-plain"].csv_path,
        results["write-burst-bounded05pct"].csv_path)))
