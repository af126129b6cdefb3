"""Scenario files: the INI-style description of one simulation run.

Sections and keys:

[topology]
    clusters = 1 2              cluster ids, space separated
    links = 1>2 2>1             directed replication links

[network]                       (optional)
    latency_ms = 10             default one-way link latency
    latency_ms.1>2 = 25         per-link override
    partitions =                outage windows, one per line:
        1>2 5000 10000          link, start ms, end ms (half-open)
    window_ms = 1000            metric window for the CSV
    max_events = 10000000       event budget before a livelock abort

[bounds]
    mode = bounded              bounded | plain (poll-everything baseline)
    default = 0 500 0           lag_ms, pending, drift; 0 disables
    some_table:family = 1000 0 0    per-container bound, same triple
    pending_percent = 0.5         pending limit as a percent of the run's
                                updates (alternative to a pending count)
    pending_percent.tbl:fam = 2   per-container percent
    tick_ms = 100               lag-validation timer grid
    poll_interval_ms = 1000     plain-mode shipping period
    coalesce = false            keep only the newest pending value per key

[workload]
    operations = 50000          client operations (reads + writes)
    write_fraction = 0.5
    distribution = zipfian      zipfian | uniform
    zipf_constant = 0.99
    keyspace = 10000
    value_bytes = 1000
    containers = usertable:family       weighted: name*weight
    seed = 42
    burst_ops = 1               ops sharing each arrival instant
    burst_spacing_ms = 1        gap between instants
    origins = 1                 clusters that generate client traffic
    disjoint_keys = false       prefix keys per origin cluster

[blocks]                        (optional; replaces the plain op stream)
    count = 1000
    puts_per_block = 4
    pattern = IMMEDIATE ANY     modes cycled across blocks
    containers = a:fam b:fam    puts cycle across these
    spacing_ms = 1

[output]                        (optional)
    csv = run.csv               default: <scenario stem>.csv
    summary = run.summary.json  default: <scenario stem>.summary.json

Unknown sections or keys are rejected so typos fail loudly.  Percentage
bounds resolve against the number of replicated updates the workload
will produce (its writes), not its total operation count.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from pathlib import Path

from .blocks import BlockMode
from .bounds import Bound, ContainerId, pending_from_percent
from .errors import ScenarioError
from .simnet import DEFAULT_MAX_EVENTS, LinkSpec
from .workload import BlockScript, WorkloadSpec

_KNOWN_KEYS = {
    "topology": {"clusters", "links"},
    "network": {"latency_ms", "partitions", "window_ms", "max_events"},
    "bounds": {"mode", "default", "pending_percent", "tick_ms",
               "poll_interval_ms", "coalesce"},
    "workload": {"operations", "write_fraction", "distribution", "zipf_constant",
                 "keyspace", "value_bytes", "containers", "seed", "burst_ops",
                 "burst_spacing_ms", "origins", "disjoint_keys"},
    "blocks": {"count", "puts_per_block", "pattern", "containers", "spacing_ms"},
    "output": {"csv", "summary"},
}


@dataclass(frozen=True, slots=True)
class Scenario:
    """A fully validated, resolved run description."""

    name: str
    clusters: tuple[int, ...]
    links: dict[tuple[int, int], LinkSpec]
    mode: str
    default_bound: Bound
    bounds: dict[ContainerId, Bound]
    tick_ms: int
    poll_interval_ms: int
    coalesce: bool
    window_ms: int
    max_events: int
    workload: WorkloadSpec
    csv_name: str
    summary_name: str


def load_scenario(path: str | Path, seed_override: int | None = None) -> Scenario:
    """Parse and validate a scenario file.

    Every validation failure raises ScenarioError with the offending
    key in the message.
    """
    path = Path(path)
    parser = configparser.ConfigParser(delimiters=("=",), interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from exc
    except configparser.Error as exc:
        raise ScenarioError(f"malformed scenario file: {exc}") from exc

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ScenarioError(f"unknown section [{section}]")
        for key in parser[section]:
            if key in _KNOWN_KEYS[section]:
                continue
            if section == "bounds" and (":" in key or key.startswith("pending_percent.")):
                continue
            if section == "network" and key.startswith("latency_ms."):
                continue
            raise ScenarioError(f"unknown key {key!r} in section [{section}]")
    for required in ("topology", "bounds", "workload"):
        if required not in parser:
            raise ScenarioError(f"missing required section [{required}]")

    topo = parser["topology"]
    clusters = tuple(_parse_int(tok, "topology.clusters") for tok in topo.get("clusters", "").split())
    if not clusters:
        raise ScenarioError("topology.clusters must list at least one cluster id")
    if len(set(clusters)) != len(clusters):
        raise ScenarioError("duplicate cluster ids in topology.clusters")
    if any(c <= 0 for c in clusters):
        raise ScenarioError("cluster ids must be positive integers")

    link_pairs = [_parse_link(tok) for tok in topo.get("links", "").split()]
    if len(set(link_pairs)) != len(link_pairs):
        raise ScenarioError("duplicate links in topology.links")
    for src, dst in link_pairs:
        if src not in clusters or dst not in clusters:
            raise ScenarioError(f"link {src}>{dst} references an unknown cluster")
        if src == dst:
            raise ScenarioError(f"link {src}>{dst} may not be a self-loop")

    net = parser["network"] if "network" in parser else {}
    default_latency = _parse_int(net.get("latency_ms", "10"), "network.latency_ms")
    window_ms = _parse_int(net.get("window_ms", "1000"), "network.window_ms")
    max_events = _parse_int(net.get("max_events", str(DEFAULT_MAX_EVENTS)),
                            "network.max_events")
    partitions: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for line in net.get("partitions", "").splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ScenarioError(f"partition line must be 'src>dst start end': {line!r}")
        link = _parse_link(parts[0])
        if link not in link_pairs:
            raise ScenarioError(f"partition on undeclared link {parts[0]}")
        start = _parse_int(parts[1], "partition start")
        end = _parse_int(parts[2], "partition end")
        partitions.setdefault(link, []).append((start, end))

    links: dict[tuple[int, int], LinkSpec] = {}
    for link in link_pairs:
        latency_key = f"latency_ms.{link[0]}>{link[1]}"
        latency = _parse_int(net[latency_key], latency_key) \
            if latency_key in net else default_latency
        links[link] = LinkSpec(latency, tuple(sorted(partitions.get(link, []))))

    workload = _parse_workload(parser, clusters)
    bounds_cfg = parser["bounds"]
    mode = bounds_cfg.get("mode", "bounded")
    if mode not in ("bounded", "plain"):
        raise ScenarioError(f"bounds.mode must be 'bounded' or 'plain': {mode!r}")
    tick_ms = _parse_int(bounds_cfg.get("tick_ms", "100"), "bounds.tick_ms")
    poll_ms = _parse_int(bounds_cfg.get("poll_interval_ms", "1000"),
                         "bounds.poll_interval_ms")
    if tick_ms <= 0 or poll_ms <= 0:
        raise ScenarioError("bounds.tick_ms and bounds.poll_interval_ms must be positive")
    coalesce = _parse_bool(bounds_cfg.get("coalesce", "false"), "bounds.coalesce")
    default_bound, bounds = _parse_bounds(bounds_cfg, workload.total_updates)

    out = parser["output"] if "output" in parser else {}
    stem = path.stem
    csv_name = out.get("csv", f"{stem}.csv")
    summary_name = out.get("summary", f"{stem}.summary.json")

    if seed_override is not None:
        workload = replace(workload, seed=seed_override)

    return Scenario(
        name=stem, clusters=clusters, links=links, mode=mode,
        default_bound=default_bound, bounds=bounds, tick_ms=tick_ms,
        poll_interval_ms=poll_ms, coalesce=coalesce, window_ms=window_ms,
        max_events=max_events, workload=workload,
        csv_name=csv_name, summary_name=summary_name,
    )


def _parse_workload(parser: configparser.ConfigParser,
                    clusters: tuple[int, ...]) -> WorkloadSpec:
    wl = parser["workload"]
    containers = _parse_weighted_containers(wl.get("containers", "usertable:family"))
    origins = tuple(_parse_int(tok, "workload.origins")
                    for tok in wl.get("origins", "1").split())
    for origin in origins:
        if origin not in clusters:
            raise ScenarioError(f"workload origin {origin} is not a declared cluster")

    block_script = None
    if "blocks" in parser:
        blk = parser["blocks"]
        pattern = []
        for tok in blk.get("pattern", "").split():
            try:
                pattern.append(BlockMode[tok.upper()])
            except KeyError:
                raise ScenarioError(f"unknown block mode {tok!r} (IMMEDIATE or ANY)") from None
        block_containers = tuple(
            _parse_container(tok) for tok in blk.get("containers", "").split())
        block_script = BlockScript(
            count=_parse_int(blk.get("count", "0"), "blocks.count"),
            puts_per_block=_parse_int(blk.get("puts_per_block", "1"),
                                      "blocks.puts_per_block"),
            pattern=tuple(pattern),
            containers=block_containers,
            spacing_ms=_parse_int(blk.get("spacing_ms", "1"), "blocks.spacing_ms"),
        )

    operations = _parse_int(wl.get("operations", "50000"), "workload.operations")
    if block_script is not None:
        operations = block_script.total_updates
    return WorkloadSpec(
        operations=operations,
        write_fraction=_parse_float(wl.get("write_fraction", "0.5"),
                                    "workload.write_fraction"),
        distribution=wl.get("distribution", "zipfian"),
        zipf_constant=_parse_float(wl.get("zipf_constant", "0.99"),
                                   "workload.zipf_constant"),
        keyspace=_parse_int(wl.get("keyspace", "10000"), "workload.keyspace"),
        value_bytes=_parse_int(wl.get("value_bytes", "1000"), "workload.value_bytes"),
        containers=containers,
        seed=_parse_int(wl.get("seed", "42"), "workload.seed"),
        burst_ops=_parse_int(wl.get("burst_ops", "1"), "workload.burst_ops"),
        burst_spacing_ms=_parse_int(wl.get("burst_spacing_ms", "1"),
                                    "workload.burst_spacing_ms"),
        origins=origins,
        disjoint_keys=_parse_bool(wl.get("disjoint_keys", "false"),
                                  "workload.disjoint_keys"),
        block_script=block_script,
    )


def _parse_bounds(section, total_updates: int) -> tuple[Bound, dict[ContainerId, Bound]]:
    default_triple = section.get("default")
    default_bound = _parse_bound_triple(default_triple, "bounds.default") \
        if default_triple is not None else Bound()
    if "pending_percent" in section:
        if default_bound.pending:
            raise ScenarioError(
                "bounds.pending_percent conflicts with a pending count in bounds.default")
        percent = _parse_float(section["pending_percent"], "bounds.pending_percent")
        default_bound = Bound(default_bound.lag_ms,
                              _resolve_percent(percent, total_updates),
                              default_bound.drift)
    bounds: dict[ContainerId, Bound] = {}
    for key, raw in section.items():
        if key.startswith("pending_percent."):
            cid = _parse_container(key[len("pending_percent."):])
            base = bounds.get(cid, default_bound)
            percent = _parse_float(raw, key)
            bounds[cid] = Bound(base.lag_ms, _resolve_percent(percent, total_updates),
                                base.drift)
        elif ":" in key:
            bounds[_parse_container(key)] = _parse_bound_triple(raw, key)
    return default_bound, bounds


def _resolve_percent(percent: float, total_updates: int) -> int:
    try:
        return pending_from_percent(percent, total_updates)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc


def _parse_bound_triple(raw: str, where: str) -> Bound:
    parts = raw.split()
    if len(parts) != 3:
        raise ScenarioError(f"{where} must be 'lag_ms pending drift': {raw!r}")
    try:
        return Bound(int(parts[0]), int(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise ScenarioError(f"bad bound in {where}: {exc}") from exc


def _parse_weighted_containers(raw: str) -> tuple[tuple[ContainerId, float], ...]:
    entries = []
    for tok in raw.split():
        name, _, weight = tok.partition("*")
        entries.append((_parse_container(name),
                        _parse_float(weight, f"weight of {name}") if weight else 1.0))
    if not entries:
        raise ScenarioError("workload.containers must list at least one container")
    return tuple(entries)


def _parse_container(text: str) -> ContainerId:
    try:
        return ContainerId.parse(text)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc


def _parse_link(token: str) -> tuple[int, int]:
    src, sep, dst = token.partition(">")
    if not sep:
        raise ScenarioError(f"link must be written 'src>dst': {token!r}")
    return _parse_int(src, f"link {token!r}"), _parse_int(dst, f"link {token!r}")


def _parse_int(raw: str, where: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ScenarioError(f"{where}: not an integer: {raw!r}") from None


def _parse_float(raw: str, where: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ScenarioError(f"{where}: not a number: {raw!r}") from None


def _parse_bool(raw: str, where: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ScenarioError(f"{where}: not a boolean: {raw!r}")
