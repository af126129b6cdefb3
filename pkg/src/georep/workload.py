"""Deterministic workload generation.

A workload spec fully determines the operation stream: one seeded
generator drives every random choice, and the read/write interleave is
deterministic (write number w lands at the earliest index where
floor((index+1) * write_fraction) reaches w), so a 50/50 mix alternates
read, write, read, write rather than coin-flipping.

Key popularity follows either a uniform draw over the keyspace or a
zipfian draw where the key of rank r is chosen with probability
proportional to 1 / (r+1)^constant, sampled from the exact cumulative
distribution.

Operations are paced in bursts: ``burst_ops`` operations share each
arrival instant and consecutive instants are ``burst_spacing_ms``
apart.  The defaults (1 op per instant, 1 ms apart) give steady
one-per-millisecond arrivals.  Scripted write groups replace the plain
op stream when a block script is present.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass
from typing import Iterator, Union

from .blocks import BlockMode
from .bounds import ContainerId
from .errors import ScenarioError


@dataclass(frozen=True, slots=True)
class ReadOp:
    container: ContainerId
    key: str


@dataclass(frozen=True, slots=True)
class WriteOp:
    container: ContainerId
    key: str
    value: bytes


@dataclass(frozen=True, slots=True)
class BlockStartOp:
    mode: BlockMode


@dataclass(frozen=True, slots=True)
class BlockEndOp:
    pass


Operation = Union[ReadOp, WriteOp, BlockStartOp, BlockEndOp]

# One scheduled client action: (arrival instant, acting cluster, op).
TimedOp = tuple[int, int, Operation]


@dataclass(frozen=True, slots=True)
class BlockScript:
    """Scripted stream of write groups replacing the plain op mix."""

    count: int
    puts_per_block: int
    pattern: tuple[BlockMode, ...]
    containers: tuple[ContainerId, ...]
    spacing_ms: int = 1

    def __post_init__(self) -> None:
        if self.count <= 0 or self.puts_per_block <= 0:
            raise ScenarioError("block count and puts per block must be positive")
        if not self.pattern or not self.containers:
            raise ScenarioError("block script needs a mode pattern and containers")
        if self.spacing_ms <= 0:
            raise ScenarioError("block spacing must be positive")

    @property
    def total_updates(self) -> int:
        return self.count * self.puts_per_block


@dataclass(frozen=True, slots=True)
class WorkloadSpec:
    """Everything needed to regenerate one operation stream."""

    operations: int
    write_fraction: float = 0.5
    distribution: str = "zipfian"
    zipf_constant: float = 0.99
    keyspace: int = 10_000
    value_bytes: int = 1000
    containers: tuple[tuple[ContainerId, float], ...] = (
        (ContainerId("usertable", "family"), 1.0),
    )
    seed: int = 42
    burst_ops: int = 1
    burst_spacing_ms: int = 1
    origins: tuple[int, ...] = (1,)
    disjoint_keys: bool = False
    block_script: BlockScript | None = None

    def __post_init__(self) -> None:
        if self.operations <= 0:
            raise ScenarioError(f"operation count must be positive: {self.operations}")
        if not 0.0 <= self.write_fraction <= 1.0:
            raise ScenarioError(f"write fraction must be in [0, 1]: {self.write_fraction}")
        if self.distribution not in ("zipfian", "uniform"):
            raise ScenarioError(f"unknown key distribution: {self.distribution!r}")
        if self.distribution == "zipfian" and not 0.0 < self.zipf_constant < 1.0:
            raise ScenarioError(f"zipfian constant must be in (0, 1): {self.zipf_constant}")
        if self.keyspace <= 0:
            raise ScenarioError(f"keyspace must be positive: {self.keyspace}")
        if self.value_bytes <= 0:
            raise ScenarioError(f"value size must be positive: {self.value_bytes}")
        if not self.containers or any(w <= 0 for _, w in self.containers):
            raise ScenarioError("container weights must be positive")
        if self.burst_ops <= 0 or self.burst_spacing_ms <= 0:
            raise ScenarioError("burst pacing values must be positive")
        if not self.origins:
            raise ScenarioError("at least one originating cluster is required")

    @property
    def total_updates(self) -> int:
        """Number of replicated updates the stream will produce; the
        basis for resolving percentage bounds.

        The per-op write test telescopes, so the write count is exactly
        floor(operations * write_fraction).
        """
        if self.block_script is not None:
            return self.block_script.total_updates
        return math.floor(self.operations * self.write_fraction)


class ZipfianSampler:
    """Exact-CDF sampler: rank r drawn proportional to 1 / (r+1)^s."""

    def __init__(self, keyspace: int, constant: float) -> None:
        if keyspace < 1:
            raise ScenarioError(f"keyspace must be at least 1: {keyspace}")
        if not 0.0 < constant < 1.0:
            raise ScenarioError(f"zipfian constant must be in (0, 1): {constant}")
        self.keyspace = keyspace
        self.constant = constant
        weights = [1.0 / math.pow(rank + 1, constant) for rank in range(keyspace)]
        total = math.fsum(weights)
        cdf = []
        acc = 0.0
        for w in weights:
            acc += w
            cdf.append(acc / total)
        cdf[-1] = 1.0
        self._cdf = cdf

    def sample(self, rng: random.Random) -> int:
        return bisect.bisect_right(self._cdf, rng.random())


def _is_write(index: int, write_fraction: float) -> bool:
    """Deterministic interleave: op ``index`` is a write exactly when the
    running write quota ticks up at this index."""
    return math.floor((index + 1) * write_fraction) > math.floor(index * write_fraction)


def generate(spec: WorkloadSpec) -> Iterator[TimedOp]:
    """Yield the full operation stream for a spec, in arrival order.

    The same spec always yields the identical stream.
    """
    rng = random.Random(spec.seed)
    if spec.block_script is not None:
        yield from _generate_blocks(spec, spec.block_script, rng)
        return

    sampler = None
    if spec.distribution == "zipfian":
        sampler = ZipfianSampler(spec.keyspace, spec.zipf_constant)
    cids = [cid for cid, _ in spec.containers]
    cum_weights = None
    if len(cids) > 1:
        total = sum(w for _, w in spec.containers)
        acc = 0.0
        cum_weights = []
        for _, w in spec.containers:
            acc += w
            cum_weights.append(acc / total)
        cum_weights[-1] = 1.0

    for k in range(spec.operations):
        at_ms = (k // spec.burst_ops) * spec.burst_spacing_ms
        origin = spec.origins[k % len(spec.origins)]
        if cum_weights is None:
            cid = cids[0]
        else:
            cid = cids[bisect.bisect_right(cum_weights, rng.random())]
        idx = sampler.sample(rng) if sampler is not None else rng.randrange(spec.keyspace)
        key = f"c{origin}-user{idx}" if spec.disjoint_keys else f"user{idx}"
        if _is_write(k, spec.write_fraction):
            yield at_ms, origin, WriteOp(cid, key, rng.randbytes(spec.value_bytes))
        else:
            yield at_ms, origin, ReadOp(cid, key)


def _generate_blocks(spec: WorkloadSpec, script: BlockScript,
                     rng: random.Random) -> Iterator[TimedOp]:
    for bi in range(script.count):
        at_ms = bi * script.spacing_ms
        origin = spec.origins[bi % len(spec.origins)]
        mode = script.pattern[bi % len(script.pattern)]
        yield at_ms, origin, BlockStartOp(mode)
        for pi in range(script.puts_per_block):
            cid = script.containers[pi % len(script.containers)]
            key = f"b{bi}-p{pi}"
            yield at_ms, origin, WriteOp(cid, key, rng.randbytes(spec.value_bytes))
        yield at_ms, origin, BlockEndOp()
