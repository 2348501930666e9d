"""Reproducible Monte Carlo plumbing.

Trials are partitioned into fixed-size blocks; each block draws from its own
counter-based Philox stream keyed by (seed, scheme tag, block index), so the
result of a run depends only on the seed and trial count, never on how the
blocks were scheduled across workers. Partial moments are merged in block
order with a numerically stable pooling rule.
"""
from __future__ import annotations

import multiprocessing
import os
import zlib
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

BLOCK_SIZE = 4096

TrialFn = Callable[[np.random.Generator, int, dict], np.ndarray]


def stream(seed: int, tag: str, index: int) -> np.random.Generator:
    """Independent generator for one block of one scheme."""
    key = (int(seed) & 0xFFFFFFFF, zlib.crc32(tag.encode()), int(index))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


@dataclass(frozen=True)
class Partial:
    """Moment summary of one block of trials."""

    seed: int
    index: int
    count: int
    mean: float
    m2: float  # sum of squared deviations from the block mean


def block_layout(total: int, block: int = BLOCK_SIZE):
    """Deterministic (index, size) schedule covering ``total`` trials."""
    out = []
    idx = 0
    done = 0
    while done < total:
        size = min(block, total - done)
        out.append((idx, size))
        done += size
        idx += 1
    return out


def run_block(trial_fn: TrialFn, seed: int, tag: str, index: int, size: int, params: dict) -> Partial:
    rng = stream(seed, tag, index)
    values = np.asarray(trial_fn(rng, size, params), dtype=float)
    if values.shape != (size,):
        raise ValueError("trial function returned wrong number of values")
    mean = float(values.mean())
    m2 = float(((values - mean) ** 2).sum())
    return Partial(seed=seed, index=index, count=size, mean=mean, m2=m2)


def _worker(args):
    trial_fn, seed, tag, index, size, params = args
    return run_block(trial_fn, seed, tag, index, size, params)


def default_workers() -> int:
    env = os.environ.get("QEST_WORKERS")
    if env:
        return max(1, int(env))
    return 1


def mc_run(
    trial_fn: TrialFn,
    total: int,
    seed: int,
    tag: str,
    params: Optional[dict] = None,
    workers: Optional[int] = None,
    block: int = BLOCK_SIZE,
) -> Sequence[Partial]:
    """Run ``total`` trials and return the per-block partials in block order."""
    params = params or {}
    workers = default_workers() if workers is None else max(1, int(workers))
    layout = block_layout(total, block)
    if workers == 1 or len(layout) == 1:
        parts = [run_block(trial_fn, seed, tag, i, n, params) for i, n in layout]
    else:
        jobs = [(trial_fn, seed, tag, i, n, params) for i, n in layout]
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=min(workers, len(jobs))) as pool:
            parts = pool.map(_worker, jobs)
    return sorted(parts, key=lambda p: p.index)


def pool_partials(partials: Sequence[Partial]):
    """Merge block moments; returns (count, mean, stderr)."""
    if not partials:
        raise ValueError("cannot reduce an empty partial list")
    seeds = {p.seed for p in partials}
    if len(seeds) != 1:
        raise ValueError(f"partials come from mixed seeds: {sorted(seeds)}")
    count = 0
    mean = 0.0
    m2 = 0.0
    for p in sorted(partials, key=lambda q: q.index):
        if p.count == 0:
            continue
        delta = p.mean - mean
        tot = count + p.count
        m2 += p.m2 + delta * delta * count * p.count / tot
        mean += delta * p.count / tot
        count = tot
    if count < 2:
        return count, mean, 0.0
    stderr = float(np.sqrt(m2 / (count - 1) / count))
    return count, mean, stderr
