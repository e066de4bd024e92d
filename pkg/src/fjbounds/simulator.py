"""Monte Carlo simulation of fork-join waiting times via Lindley recursions.

Per replication the draws are, in this order from one ``numpy`` Generator:
the initial state, one uniform per job for the chain step, one standard
exponential per job for the inter-arrival time, and an ``(jobs, N)`` block of
standard exponentials for the service times.  Job ``i``'s draws are scaled by
the rates of the state ``C_i`` the chain has just moved to.
"""
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .chain import ModulatingChain
from .workload import Discipline, WorkloadSpec, stability_check

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1


class SimulationError(ValueError):
    pass


def splitmix64(x: int) -> int:
    """One round of the SplitMix64 finalizer (Steele, Lea, Flood 2014)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def replication_seed(base_seed: int, replication: int) -> int:
    """``base_seed XOR splitmix64(replication)``, reduced to 64 bits."""
    return (int(base_seed) & MASK64) ^ splitmix64(int(replication))


@dataclass(frozen=True)
class SimulationConfig:
    num_jobs: int = 100_000
    warmup_jobs: int | None = None  # default: 10% of num_jobs
    replications: int = 20
    base_seed: int = 0
    ccdf_grid: tuple[float, ...] = tuple(float(w) for w in range(1, 21))
    workers: int = 1

    def __post_init__(self):
        if self.warmup_jobs is None:
            object.__setattr__(self, "warmup_jobs", self.num_jobs // 10)
        object.__setattr__(self, "ccdf_grid", tuple(float(w) for w in self.ccdf_grid))
        if self.num_jobs < 1:
            raise SimulationError("num_jobs must be positive")
        if not 0 <= self.warmup_jobs < self.num_jobs:
            raise SimulationError("warmup_jobs must satisfy 0 <= warmup < num_jobs")
        if self.replications < 1:
            raise SimulationError("replications must be positive")
        g = np.asarray(self.ccdf_grid)
        if g.size == 0 or np.any(g < 0) or np.any(np.diff(g) <= 0):
            raise SimulationError("ccdf_grid must be nonempty, nonnegative and strictly increasing")


@njit(cache=False, nogil=True)
def _chain_path(cum_t, start, u):
    out = np.empty(u.shape[0], dtype=np.int64)
    c = start
    k = cum_t.shape[0]
    for i in range(u.shape[0]):
        row = cum_t[c]
        j = 0
        while j < k - 1 and u[i] >= row[j]:
            j += 1
        c = j
        out[i] = c
    return out


@njit(cache=False, nogil=True)
def lindley_work_conserving(service, interarrival):
    """``W_j = max_n V_n(j)`` with per-server Lindley recursions, ``W_1 = 0``.

    ``service`` has shape ``(jobs, N)``; row ``j`` and ``interarrival[j]``
    drive the step from job ``j`` to job ``j + 1`` (0-based).
    """
    n_jobs, n_srv = service.shape
    v = np.zeros(n_srv)
    w = np.empty(n_jobs)
    w[0] = 0.0
    for j in range(1, n_jobs):
        m = 0.0
        for n in range(n_srv):
            x = v[n] + service[j - 1, n] - interarrival[j - 1]
            if x < 0.0:
                x = 0.0
            v[n] = x
            if x > m:
                m = x
        w[j] = m
    return w


@njit(cache=False, nogil=True)
def lindley_blocking(service, interarrival):
    """``W'_j = max(0, W'_{j-1} + max_n S_{n,j-1} - A_{j-1})``, ``W'_1 = 0``."""
    n_jobs, n_srv = service.shape
    w = np.empty(n_jobs)
    w[0] = 0.0
    for j in range(1, n_jobs):
        m = service[j - 1, 0]
        for n in range(1, n_srv):
            if service[j - 1, n] > m:
                m = service[j - 1, n]
        x = w[j - 1] + m - interarrival[j - 1]
        w[j] = x if x > 0.0 else 0.0
    return w


@dataclass(frozen=True)
class SamplePath:
    states: np.ndarray        # C_1..C_n
    interarrival: np.ndarray  # A_1..A_n
    service: np.ndarray       # S_{n,i}, shape (jobs, N)


def draw_path(chain: ModulatingChain, spec: WorkloadSpec, num_jobs: int, seed: int) -> SamplePath:
    rng = np.random.default_rng(seed)
    initial = chain.initial_distribution
    start = int(min(np.searchsorted(np.cumsum(initial), rng.random(), side="right"), chain.num_states - 1))
    cum_t = np.cumsum(chain.transition, axis=1)
    states = _chain_path(cum_t, start, rng.random(num_jobs))
    a = rng.standard_exponential(num_jobs) / spec.arrival_rates[states]
    s = rng.standard_exponential((num_jobs, spec.num_servers)) / spec.service_rates[:, states].T
    return SamplePath(states, a, s)


def waiting_times(path: SamplePath, discipline: Discipline) -> np.ndarray:
    if Discipline(discipline) is Discipline.BLOCKING:
        return lindley_blocking(path.service, path.interarrival)
    return lindley_work_conserving(path.service, path.interarrival)


def empirical_ccdf(sorted_samples: np.ndarray, grid) -> np.ndarray:
    """Fraction of samples ``>= w`` for each grid point."""
    n = sorted_samples.shape[0]
    idx = np.searchsorted(sorted_samples, np.asarray(grid, dtype=float), side="left")
    return (n - idx) / n


@dataclass(frozen=True)
class SimulationOutcome:
    discipline: Discipline
    config: SimulationConfig
    seeds: tuple[int, ...]
    samples: tuple[np.ndarray, ...]  # sorted, post-warmup, one per replication
    ccdf: np.ndarray                 # (replications, len(grid))
    stable: bool
    bound: np.ndarray | None = field(default=None)

    @property
    def grid(self) -> np.ndarray:
        return np.asarray(self.config.ccdf_grid)

    @property
    def total_samples(self) -> int:
        return sum(s.shape[0] for s in self.samples)

    @property
    def pooled_ccdf(self) -> np.ndarray:
        counts = sum(s.shape[0] * c for s, c in zip(self.samples, self.ccdf))
        return counts / self.total_samples

    def pooled_ccdf_se(self) -> np.ndarray:
        p = self.pooled_ccdf
        return np.sqrt(p * (1.0 - p) / self.total_samples)

    @property
    def pooled_mean(self) -> float:
        return float(sum(s.sum() for s in self.samples) / self.total_samples)

    def pooled_mean_se(self) -> float:
        allw = np.concatenate(self.samples)
        return float(allw.std(ddof=1) / np.sqrt(allw.size)) if allw.size > 1 else 0.0

    def replication_means(self) -> np.ndarray:
        return np.array([s.mean() for s in self.samples])

    def with_bound(self, bound_values) -> "SimulationOutcome":
        return SimulationOutcome(self.discipline, self.config, self.seeds, self.samples, self.ccdf,
                                 self.stable, np.asarray(bound_values, dtype=float))

    def summary(self) -> dict:
        c = self.config
        return {
            "discipline": self.discipline.value,
            "stable": self.stable,
            "pooled_mean": self.pooled_mean,
            "pooled_mean_se": self.pooled_mean_se(),
            "replication_means": self.replication_means().tolist(),
            "seeds": list(self.seeds),
            "config": {
                "num_jobs": c.num_jobs,
                "warmup_jobs": c.warmup_jobs,
                "replications": c.replications,
                "base_seed": c.base_seed,
                "ccdf_grid": list(c.ccdf_grid),
            },
        }

    def ccdf_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["w"] + [f"rep{r}" for r in range(len(self.samples))] + ["pooled"]
        if self.bound is not None:
            header.append("bound")
        writer.writerow(header)
        pooled = self.pooled_ccdf
        for i, w in enumerate(self.grid):
            row = [repr(float(w))] + [repr(float(v)) for v in self.ccdf[:, i]] + [repr(float(pooled[i]))]
            if self.bound is not None:
                row.append(repr(float(self.bound[i])))
            writer.writerow(row)
        return buf.getvalue()


def _replicate(chain, spec, config, seed, discipline):
    path = draw_path(chain, spec, config.num_jobs, seed)
    w = waiting_times(path, discipline)
    if not np.all(np.isfinite(w)):
        raise SimulationError(f"waiting times overflowed (seed {seed}); the system is likely unstable")
    kept = np.sort(w[config.warmup_jobs:])
    return kept, empirical_ccdf(kept, config.ccdf_grid)


def simulate(chain: ModulatingChain, spec: WorkloadSpec, config: SimulationConfig,
             discipline: Discipline | None = None) -> SimulationOutcome:
    """Run ``config.replications`` independent replications.

    Replication ``r`` uses ``replication_seed(config.base_seed, r)`` so the
    outcome does not depend on ``config.workers``.
    """
    spec.check_against(chain)
    discipline = Discipline(discipline or spec.discipline)
    stable = stability_check(chain, spec).stable_for(discipline)
    if not stable:
        log.warning("simulating an unstable %s system", discipline.value)
    seeds = tuple(replication_seed(config.base_seed, r) for r in range(config.replications))
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(lambda sd: _replicate(chain, spec, config, sd, discipline), seeds))
    else:
        results = [_replicate(chain, spec, config, sd, discipline) for sd in seeds]
    samples = tuple(r[0] for r in results)
    ccdf = np.vstack([r[1] for r in results])
    return SimulationOutcome(discipline, config, seeds, samples, ccdf, stable)
