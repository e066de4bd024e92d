"""Service-rate provisions: rearrangements of each server's rates over states."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .bounds import BoundReport, compute_bound
from .chain import ModulatingChain
from .simulator import SimulationConfig, SimulationOutcome, simulate
from .workload import WorkloadSpec


def reactive_provision(spec: WorkloadSpec, arrival_rates=None) -> WorkloadSpec:
    """Give every server its fastest rate in the busiest arrival state, and so on down.

    The chain state is assumed observable.  Ties in arrival rate keep the
    lower state index first.
    """
    lam = spec.arrival_rates if arrival_rates is None else np.asarray(arrival_rates, dtype=float)
    if lam.shape != (spec.num_states,):
        raise ValueError(f"expected {spec.num_states} arrival rates, got shape {lam.shape}")
    busiest_first = np.argsort(-lam, kind="stable")
    mu = np.empty_like(spec.service_rates)
    for n, row in enumerate(spec.service_rates):
        mu[n, busiest_first] = np.sort(row)[::-1]
    return spec.replace(service_rates=mu)


def random_provision(spec: WorkloadSpec, seed: int) -> WorkloadSpec:
    """Independent uniform permutation of each server's rates across states."""
    rng = np.random.default_rng(seed)
    mu = np.vstack([rng.permutation(row) for row in spec.service_rates])
    return spec.replace(service_rates=mu)


def identity_provision(spec: WorkloadSpec) -> WorkloadSpec:
    return spec


@dataclass(frozen=True)
class ProvisionResult:
    name: str
    spec: WorkloadSpec
    bound: BoundReport
    simulation: SimulationOutcome

    def row(self) -> dict:
        return {
            "provision": self.name,
            "decay_rates": self.bound.decay_rates.tolist(),
            "prefactors": self.bound.prefactors.tolist(),
            "mean_bound": self.bound.mean_bound,
            "empirical_mean": self.simulation.pooled_mean,
            "empirical_mean_se": self.simulation.pooled_mean_se(),
            "service_rates": self.spec.service_rates.tolist(),
        }


@dataclass(frozen=True)
class ComparisonReport:
    grid: np.ndarray
    results: tuple[ProvisionResult, ...]

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.tolist(),
            "provisions": [
                dict(r.row(), empirical_ccdf=r.simulation.pooled_ccdf.tolist(),
                     bound=r.bound.tail_bound(self.grid).tolist())
                for r in self.results
            ],
        }

    def table_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["provision", "min_decay_rate", "mean_bound", "empirical_mean", "empirical_mean_se"]
                        + [f"ccdf_w{w:g}" for w in self.grid])
        for r in self.results:
            writer.writerow([r.name, repr(float(r.bound.decay_rates.min())), repr(r.bound.mean_bound),
                             repr(r.simulation.pooled_mean), repr(r.simulation.pooled_mean_se())]
                            + [repr(float(v)) for v in r.simulation.pooled_ccdf])
        return buf.getvalue()


def compare_provisions(chain: ModulatingChain, specs, config: SimulationConfig) -> ComparisonReport:
    """Bound and simulate each ``(name, spec)`` pair under the same seeds."""
    results = []
    for name, spec in specs:
        bound = compute_bound(chain, spec)
        sim = simulate(chain, spec, config).with_bound(bound.tail_bound(np.asarray(config.ccdf_grid)))
        results.append(ProvisionResult(name, spec, bound, sim))
    return ComparisonReport(np.asarray(config.ccdf_grid), tuple(results))
