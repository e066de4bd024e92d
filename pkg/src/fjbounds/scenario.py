"""Scenario files (JSON) and seeded scenario generators.

A scenario is one JSON document::

    {"chain": {"transition": [[...]], "initial": [...]},
     "workload": {"arrival_rates": [...], "service_rates": [[...], ...],
                  "discipline": "work-conserving"},
     "simulation": {"jobs": 100000, "warmup": 10000, "replications": 20,
                    "seed": 0, "grid": [1, 2, ...]}}

``initial`` is optional and defaults to the stationary distribution;
``simulation`` is optional.  ``service_rates`` has one row per server.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chain import ModulatingChain, dirichlet_chain, stationary_distribution
from .simulator import SimulationConfig
from .workload import Discipline, WorkloadSpec, alpha_max_exp_mean


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    chain: ModulatingChain
    workload: WorkloadSpec
    simulation: dict = field(default_factory=dict)
    name: str = ""

    def simulation_config(self, **overrides) -> SimulationConfig:
        sim = dict(self.simulation)
        sim.update({k: v for k, v in overrides.items() if v is not None})
        kw = {}
        for key, attr in (("jobs", "num_jobs"), ("warmup", "warmup_jobs"), ("replications", "replications"),
                          ("seed", "base_seed"), ("grid", "ccdf_grid"), ("workers", "workers")):
            if key in sim:
                kw[attr] = sim[key]
        if "num_jobs" in kw and "warmup" not in sim:
            kw["warmup_jobs"] = None
        return SimulationConfig(**kw)

    def to_dict(self) -> dict:
        chain = {"transition": self.chain.transition.tolist()}
        if self.chain.initial is not None:
            chain["initial"] = self.chain.initial.tolist()
        out = {
            "chain": chain,
            "workload": {
                "arrival_rates": self.workload.arrival_rates.tolist(),
                "service_rates": self.workload.service_rates.tolist(),
                "discipline": self.workload.discipline.value,
            },
        }
        if self.simulation:
            out["simulation"] = dict(self.simulation)
        if self.name:
            out["name"] = self.name
        return out


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        ch = doc["chain"]
        wl = doc["workload"]
        chain = ModulatingChain(ch["transition"], ch.get("initial"))
        chain.check()
        spec = WorkloadSpec(wl["arrival_rates"], wl["service_rates"],
                            Discipline.parse(wl.get("discipline", "work-conserving")))
        spec.check_against(chain)
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"malformed scenario: missing or invalid field {exc}") from exc
    sim = doc.get("simulation") or {}
    if not isinstance(sim, dict):
        raise ScenarioError("'simulation' must be an object")
    return Scenario(chain, spec, sim, doc.get("name", ""))


def load_scenario(path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    return scenario_from_dict(doc)


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def save_scenario(scenario: Scenario, path) -> None:
    dump_json(scenario.to_dict(), path)


# --- generators -------------------------------------------------------------

def _scale_to_load(base: np.ndarray, pi: np.ndarray, mean_interarrival: float, load: float) -> np.ndarray:
    """Scale one server's per-state rates so that E_pi[1/mu] = load * E_pi[1/lambda]."""
    return base * (pi @ (1.0 / base)) / (load * mean_interarrival)


def random_rates(chain: ModulatingChain, arrival_rates, num_servers: int, rng: np.random.Generator,
                 modulate_services: bool, discipline: Discipline, load_range=(0.5, 0.85),
                 spread: float = 3.0) -> np.ndarray:
    """Draw heterogeneous service rates meeting a random target load.

    For work-conserving systems each server gets its own load in
    ``load_range``; for blocking systems all rates are scaled together so the
    mean of the per-state maximum service time hits one drawn load.
    """
    lam = np.asarray(arrival_rates, dtype=float)
    pi = stationary_distribution(chain)
    mean_ia = float(pi @ (1.0 / lam))
    k = chain.num_states
    if modulate_services:
        base = rng.uniform(1.0, spread, size=(num_servers, k))
    else:
        base = np.repeat(rng.uniform(1.0, spread, size=(num_servers, 1)), k, axis=1)
    if Discipline(discipline) is Discipline.BLOCKING:
        load = rng.uniform(*load_range)
        mean_max = pi @ np.array([alpha_max_exp_mean(base[:, j]) for j in range(k)])
        return base * mean_max / (load * mean_ia)
    loads = rng.uniform(*load_range, size=num_servers)
    return np.vstack([_scale_to_load(base[n], pi, mean_ia, loads[n]) for n in range(num_servers)])


def generate_scenario(num_states: int, seed: int, discipline: Discipline, arrival_rates=None,
                      modulate_services: bool = False, num_servers: int = 5, stickiness: float = 0.0,
                      arrival_range=(0.2, 1.0), name: str = "") -> Scenario:
    """Seeded random scenario: Dirichlet(1,...,1) chain rows and random stable rates.

    ``arrival_rates`` may be a scalar (renewal arrivals), a vector with one
    rate per state, or ``None`` to draw them uniformly from ``arrival_range``.
    """
    rng = np.random.default_rng(seed)
    chain = dirichlet_chain(num_states, rng, stickiness)
    if arrival_rates is None:
        lam = rng.uniform(*arrival_range, size=num_states)
    else:
        lam = np.broadcast_to(np.asarray(arrival_rates, dtype=float), (num_states,)).copy()
    mu = random_rates(chain, lam, num_servers, rng, modulate_services, discipline)
    spec = WorkloadSpec(lam, mu, discipline)
    return Scenario(chain, spec, {}, name)


# per-second intensities fitted to the public cluster trace, busiest state first
TRACE_INTENSITIES = (0.4616, 0.3180, 0.2011)
TRACE_TRANSITION = ((0.90, 0.07, 0.03),
                    (0.06, 0.88, 0.06),
                    (0.03, 0.07, 0.90))


def trace_shaped_scenario(seed: int, num_servers: int = 5, load_range=(0.6, 0.9),
                          intensities=TRACE_INTENSITIES, transition=TRACE_TRANSITION) -> Scenario:
    """Three arrival states, and per server three efficiency levels in random order.

    Levels for server ``n`` are ``base_n * (1 + spread)``, ``base_n``,
    ``base_n / (1 + spread)`` with ``base_n`` chosen for a random target load.
    """
    rng = np.random.default_rng(seed)
    chain = ModulatingChain(transition).check()
    lam = np.asarray(intensities, dtype=float)
    pi = stationary_distribution(chain)
    mean_ia = float(pi @ (1.0 / lam))
    rows = []
    for _ in range(num_servers):
        spread = rng.uniform(0.3, 1.0)
        levels = np.array([1.0 + spread, 1.0, 1.0 / (1.0 + spread)])
        row = rng.permutation(levels)
        rows.append(_scale_to_load(row, pi, mean_ia, rng.uniform(*load_range)))
    spec = WorkloadSpec(lam, np.vstack(rows), Discipline.WORK_CONSERVING)
    return Scenario(chain, spec, {}, f"trace-shaped-{seed}")


# state counts and arrival parameters are fixed per preset; the remaining
# parameters were drawn at random and are regenerated here from fixed seeds
FIGURE_PRESETS = {
    "fig3-left": dict(num_states=4, arrival_rates=(0.70, 0.75, 0.90, 0.95), modulate_services=False,
                      discipline=Discipline.WORK_CONSERVING),
    "fig3-middle": dict(num_states=32, arrival_rates=0.9, modulate_services=True,
                        discipline=Discipline.WORK_CONSERVING),
    "fig3-right": dict(num_states=64, arrival_rates=None, modulate_services=True,
                       discipline=Discipline.WORK_CONSERVING),
    "fig4-left": dict(num_states=3, arrival_rates=(0.25, 0.4, 0.50), modulate_services=False,
                      discipline=Discipline.BLOCKING),
    "fig4-middle": dict(num_states=32, arrival_rates=0.35, modulate_services=True,
                        discipline=Discipline.BLOCKING),
    "fig4-right": dict(num_states=64, arrival_rates=None, modulate_services=True,
                       discipline=Discipline.BLOCKING),
}


def figure_preset(name: str, seed: int = 0) -> Scenario:
    if name == "trace":
        return trace_shaped_scenario(seed)
    try:
        kw = FIGURE_PRESETS[name]
    except KeyError:
        raise ScenarioError(f"unknown preset {name!r}; choose from {sorted(FIGURE_PRESETS) + ['trace']}") from None
    return generate_scenario(seed=seed, name=name, **kw)
