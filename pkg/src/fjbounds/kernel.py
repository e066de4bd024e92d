"""Exponentially tilted transition matrices for the uncoupled model.

The increment of step ``k`` is conditioned on the state ``C_k`` it lands in,
so tilting multiplies column ``j`` of the transition matrix by the MGF of the
increment in state ``j``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import ModulatingChain
from .workload import (DomainError, MgfFactor, WorkloadSpec, exp_interarrival_mgf, exp_service_mgf,
                       max_exp_mgf)


@dataclass(frozen=True, eq=False)
class TransformedKernel:
    """``s -> T * diag(m_1(s), ..., m_k(s))`` with per-state MGF factors."""

    kind: str  # "server" or "blocking"
    server: int | None
    transition: np.ndarray
    column_factors: tuple[tuple[MgfFactor, ...], ...]  # per state, multiplied together

    @property
    def domain_max(self) -> float:
        return min(f.pole for col in self.column_factors for f in col)

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    def scale(self, s: float) -> np.ndarray:
        """The per-state MGF of the increment, i.e. the column multipliers."""
        if not 0 <= s < self.domain_max:
            raise DomainError(f"s = {s} outside [0, {self.domain_max})")
        out = np.empty(len(self.column_factors))
        for j, col in enumerate(self.column_factors):
            v = 1.0
            for f in col:
                v *= f(s)
            out[j] = v
        return out

    def evaluate(self, s: float) -> np.ndarray:
        if s == 0:
            return np.array(self.transition)
        return self.transition * self.scale(s)[None, :]


def build_server_kernel(chain: ModulatingChain, spec: WorkloadSpec, server_index: int) -> TransformedKernel:
    """Kernel for server ``server_index`` (0-based) of a work-conserving system."""
    spec.check_against(chain)
    if not 0 <= server_index < spec.num_servers:
        raise IndexError(f"server index {server_index} outside 0..{spec.num_servers - 1}")
    cols = tuple(
        (exp_service_mgf(spec.service_rates[server_index, j]), exp_interarrival_mgf(spec.arrival_rates[j]))
        for j in range(spec.num_states)
    )
    return TransformedKernel("server", server_index, chain.transition, cols)


def build_blocking_kernel(chain: ModulatingChain, spec: WorkloadSpec) -> TransformedKernel:
    """Kernel whose column ``j`` carries the MGF of ``max_n S_n - A`` in state ``j``."""
    spec.check_against(chain)
    cols = tuple(
        (max_exp_mgf(spec.service_rates[:, j]), exp_interarrival_mgf(spec.arrival_rates[j]))
        for j in range(spec.num_states)
    )
    return TransformedKernel("blocking", None, chain.transition, cols)
