"""Discord of spin pairs under the different state conventions.

Each helper returns one :class:`~xydiscord.infotheory.CorrelationTriple`
per requested distance ``r``. The conventions are

* ``symmetric``: Z2-symmetric state (bulk quadrature or ring sums, any T),
* ``broken``: bulk symmetry-broken ground state (T = 0),
* ED ground states, where the two-site matrix is reduced directly from the
  statevector, so open chains keep their site dependence.
"""

from __future__ import annotations

import numpy as np

from .density import make_density, rho_pair
from .ed import EdConfig, ground_state, pair_sites, reduced_density
from .fermion_core import ModelParams, broken_correlators, correlators
from .infotheory import CorrelationTriple, discord


def triples_from_correlators(cs, rs) -> list[CorrelationTriple]:
    return [discord(rho_pair(cs, r)) for r in rs]


def symmetric_triples(params: ModelParams, rs, tol: float = 1e-10) -> list[CorrelationTriple]:
    cs = correlators(params, max(rs), tol=tol)
    return triples_from_correlators(cs, rs)


def broken_triples(params: ModelParams, rs) -> list[CorrelationTriple]:
    cs = broken_correlators(params, max(rs))
    return triples_from_correlators(cs, rs)


def ed_triples(state, rs) -> list[CorrelationTriple]:
    out = []
    for r in rs:
        rho = make_density(reduced_density(state, pair_sites(state.config, r)), "ED")
        out.append(discord(rho))
    return out


def q_symmetric(params: ModelParams, rs) -> np.ndarray:
    return np.array([t.discord for t in symmetric_triples(params, rs)])


def q_broken(gamma: float, h: float, rs) -> np.ndarray:
    return np.array([t.discord for t in broken_triples(ModelParams(gamma, h), rs)])


class EdSweep:
    """Ground states along a field sweep, each seeded by the previous one.

    Calling the instance with a field returns the discord values Q_r for the
    distances given at construction.
    """

    def __init__(self, L, gamma, rs=(1,), boundary="periodic", hx="adaptive"):
        self.L = L
        self.gamma = gamma
        self.rs = tuple(rs)
        self.boundary = boundary
        self.hx = hx
        self._last = None

    def state(self, h: float):
        cfg = EdConfig(self.L, self.gamma, h, boundary=self.boundary, hx=self.hx)
        self._last = ground_state(cfg, guess=self._last)
        return self._last

    def __call__(self, h: float) -> np.ndarray:
        return np.array([t.discord for t in ed_triples(self.state(h), self.rs)])
