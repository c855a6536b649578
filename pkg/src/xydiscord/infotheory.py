"""Entropies, mutual information, classical correlations and discord.

All quantities are in bits. Classical correlations maximize over projective
measurements on the second qubit (B) only. A measurement is the pair of
projectors onto +n and -n with n = (sin t cos p, sin t sin p, cos t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .density import SX, SY, SZ, I2, as_matrix, partial_trace

ZERO_EIG = 1e-14
GRID = (64, 128)
REFINE_TOL = 1e-10
_PAULIS = (SX, SY, SZ)


@dataclass(frozen=True)
class MeasurementBasis:
    theta: float
    phi: float

    @property
    def direction(self) -> np.ndarray:
        return _direction(self.theta, self.phi)

    def projectors(self):
        n = self.direction
        ns = n[0] * SX + n[1] * SY + n[2] * SZ
        return 0.5 * (I2 + ns), 0.5 * (I2 - ns)


@dataclass
class CorrelationTriple:
    mutual_info: float
    classical: float
    discord: float
    theta: float
    phi: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def basis(self) -> MeasurementBasis:
        return MeasurementBasis(self.theta, self.phi)


def _direction(theta, phi):
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def entropy(rho) -> float:
    """Von Neumann entropy in bits; eigenvalues below 1e-14 count as zero."""
    w = np.linalg.eigvalsh(as_matrix(rho))
    w = w[w > ZERO_EIG]
    return float(max(-np.sum(w * np.log2(w)), 0.0))


def _h2(p):
    """Binary entropy in bits, elementwise, with 0 log 0 = 0."""
    p = np.clip(p, 0.0, 1.0)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.where(p > ZERO_EIG, p * np.log2(p), 0.0) - np.where(q > ZERO_EIG, q * np.log2(q), 0.0)
    return out


def _qubit_entropy_from_bloch(length):
    return _h2(0.5 * (1.0 + np.minimum(length, 1.0)))


def mutual_info(rho_ab) -> float:
    m = as_matrix(rho_ab)
    return entropy(partial_trace(m, 0)) + entropy(partial_trace(m, 1)) - entropy(m)


def bloch_decomposition(rho_ab):
    """Local Bloch vectors ``a`` (A), ``b`` (B) and correlation tensor ``T``."""
    m = as_matrix(rho_ab)
    a = np.array([np.trace(m @ np.kron(s, I2)).real for s in _PAULIS])
    b = np.array([np.trace(m @ np.kron(I2, s)).real for s in _PAULIS])
    T = np.array([[np.trace(m @ np.kron(s, t)).real for t in _PAULIS] for s in _PAULIS])
    return a, b, T


def _conditional_from_bloch(a, b, T, n):
    """Measurement-conditioned entropy for directions ``n`` of shape (..., 3).

    Outcome +-n on B occurs with p = (1 +- b.n)/2 and leaves A with Bloch
    vector (a +- T n) / (1 +- b.n); the post-measurement AB state is that
    qubit times a pure projector, so only A's entropy contributes.
    """
    bn = n @ b
    Tn = n @ T.T
    total = np.zeros(bn.shape)
    for sign in (1.0, -1.0):
        p = 0.5 * (1.0 + sign * bn)
        vec = a + sign * Tn
        with np.errstate(divide="ignore", invalid="ignore"):
            length = np.linalg.norm(vec, axis=-1) / (2.0 * p)
        s = _qubit_entropy_from_bloch(np.where(p > ZERO_EIG, length, 0.0))
        total = total + np.where(p > ZERO_EIG, p * s, 0.0)
    return total


def conditional_entropy(rho_ab, basis: MeasurementBasis) -> float:
    """S(AB | {B_k}) = sum_k p_k S(rho_AB^(k)), evaluated on the full 4x4 states."""
    m = as_matrix(rho_ab)
    total = 0.0
    for proj in basis.projectors():
        P = np.kron(I2, proj)
        branch = P @ m @ P
        p = np.trace(branch).real
        if p < ZERO_EIG:
            continue
        total += p * entropy(branch / p)
    return float(total)


class _Objective:
    def __init__(self, rho_ab):
        self.a, self.b, self.T = bloch_decomposition(rho_ab)
        self.calls = 0

    def grid(self, n_theta, n_phi):
        theta = (np.arange(n_theta) + 0.5) * math.pi / n_theta
        phi = np.arange(n_phi) * 2.0 * math.pi / n_phi
        tt, pp = np.meshgrid(theta, phi, indexing="ij")
        vals = _conditional_from_bloch(self.a, self.b, self.T, _direction(tt, pp))
        self.calls += vals.size
        return theta, phi, vals

    def __call__(self, x):
        self.calls += 1
        n = _direction(x[0], x[1])
        return float(_conditional_from_bloch(self.a, self.b, self.T, n))


def _refine(obj, x0, scale):
    simplex = np.array([x0, x0 + [scale, 0.0], x0 + [0.0, scale]])
    res = minimize(
        obj,
        x0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": 1e-9,
            "fatol": REFINE_TOL * 1e-3,
            "maxiter": 4000,
        },
    )
    return res.x, float(res.fun), int(res.nit)


def _grid_refine(obj, grid, starts=3):
    n_theta, n_phi = grid
    best = None
    for _ in range(4):
        theta, phi, vals = obj.grid(n_theta, n_phi)
        order = np.argsort(vals, axis=None)[:starts]
        cell = math.pi / n_theta
        candidates = []
        for flat in order:
            i, j = np.unravel_index(flat, vals.shape)
            x0 = np.array([theta[i], phi[j]])
            x, f, nit = _refine(obj, x0, cell)
            candidates.append((f, x, x0, nit, float(vals[i, j])))
        f, x, x0, nit, grid_best = min(candidates, key=lambda c: c[0])
        best = (f, x, {"grid": (n_theta, n_phi), "grid_best": grid_best, "refined_best": f,
                       "iterations": nit})
        dist = math.hypot(x[0] - x0[0], (x[1] - x0[1]) * math.sin(x0[0]))
        if dist <= 2.0 * cell * math.sqrt(2.0):
            break
        n_theta, n_phi = 2 * n_theta, 2 * n_phi
    return best


def minimal_conditional_entropy(rho_ab, tag: str | None = None, grid=GRID):
    """Minimum of S(AB|{B_k}) over projective measurements on B.

    Returns ``(value, theta, phi, diagnostics)``. X-state input first tries
    the three Pauli bases and keeps the best of them unless a local simplex
    search started there finds something lower by more than 1e-9.
    """
    if tag is None:
        tag = getattr(rho_ab, "tag", None)
    obj = _Objective(rho_ab)
    if tag == "XState":
        canon = [(math.pi / 2, 0.0), (math.pi / 2, math.pi / 2), (0.0, 0.0)]
        vals = [obj(np.array(c)) for c in canon]
        j = int(np.argmin(vals))
        f0 = vals[j]
        x0 = np.array(canon[j])
        if j == 2:
            # the pole is a coordinate singularity; step off it for the check
            x0 = np.array([1e-3, 0.0])
        _, f, nit = _refine(obj, x0, 0.05)
        if f >= f0 - 1e-9:
            return f0, canon[j][0], canon[j][1], {
                "path": "x-fast", "basis": "xyz"[j], "refined_best": f, "iterations": nit
            }
        f, x, diag = _grid_refine(obj, grid)
        diag.update(path="full", interior_optimum=True)
        return f, float(x[0]), float(x[1]), diag
    f, x, diag = _grid_refine(obj, grid)
    diag["path"] = "full"
    return f, float(x[0]), float(x[1]), diag


def classical_corr(rho_ab, tag: str | None = None):
    """Classical correlations C and the maximizing measurement basis."""
    m = as_matrix(rho_ab)
    s_a = entropy(partial_trace(m, 0))
    f, theta, phi, diag = minimal_conditional_entropy(rho_ab, tag)
    return max(s_a - f, 0.0), MeasurementBasis(theta, phi), diag


def discord(rho_ab, tag: str | None = None) -> CorrelationTriple:
    """Mutual information, classical correlations and discord Q = I - C."""
    I = mutual_info(rho_ab)
    C, basis, diag = classical_corr(rho_ab, tag)
    Q = I - C
    if -1e-9 < Q < 0:
        Q = 0.0
    return CorrelationTriple(I, C, Q, basis.theta, basis.phi, diag)


def discord_asymmetry(rho_ab) -> float:
    """|Q_B - Q_A|: discord with measurement on B minus that on A."""
    m = as_matrix(rho_ab)
    swapped = m.reshape(2, 2, 2, 2).transpose(1, 0, 3, 2).reshape(4, 4)
    return abs(discord(m).discord - discord(swapped).discord)
