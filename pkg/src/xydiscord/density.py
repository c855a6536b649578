"""One- and two-site density matrices assembled from spin correlators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlochViolation, NotPositive, ValidationError

SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SY = np.array([[0.0, -1j], [1j, 0.0]])
SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
I2 = np.eye(2)

CLIP_TOL = 1e-10
REJECT_TOL = 1e-8

_X_PATTERN = np.array(
    [[1, 0, 0, 1], [0, 1, 1, 0], [0, 1, 1, 0], [1, 0, 0, 1]], dtype=bool
)


@dataclass
class DensityMatrix:
    """Hermitian, unit-trace, positive matrix with a structural tag.

    ``tag`` is ``"XState"`` when only the diagonal and anti-diagonal can be
    non-zero, ``"GeneralReal"`` for other real matrices and ``"General"``
    otherwise.
    """

    matrix: np.ndarray
    tag: str = "General"
    source: str = ""

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)


def classify(matrix: np.ndarray, atol: float = 0.0) -> str:
    if np.iscomplexobj(matrix) and np.any(np.abs(matrix.imag) > atol):
        return "General"
    if matrix.shape == (4, 4) and np.all(np.abs(matrix[~_X_PATTERN]) <= atol):
        return "XState"
    return "GeneralReal"


def make_density(matrix, source: str = "", tag: str | None = None) -> DensityMatrix:
    """Validate ``matrix`` and wrap it.

    Eigenvalues in (-1e-10, 0) are clipped to zero and the trace restored;
    anything more negative than -1e-8 raises :class:`NotPositive`.
    """
    m = np.array(matrix, dtype=complex if np.iscomplexobj(matrix) else float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError("density matrix must be square")
    if np.max(np.abs(m - m.conj().T)) > 1e-12:
        raise ValidationError("density matrix is not Hermitian")
    m = 0.5 * (m + m.conj().T)
    tr = np.trace(m).real
    if abs(tr - 1.0) > 1e-10:
        raise ValidationError(f"trace {tr} differs from 1")
    w, v = np.linalg.eigh(m)
    if w[0] < -REJECT_TOL:
        raise NotPositive(f"minimum eigenvalue {w[0]:.3e}")
    # between the two thresholds the matrix is kept as is, unrepaired
    if -CLIP_TOL < w[0] < 0:
        w = np.clip(w, 0.0, None)
        w /= w.sum()
        m = (v * w) @ v.conj().T
        if not np.iscomplexobj(matrix):
            m = m.real
    return DensityMatrix(m, tag or classify(m), source)


def rho_single(g_z: float, g_x: float = 0.0) -> DensityMatrix:
    """(I + g_x sx + g_z sz) / 2."""
    if g_z * g_z + g_x * g_x > 1.0 + REJECT_TOL:
        raise BlochViolation(f"Bloch vector ({g_x}, 0, {g_z}) longer than 1")
    m = 0.5 * (I2 + g_x * SX + g_z * SZ)
    return make_density(m, "correlators")


def pair_matrix(g_z, g_x, g_xx, g_yy, g_zz, g_xz=0.0, g_zx=0.0) -> np.ndarray:
    """Two-site matrix from correlators of a real, translation-invariant state."""
    m = (
        np.kron(I2, I2)
        + g_x * (np.kron(SX, I2) + np.kron(I2, SX))
        + g_z * (np.kron(SZ, I2) + np.kron(I2, SZ))
        + g_xx * np.kron(SX, SX)
        + g_yy * np.kron(SY, SY)
        + g_zz * np.kron(SZ, SZ)
        + g_xz * np.kron(SX, SZ)
        + g_zx * np.kron(SZ, SX)
    )
    return (0.25 * m).real


def rho_pair(cs, r: int) -> DensityMatrix:
    """Two-site reduced state at distance ``r`` from a correlator set."""
    if not 1 <= r <= cs.r_max:
        raise ValidationError(f"r={r} outside 1..{cs.r_max}")
    i = r - 1
    m = pair_matrix(cs.g_z, cs.g_x, cs.g_xx[i], cs.g_yy[i], cs.g_zz[i], cs.g_xz[i], cs.g_zx[i])
    tag = "XState" if cs.g_x == 0 and cs.g_xz[i] == 0 and cs.g_zx[i] == 0 else "GeneralReal"
    return make_density(m, cs.provenance, tag)


def partial_trace(rho, keep: int) -> np.ndarray:
    """Trace out one qubit of a two-qubit matrix; ``keep`` is 0 (A) or 1 (B)."""
    t = as_matrix(rho).reshape(2, 2, 2, 2)
    if keep == 0:
        return np.einsum("ajbj->ab", t)
    return np.einsum("jajb->ab", t)
