"""Shared helpers for the test suite: random states and brute-force oracles."""

import numpy as np
import pytest

BELL = np.zeros((4, 4))
BELL[0, 0] = BELL[0, 3] = BELL[3, 0] = BELL[3, 3] = 0.5


def random_pure(rng, complex_=True):
    v = rng.standard_normal(4) + (1j * rng.standard_normal(4) if complex_ else 0)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def random_general(rng):
    W = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    rho = W @ W.conj().T
    return rho / np.trace(rho).real


def random_xstate(rng):
    """Mixture of pure states inside span{|00>,|11>} and span{|01>,|10>}."""
    rho = np.zeros((4, 4))
    for idx in ((0, 3), (1, 2)):
        for _ in range(2):
            v = rng.standard_normal(2)
            v /= np.linalg.norm(v)
            w = rng.random()
            block = w * np.outer(v, v)
            rho[np.ix_(idx, idx)] += block
    return rho / np.trace(rho)


def random_unitary(rng):
    Z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def brute_force_conditional(rho, n_theta=512, n_phi=1024):
    """Minimum of S(AB|{B_k}) on a dense angle grid via explicit projectors.

    For every direction the projectors P_+- = (I +- n.sigma)/2 are applied
    to B, the unnormalized A states Tr_B[(I x P) rho] are formed and their
    2x2 spectra taken in closed form.
    """
    theta = np.linspace(0.0, np.pi, n_theta)
    phi = np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    n = np.stack([np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1)
    sx = np.array([[0, 1], [1, 0]], complex)
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.array([[1, 0], [0, -1]], complex)
    ns = np.einsum("...i,ijk->...jk", n, np.stack([sx, sy, sz]))
    t = np.asarray(rho, dtype=complex).reshape(2, 2, 2, 2)
    total = np.zeros(tt.shape)
    for sign in (1.0, -1.0):
        P = 0.5 * (np.eye(2) + sign * ns)
        # Tr_B[(I x P) rho]_{a a'} = sum_{b b'} P_{b' b} rho_{a b, a' b'}
        A = np.einsum("...cb,abxc->...ax", P, t)
        p = np.real(A[..., 0, 0] + A[..., 1, 1])
        det = np.real(A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0])
        disc = np.sqrt(np.maximum(p * p - 4 * det, 0.0))
        for lam in (0.5 * (p + disc), 0.5 * (p - disc)):
            with np.errstate(divide="ignore", invalid="ignore"):
                term = np.where(lam > 1e-14, -lam * np.log2(np.where(lam > 1e-14, lam, 1.0) / np.where(p > 1e-14, p, 1.0)), 0.0)
            total += term
    return float(total.min())


@pytest.fixture
def rng():
    return np.random.default_rng(20120914)
