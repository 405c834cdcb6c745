"""Standard qupit gates used as targets and as Clifford generators."""

from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group

from quditmc.operator_basis import QupitDims

__all__ = ["fourier", "phase_gate", "csum", "on_qupit", "haar_unitary", "is_unitary"]


def fourier(p: int) -> np.ndarray:
    """``F|m> = (1/sqrt p) sum_k omega^{km} |k>``."""
    omega = QupitDims(p, 1).omega
    k = np.arange(p)
    return omega ** np.outer(k, k) / np.sqrt(p)


def phase_gate(p: int) -> np.ndarray:
    """Diagonal Clifford phase gate: ``diag(1, i)`` for qubits and
    ``diag(omega^{m(m-1)/2})`` for odd p, so that ``S X S^dagger = X Z``.

    At p = 3 this is ``diag(1, 1, omega)``.
    """
    m = np.arange(p)
    if p == 2:
        return np.diag([1.0, 1j])
    omega = QupitDims(p, 1).omega
    return np.diag(omega ** ((m * (m - 1) // 2) % p))


def csum(p: int) -> np.ndarray:
    """Two-qupit controlled sum ``|a, b> -> |a, a + b mod p>``."""
    d = p * p
    out = np.zeros((d, d), dtype=complex)
    for a in range(p):
        for b in range(p):
            out[a * p + (a + b) % p, a * p + b] = 1
    return out


def on_qupit(gate: np.ndarray, p: int, n: int, site: int) -> np.ndarray:
    """Embed a single-qupit gate at position ``site`` of ``n`` qupits."""
    if not 0 <= site < n:
        raise ValueError(f"site {site} outside 0..{n - 1}")
    return np.kron(np.kron(np.eye(p**site), gate), np.eye(p ** (n - site - 1)))


def haar_unitary(d: int, rng: np.random.Generator | int | None = None) -> np.ndarray:
    return unitary_group.rvs(d, random_state=rng)


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.allclose(u.conj().T @ u, np.eye(len(u)), atol=tol)
