"""Exact fidelities by brute force, used as ground truth for the estimators."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from quditmc.channels import Channel
from quditmc.mub import MubSet
from quditmc.operator_basis import OperatorBasis

__all__ = [
    "characteristic_matrices",
    "entanglement_fidelity",
    "entanglement_fidelity_kraus",
    "average_fidelity",
    "fav_from_fe",
    "average_fidelity_2design",
    "ClassicalFidelities",
    "classical_fidelities",
    "state_fidelities",
    "process_purity",
]

IMAG_TOL = 1e-9


def _check(channel: Channel, u: np.ndarray, d: int) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (d, d) or channel.d != d:
        raise ValueError(f"dimension mismatch: channel {channel.d}, target {u.shape}, basis {d}")
    if np.abs(u.conj().T @ u - np.eye(d)).max() > 1e-10:
        raise ValueError("target is not unitary")
    return u


def characteristic_matrices(channel: Channel, u: np.ndarray, basis: OperatorBasis) -> tuple[np.ndarray, np.ndarray]:
    """``alpha[i, k] = (1/d) Tr[D(W_i)^dagger W_k]`` and
    ``beta[i, k] = (1/d) Tr[(U W_i U^dagger)^dagger W_k]``."""
    u = _check(channel, u, basis.d)
    d, ops = basis.d, basis.ops
    flat = ops.reshape(len(ops), -1)
    actual = channel(ops).reshape(len(ops), -1)
    ideal = (u @ ops @ u.conj().T).reshape(len(ops), -1)
    alpha = actual.conj() @ flat.T / d
    beta = ideal.conj() @ flat.T / d
    return alpha, beta


def _real(x: complex, what: str) -> float:
    if abs(x.imag) > IMAG_TOL:
        raise ArithmeticError(f"{what} has imaginary residue {x.imag:.3e}")
    return float(x.real)


def entanglement_fidelity(channel: Channel, u: np.ndarray, basis: OperatorBasis) -> float:
    """``F_e = (1/d^2) sum_ik alpha_ik beta_ik^*``."""
    alpha, beta = characteristic_matrices(channel, u, basis)
    return _real(complex(np.sum(alpha * beta.conj())) / basis.d**2, "F_e")


def entanglement_fidelity_kraus(channel: Channel, u: np.ndarray) -> float:
    """Independent route ``(1/d^2) sum_m |Tr[U^dagger K_m]|^2``."""
    u = _check(channel, u, channel.d)
    tr = np.einsum("ji,mji->m", u.conj(), channel.kraus)
    return float(np.sum(np.abs(tr) ** 2) / channel.d**2)


def fav_from_fe(fe: float, d: int) -> float:
    return (d * fe + 1) / (d + 1)


def average_fidelity(channel: Channel, u: np.ndarray, basis: OperatorBasis) -> float:
    return fav_from_fe(entanglement_fidelity(channel, u, basis), basis.d)


def state_fidelities(channel: Channel, u: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """``Tr[U rho U^dagger D(rho)]`` for each pure state ``rho = |v><v|`` (rows of ``vectors``)."""
    vectors = np.asarray(vectors, dtype=complex)
    rhos = np.einsum("si,sj->sij", vectors, vectors.conj())
    out = channel(rhos)
    ideal = vectors @ u.T  # rows U|v>
    vals = np.einsum("si,sij,sj->s", ideal.conj(), out, ideal)
    return vals.real


def average_fidelity_2design(channel: Channel, u: np.ndarray, mubs: MubSet) -> float:
    """Mean state fidelity over all d(d+1) states of a complete MUB set."""
    u = _check(channel, u, mubs.d)
    if len(mubs) != mubs.d + 1:
        raise ValueError("need a complete set of d + 1 bases")
    return float(state_fidelities(channel, u, mubs.states()).mean())


class ClassicalFidelities(NamedTuple):
    """``lower``/``upper`` bracket the entanglement fidelity; ``fav_lower``/
    ``fav_upper`` are the same interval mapped to the average fidelity."""

    f1: float
    f2: float
    lower: float
    upper: float
    fav_lower: float
    fav_upper: float

    def contains_fav(self, fav: float, tol: float = 1e-9) -> bool:
        return self.fav_lower - tol <= fav <= self.fav_upper + tol

    def contains_fe(self, fe: float, tol: float = 1e-9) -> bool:
        return self.lower - tol <= fe <= self.upper + tol


def classical_fidelities(channel: Channel, u: np.ndarray, basis_a: np.ndarray, basis_b: np.ndarray) -> ClassicalFidelities:
    """State-fidelity averages over two mutually unbiased bases (columns).

    ``[F1 + F2 - 1, min(F1, F2)]`` holds the entanglement fidelity; pushing
    both ends through ``(d F + 1)/(d + 1)`` gives the interval for ``F_av``.
    """
    basis_a, basis_b = np.asarray(basis_a, dtype=complex), np.asarray(basis_b, dtype=complex)
    d = basis_a.shape[0]
    u = _check(channel, u, d)
    if np.abs(np.abs(basis_a.conj().T @ basis_b) - 1 / np.sqrt(d)).max() > 1e-10:
        raise ValueError("the two bases are not mutually unbiased")
    f1 = float(state_fidelities(channel, u, basis_a.T).mean())
    f2 = float(state_fidelities(channel, u, basis_b.T).mean())
    lower, upper = f1 + f2 - 1, min(f1, f2)
    return ClassicalFidelities(f1, f2, lower, upper, fav_from_fe(lower, d), fav_from_fe(upper, d))


def process_purity(channel: Channel, basis: OperatorBasis) -> float:
    """``(1/d^4) sum_ik |Tr[W_k^dagger D(W_i)]|^2``, at most 1."""
    d, ops = basis.d, basis.ops
    actual = channel(ops).reshape(len(ops), -1)
    tr = ops.reshape(len(ops), -1).conj() @ actual.T
    return float(np.sum(np.abs(tr) ** 2) / d**4)
