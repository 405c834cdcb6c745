"""Characteristic functions, relevance distributions and Clifford detection.

Three protocols are supported:

``entanglement``
    Inputs are the basis operators themselves; ``chi_U`` is the table
    ``beta[i, k] = (1/d) Tr[(U W_i U^dagger)^dagger W_k]`` and the
    normalization is ``d^2``.
``two_design``
    Inputs are all ``d(d+1)`` MUB states; ``chi_U[j, k] = Tr[W_k U rho_j U^dagger]``
    and the normalization is ``d^2 (d+1)``.
``classical``
    Inputs are the ``2d`` states of two MUBs; normalization ``T d = 2 d^2``.

In every case ``sum_ik P(i,k) X(i,k)`` with ``X = chi_D / chi_U`` is the
quantity being estimated (``F_e``, ``F_av`` and ``(F1 + F2)/2`` respectively).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from quditmc import _io
from quditmc.channels import Channel
from quditmc.mub import MubSet
from quditmc.operator_basis import OperatorBasis, QupitDims, hermitized_pairs
from quditmc.oracle import characteristic_matrices

__all__ = [
    "PROTOCOLS",
    "CharacteristicTable",
    "RelevanceDistribution",
    "CliffordMap",
    "NotClifford",
    "HermitizedRelevance",
    "characteristic_table",
    "relevance_distribution",
    "clifford_map",
    "hermitized_action",
    "hermitized_relevance",
    "draws_for",
    "shots_for",
    "expected_experiments",
    "shot_bound",
    "write_distribution_csv",
    "clifford_map_to_json",
    "clifford_map_from_json",
]

PROTOCOLS = ("entanglement", "two_design", "classical")
#: Events with |chi_U| at or below this are treated as outside the support.
SUPPORT_TOL = 1e-9
CLIFFORD_TOL = 1e-9


@dataclass(frozen=True)
class CharacteristicTable:
    protocol: str
    chi_u: np.ndarray
    chi_d: np.ndarray | None
    input_kind: str
    d: int
    #: input states (rows) for state protocols
    states: np.ndarray | None = None

    @property
    def T(self) -> int:
        return self.chi_u.shape[0]


def _mub_inputs(protocol: str, mubs: MubSet | None, classical_pair: tuple[int, int]) -> np.ndarray:
    if mubs is None:
        raise ValueError(f"protocol '{protocol}' needs a MUB set")
    if protocol == "two_design":
        return mubs.states()
    a, b = classical_pair
    return np.concatenate([mubs.bases[a].T, mubs.bases[b].T])


def characteristic_table(
    protocol: str,
    target_u: np.ndarray,
    channel: Channel | None,
    basis: OperatorBasis,
    mubs: MubSet | None = None,
    classical_pair: tuple[int, int] = (0, 1),
) -> CharacteristicTable:
    """Ideal (and, given a channel, actual) characteristic functions.

    ``channel=None`` skips ``chi_D``.
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol '{protocol}', expected one of {PROTOCOLS}")
    u = np.asarray(target_u, dtype=complex)
    d = basis.d
    if protocol == "entanglement":
        if channel is None:
            ops = basis.ops
            ideal = (u @ ops @ u.conj().T).reshape(len(ops), -1)
            beta = ideal.conj() @ ops.reshape(len(ops), -1).T / d
            return CharacteristicTable(protocol, beta, None, "operators", d)
        alpha, beta = characteristic_matrices(channel, u, basis)
        return CharacteristicTable(protocol, beta, alpha, "operators", d)
    states = _mub_inputs(protocol, mubs, classical_pair)
    if states.shape[1] != d:
        raise ValueError("MUB dimension does not match the basis")
    ideal = states @ u.T
    # chi[j, k] = Tr[W_k |v><v|] = <v| W_k |v>
    chi_u = np.einsum("si,kij,sj->sk", ideal.conj(), basis.ops, ideal)
    chi_d = None
    if channel is not None:
        rhos = channel(np.einsum("si,sj->sij", states, states.conj()))
        chi_d = np.einsum("kij,sji->sk", basis.ops, rhos)
    return CharacteristicTable(protocol, chi_u, chi_d, "states", d, states)


def _normalization(protocol: str, d: int, T: int) -> int:
    if protocol == "entanglement":
        return d * d
    return T * d


@dataclass(frozen=True)
class RelevanceDistribution:
    protocol: str
    probs: np.ndarray
    normalization: int
    support: np.ndarray  # (n, 2) event indices (i, k) in row-major order
    uniform: bool
    table: CharacteristicTable

    @property
    def support_probs(self) -> np.ndarray:
        return self.probs[self.support[:, 0], self.support[:, 1]]


def relevance_distribution(table: CharacteristicTable) -> RelevanceDistribution:
    norm = _normalization(table.protocol, table.d, table.T)
    probs = np.abs(table.chi_u) ** 2 / norm
    total = probs.sum()
    if abs(total - 1) > 1e-8:
        raise ValueError(f"relevance distribution sums to {total:.12g} (inconsistent table)")
    support = np.argwhere(np.abs(table.chi_u) > SUPPORT_TOL)
    if len(support) == 0:
        raise ValueError("empty support")
    vals = probs[support[:, 0], support[:, 1]]
    uniform = bool(vals.max() - vals.min() <= 1e-10)
    return RelevanceDistribution(table.protocol, probs, norm, support, uniform, table)


# --- Clifford maps ---------------------------------------------------------


def _root_order(p: int) -> int:
    # qubit conjugation phases include +-i because XZ = -i sigma_y
    return 4 if p == 2 else p


@dataclass(frozen=True)
class CliffordMap:
    """``U W_k U^dagger = exp(2 pi i exponents[k] / root_order) W_{images[k]}``."""

    images: tuple[int, ...]
    exponents: tuple[int, ...]
    root_order: int
    dims: QupitDims

    def __bool__(self) -> bool:
        return True

    def phase(self, k: int) -> complex:
        return complex(np.exp(2j * np.pi * self.exponents[k] / self.root_order))

    @property
    def phases(self) -> np.ndarray:
        return np.exp(2j * np.pi * np.array(self.exponents) / self.root_order)

    def compose(self, inner: CliffordMap) -> CliffordMap:
        """Map of ``U_self U_inner``."""
        images = tuple(self.images[t] for t in inner.images)
        exps = tuple((inner.exponents[k] + self.exponents[inner.images[k]]) % self.root_order for k in range(len(images)))
        return CliffordMap(images, exps, self.root_order, self.dims)

    def inverse_image(self) -> tuple[int, ...]:
        inv = [0] * len(self.images)
        for k, t in enumerate(self.images):
            inv[t] = k
        return tuple(inv)


@dataclass(frozen=True)
class NotClifford:
    """Verdict for a unitary that does not map the basis onto itself; the
    residual is the worst ``|c - omega^a|`` over operators, at ``worst_k``."""

    residual: float
    worst_k: int

    def __bool__(self) -> bool:
        return False


def clifford_map(target_u: np.ndarray, basis: OperatorBasis, tol: float = CLIFFORD_TOL) -> CliffordMap | NotClifford:
    """Conjugation table of ``U`` on a unitary basis, or a :class:`NotClifford` verdict."""
    u = np.asarray(target_u, dtype=complex)
    r = _root_order(basis.dims.p)
    roots = np.exp(2j * np.pi * np.arange(r) / r)
    ops = basis.ops
    conj = (u @ ops @ u.conj().T).reshape(len(ops), -1)
    coeffs = conj @ ops.reshape(len(ops), -1).conj().T / basis.d  # [k, i] = (1/d) Tr[W_i^+ U W_k U^+]
    images, exps = [], []
    worst, worst_k = 0.0, 0
    for k, row in enumerate(coeffs):
        i = int(np.argmax(np.abs(row)))
        a = int(np.argmin(np.abs(roots - row[i])))
        res = float(abs(row[i] - roots[a]))
        if res > worst:
            worst, worst_k = res, k
        images.append(i)
        exps.append(a)
    if worst > tol or len(set(images)) != len(images):
        return NotClifford(worst, worst_k)
    return CliffordMap(tuple(images), tuple(exps), r, basis.dims)


def clifford_map_to_json(cmap: CliffordMap) -> dict:
    return {
        "format": "quditmc.clifford_map",
        "p": cmap.dims.p,
        "n": cmap.dims.n,
        "root_order": cmap.root_order,
        "table": [{"k": k, "image": t, "exponent": a} for k, (t, a) in enumerate(zip(cmap.images, cmap.exponents))],
    }


CLIFFORD_SCHEMA = {
    "type": "object",
    "required": ["format", "p", "n", "root_order", "table"],
    "properties": {
        "format": {"const": "quditmc.clifford_map"},
        "root_order": {"type": "integer", "minimum": 1},
        "table": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["k", "image", "exponent"],
                "properties": {f: {"type": "integer", "minimum": 0} for f in ("k", "image", "exponent")},
            },
        },
    },
}


def clifford_map_from_json(doc: dict) -> CliffordMap:
    _io.validate(doc, CLIFFORD_SCHEMA)
    rows = sorted(doc["table"], key=lambda r: r["k"])
    return CliffordMap(
        tuple(r["image"] for r in rows), tuple(r["exponent"] for r in rows), doc["root_order"], QupitDims(doc["p"], doc["n"])
    )


# --- Hermitized bases ------------------------------------------------------


def _slots(hbasis: OperatorBasis) -> dict[int, tuple[int, int, complex]]:
    """Parent index -> (H slot, orientation, extra phase) so that
    ``W_parent = phase * U`` (orientation +1) or ``phase * U^dagger`` (-1),
    with U the source of the slot."""
    out = {0: (0, 1, 1.0)}
    for idx, (i, j, c) in enumerate(hermitized_pairs(hbasis.parent)):
        slot = 1 + 2 * idx
        if hbasis.sources[slot] != i:
            raise ValueError("Hermitized basis does not follow its parent's pair order")
        out[i] = (slot, 1, 1.0)
        out[j] = (slot, -1, complex(np.conj(c)))
    return out


def hermitized_action(cmap: CliffordMap, hbasis: OperatorBasis, i: int) -> tuple[tuple[int, float], tuple[int, float]]:
    """``C Ht_i C^dagger = c1 Ht_{k1} + c2 Ht_{k2}`` as ``((k1, c1), (k2, c2))``.

    ``k1`` is the operator of the same kind as ``Ht_i``, ``k2`` the partner of
    the other kind.  For the identity both entries point at index 0 with
    coefficients 1 and 0.
    """
    if not hbasis.hermitized or hbasis.parent is None:
        raise ValueError("not a Hermitized basis")
    if i == 0:
        return (0, 1.0), (0, 0.0)
    slots = _slots(hbasis)
    src = hbasis.sources[i]
    t = cmap.images[src]
    slot, orient, extra = slots[t]
    gamma = cmap.phase(src) * extra
    re, im = float(gamma.real), float(gamma.imag)
    h, hbar = slot, slot + 1
    if hbasis.kinds[i] == "H":
        return ((h, orient * re), (hbar, im))
    return ((hbar, re), (h, -orient * im))


@dataclass(frozen=True)
class HermitizedRelevance:
    """Per input ``i``: like-kind output, cross-kind output and their
    probabilities (Re^2 and Im^2 of the conjugation phase), plus the signed
    coefficients that play the role of ``beta``."""

    like: np.ndarray
    cross: np.ndarray
    p_like: np.ndarray
    p_cross: np.ndarray
    c_like: np.ndarray
    c_cross: np.ndarray

    def dense(self) -> np.ndarray:
        """Full ``P(i, k)`` including the uniform ``1/d^2`` first stage."""
        n = len(self.like)
        out = np.zeros((n, n))
        rows = np.arange(n)
        out[rows, self.like] += self.p_like / n
        out[rows, self.cross] += self.p_cross / n
        return out


def hermitized_relevance(cmap: CliffordMap | NotClifford, hbasis: OperatorBasis) -> HermitizedRelevance:
    if not cmap:
        raise ValueError("two-stage sampling needs a Clifford target")
    n = len(hbasis)
    like = np.zeros(n, dtype=int)
    cross = np.zeros(n, dtype=int)
    c_like = np.zeros(n)
    c_cross = np.zeros(n)
    for i in range(n):
        (k1, c1), (k2, c2) = hermitized_action(cmap, hbasis, i)
        like[i], cross[i], c_like[i], c_cross[i] = k1, k2, c1, c2
    return HermitizedRelevance(like, cross, c_like**2, c_cross**2, c_like, c_cross)


# --- sample counts -----------------------------------------------------------


def draws_for(epsilon, delta) -> int:
    """``L = ceil(1 / (eps^2 delta))`` in exact rational arithmetic on the
    decimal representation of the inputs."""
    e, dl = Fraction(str(epsilon)), Fraction(str(delta))
    if not (e > 0 and 0 < dl < 1):
        raise ValueError("need epsilon > 0 and 0 < delta < 1")
    return math.ceil(1 / (e * e * dl))


def shots_for(beta_abs2, L: int, epsilon: float, delta: float) -> np.ndarray:
    """``m = ceil(4 ln(4/delta) / (|beta|^2 L eps^2))`` elementwise, at least 1."""
    raw = 4 * math.log(4 / delta) / (np.asarray(beta_abs2, dtype=float) * L * epsilon**2)
    # relative slack so float noise on exact integers (|beta| = 1) does not bump the ceiling
    return np.maximum(1, np.ceil(raw * (1 - 1e-12))).astype(np.int64)


def expected_experiments(dist: RelevanceDistribution, epsilon: float, delta: float) -> float:
    """Expected total shots over the L draws, ``L * sum_ik P(i,k) m(i,k)``."""
    L = draws_for(epsilon, delta)
    s = dist.support
    beta2 = np.abs(dist.table.chi_u[s[:, 0], s[:, 1]]) ** 2
    return float(L * np.sum(dist.support_probs * shots_for(beta2, L, epsilon, delta)))


def shot_bound(epsilon: float, delta: float, d: int = 1) -> float:
    """``1 + 1/(eps^2 delta) + (4 d^2/eps^2) ln(4/delta)``; ``d = 1`` is the Clifford bound."""
    return 1 + 1 / (epsilon**2 * delta) + 4 * d**2 / epsilon**2 * math.log(4 / delta)


def write_distribution_csv(dist: RelevanceDistribution, path: str | Path, full: bool = False) -> None:
    """Rows ``i, k, Re chi, Im chi, P`` for the support (or every event)."""
    events = np.argwhere(np.ones_like(dist.probs, dtype=bool)) if full else dist.support
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "k", "re_chi", "im_chi", "p"])
        for i, k in events:
            chi = dist.table.chi_u[i, k]
            w.writerow([int(i), int(k), repr(float(chi.real)), repr(float(chi.imag)), repr(float(dist.probs[i, k]))])
