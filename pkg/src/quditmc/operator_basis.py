"""Operator bases for n qupits of prime level p.

Every basis is an ordered stack of d**2 dense d x d matrices ``W_k`` that is
orthonormal under ``(1/d) Tr[A^dagger B]`` with the identity at index 0.  The
module builds the generalized Pauli (Weyl-Heisenberg) basis, its tensor powers,
the Hermitized version and the Gell-Mann basis, partitions a basis into
commuting sets, diagonalizes those sets jointly and places a basis on the A-E
resource hierarchy.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg

from quditmc import _io

TOL = 1e-10
#: Looser threshold for quantities that pass through an eigensolver.
EIG_TOL = 1e-8

__all__ = [
    "BasisError",
    "NonCommutingError",
    "DegenerateSetError",
    "HermitizeError",
    "QupitDims",
    "PartitionResult",
    "SpectralTable",
    "HermitizedPair",
    "HierarchyClass",
    "Witness",
    "OperatorBasis",
    "is_prime",
    "gen_pauli_single",
    "gen_pauli",
    "tensor_basis",
    "partition_commuting",
    "joint_eigenbasis",
    "hermitize",
    "hermitized_pairs",
    "gell_mann_basis",
    "spectral_table",
    "equal_spectra",
    "eigenbases_unbiased",
    "mub_witness",
    "classify_hierarchy",
    "basis_to_json",
    "basis_from_json",
    "save_basis",
    "load_basis",
]


class BasisError(ValueError):
    """A matrix stack violates the operator-basis contract."""


class NonCommutingError(ValueError):
    pass


class DegenerateSetError(ValueError):
    """Joint eigenspaces of a commuting set are not one-dimensional."""


class HermitizeError(ValueError):
    pass


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % q for q in range(2, int(p**0.5) + 1))


@dataclass(frozen=True)
class QupitDims:
    """Register of ``n`` qupits with prime local dimension ``p``."""

    p: int
    n: int = 1

    def __post_init__(self):
        if not isinstance(self.p, (int, np.integer)) or not is_prime(int(self.p)):
            raise ValueError(f"local dimension p={self.p!r} is not prime")
        if int(self.n) < 1:
            raise ValueError(f"number of qupits n={self.n!r} must be >= 1")

    @property
    def d(self) -> int:
        return int(self.p) ** int(self.n)

    @property
    def omega(self) -> complex:
        return np.exp(2j * np.pi / self.p)


@dataclass(frozen=True)
class PartitionResult:
    """Outcome of :func:`partition_commuting`.

    ``sets`` holds basis indices of the non-identity members of each commuting
    set.  ``success`` is true only for the maximal d+1 sets of d-1 operators.
    """

    success: bool
    sets: tuple[tuple[int, ...], ...]
    exhaustive: bool = True

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.sets)

    def set_of(self, k: int) -> int:
        for j, s in enumerate(self.sets):
            if k in s:
                return j
        raise KeyError(k)


@dataclass(frozen=True)
class SpectralTable:
    """Per commuting set j, ``lambdas[j][i, k]`` is the eigenvalue of the i-th set
    operator (row 0 is the identity) on the k-th joint eigenvector."""

    lambdas: np.ndarray
    s: np.ndarray

    def check(self, tol: float = EIG_TOL) -> bool:
        d = self.lambdas.shape[-1]
        for lam in self.lambdas:
            if not np.allclose(lam[0], 1.0, atol=tol):
                return False
            if np.abs(lam[1:].sum(axis=1)).max(initial=0.0) > tol:
                return False
            gram = lam.conj() @ lam.T
            if np.abs(gram - np.diag(np.diag(gram))).max() > tol * d:
                return False
        return True


@dataclass(frozen=True, eq=False)
class HermitizedPair:
    h: np.ndarray
    h_bar: np.ndarray
    source: int


@dataclass(frozen=True)
class HierarchyClass:
    label: str
    evidence: tuple[tuple[str, bool], ...]

    def as_dict(self) -> dict:
        return {"label": self.label, "evidence": {k: bool(v) for k, v in self.evidence}}


@dataclass(frozen=True)
class Witness:
    """Pair of eigenvectors (of two non-commuting basis operators) whose overlap
    deviates most from 1/sqrt(d)."""

    op_a: int
    op_b: int
    vec_a: int
    vec_b: int
    overlap: float
    deviation: float


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    """Orthonormal operator basis; immutable after construction.

    Optional provenance fields: ``factors``/``factor_basis`` for tensor-product
    bases, ``kinds``/``sources``/``parent`` for Hermitized bases.
    """

    dims: QupitDims
    ops: np.ndarray
    labels: tuple[str, ...]
    origin: str = "custom"
    factors: tuple[tuple[int, ...], ...] | None = None
    factor_basis: OperatorBasis | None = None
    kinds: tuple[str, ...] | None = None
    sources: tuple[int, ...] | None = None
    parent: OperatorBasis | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        ops = _freeze(self.ops)
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "labels", tuple(self.labels))
        d = self.dims.d
        if ops.shape != (d * d, d, d):
            raise BasisError(f"expected {d * d} matrices of shape {d}x{d}, got {ops.shape}")
        if len(self.labels) != d * d:
            raise BasisError("one label per operator required")
        if not np.allclose(ops[0], np.eye(d), atol=TOL):
            raise BasisError("index 0 must hold the identity")
        gram = self.gram()
        dev = np.abs(gram - np.eye(d * d)).max()
        if dev > TOL:
            i, k = np.unravel_index(np.argmax(np.abs(gram - np.eye(d * d))), gram.shape)
            raise BasisError(f"not orthonormal: |(1/d)Tr[W_{i}^+ W_{k}] - delta| = {dev:.3e}")

    @property
    def d(self) -> int:
        return self.dims.d

    def __len__(self) -> int:
        return self.ops.shape[0]

    def __getitem__(self, k: int) -> np.ndarray:
        return self.ops[k]

    def gram(self) -> np.ndarray:
        flat = self.ops.reshape(len(self.ops), -1)
        return flat.conj() @ flat.T / self.dims.d

    @cached_property
    def unitary(self) -> bool:
        eye = np.eye(self.d)
        return all(np.allclose(w.conj().T @ w, eye, atol=TOL) for w in self.ops)

    @cached_property
    def hermitian(self) -> bool:
        return bool(np.allclose(self.ops, self.ops.conj().transpose(0, 2, 1), atol=TOL))

    @property
    def tensor_local(self) -> bool:
        return self.dims.n == 1 or self.factors is not None

    @property
    def hermitized(self) -> bool:
        return self.origin == "hermitized"

    @cached_property
    def partition(self) -> PartitionResult:
        return partition_commuting(self)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def coefficients(self, a: np.ndarray) -> np.ndarray:
        """Expansion coefficients ``c_k = (1/d) Tr[W_k^dagger A]``."""
        flat = self.ops.reshape(len(self.ops), -1)
        return flat.conj() @ np.asarray(a, dtype=complex).reshape(-1) / self.d

    def set_eigenbasis(self, j: int) -> np.ndarray:
        """Joint eigenbasis (columns) of commuting set ``j`` of the partition."""
        key = ("set", j)
        if key not in self._cache:
            part = self.partition
            if not part.success:
                raise ValueError("basis has no maximal partition")
            self._cache[key] = joint_eigenbasis([self.ops[i] for i in part.sets[j]])
        return self._cache[key]

    def eigenbasis(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues and orthonormal eigenvectors (columns) used to prepare and
        measure operator ``k``.

        Degeneracies are resolved by the joint eigenbasis of the operator's
        commuting set, or by tensor products of single-qupit eigenvectors.
        """
        key = ("op", k)
        if key in self._cache:
            return self._cache[key]
        w = self.ops[k]
        if k == 0:
            vecs = np.eye(self.d, dtype=complex)
        elif self.hermitized and self.parent is not None:
            vecs = self.parent.eigenbasis(self.sources[k])[1]
        elif self.partition.success:
            vecs = self.set_eigenbasis(self.partition.set_of(k))
        elif self.factors is not None:
            vecs = np.ones((1, 1), dtype=complex)
            for f in self.factors[k]:
                vecs = np.kron(vecs, self.factor_basis.eigenbasis(f)[1])
        elif self.hermitian:
            vecs = _canonical_order([w], np.linalg.eigh(w)[1])
        else:
            _, vecs = scipy.linalg.schur(w, output="complex")
            vecs = _canonical_order([w], vecs)
        vals = np.einsum("ji,jk,ki->i", vecs.conj(), w, vecs)
        if np.abs(w @ vecs - vecs * vals).max() > EIG_TOL:
            raise BasisError(f"eigenbasis for operator {k} does not diagonalize it")
        vals.setflags(write=False)
        vecs = _freeze(vecs)
        self._cache[key] = (vals, vecs)
        return vals, vecs


def _pauli_xz(p: int) -> tuple[np.ndarray, np.ndarray]:
    omega = np.exp(2j * np.pi / p)
    z = np.diag(omega ** np.arange(p))
    x = np.roll(np.eye(p, dtype=complex), 1, axis=0)  # X|m> = |m+1 mod p>
    return x, z


def gen_pauli_single(p: int) -> OperatorBasis:
    """Generalized Pauli basis ``X^a Z^b`` for one qupit, index ``a*p + b``."""
    dims = QupitDims(p, 1)
    x, z = _pauli_xz(p)
    ops, labels = [], []
    for a in range(p):
        for b in range(p):
            ops.append(np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b))
            labels.append(_xz_label(a, b))
    return OperatorBasis(dims, np.array(ops), tuple(labels), origin="pauli")


def _xz_label(a: int, b: int) -> str:
    if a == 0 and b == 0:
        return "I"
    part = lambda s, e: "" if e == 0 else (s if e == 1 else f"{s}{e}")
    return part("X", a) + part("Z", b)


def tensor_basis(base: OperatorBasis, n: int) -> OperatorBasis:
    """All n-fold tensor products of a single-qupit basis, lexicographic order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if base.dims.n != 1:
        raise ValueError("tensor_basis expects a single-qupit basis")
    if n == 1:
        return base
    m = len(base)
    factors = tuple(itertools.product(range(m), repeat=n))
    ops = []
    for idx in factors:
        w = base.ops[idx[0]]
        for f in idx[1:]:
            w = np.kron(w, base.ops[f])
        ops.append(w)
    labels = tuple("⊗".join(base.labels[f] for f in idx) for idx in factors)
    origin = base.origin if base.origin in ("pauli",) else f"tensor[{base.origin}]"
    return OperatorBasis(
        QupitDims(base.dims.p, n), np.array(ops), labels,
        origin=origin, factors=factors, factor_basis=base,
    )


def gen_pauli(p: int, n: int = 1) -> OperatorBasis:
    return tensor_basis(gen_pauli_single(p), n)


def _commutation_graph(ops: np.ndarray, rng_seed: int = 7) -> np.ndarray:
    """Boolean matrix ``c[a, b]`` = ops a and b commute, screened on a random vector."""
    d = ops.shape[-1]
    rng = np.random.default_rng(rng_seed)
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    wv = ops @ v  # (m, d)
    ab = np.einsum("aij,bj->abi", ops, wv)  # W_a W_b v
    diff = np.abs(ab - ab.transpose(1, 0, 2)).max(axis=-1)
    return diff < 1e-8 * max(1.0, np.abs(ab).max())


def _commute(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    return np.abs(a @ b - b @ a).max() < tol


def _greedy_sets(graph: np.ndarray, items: list[int]) -> list[tuple[int, ...]]:
    sets = []
    while items:
        members = [items[0]]
        for c in items[1:]:
            if all(graph[c, m] for m in members):
                members.append(c)
        sets.append(tuple(members))
        taken = set(members)
        items = [u for u in items if u not in taken]
    return sets


class _Budget:
    def __init__(self, nodes: int):
        self.left = nodes

    def spend(self) -> bool:
        self.left -= 1
        return self.left >= 0


def _cliques(graph, clique, cand, size, budget):
    if len(clique) == size:
        yield tuple(clique)
        return
    for n, c in enumerate(cand):
        if len(clique) + len(cand) - n < size or not budget.spend():
            return
        yield from _cliques(graph, clique + [c], [x for x in cand[n + 1:] if graph[c, x]], size, budget)


def _exact_cover(graph, items, size, budget):
    if not items:
        return []
    seed = items[0]
    cand = [c for c in items[1:] if graph[seed, c]]
    for clique in _cliques(graph, [seed], cand, size, budget):
        taken = set(clique)
        rest = _exact_cover(graph, [i for i in items if i not in taken], size, budget)
        if rest is not None:
            return [clique] + rest
        if budget.left < 0:
            return None
    return None


def partition_commuting(basis: OperatorBasis, search_budget: int = 200_000) -> PartitionResult:
    """Group the non-identity operators into d+1 commuting sets of d-1 operators.

    First pass is greedy: each set is seeded by the lowest-index unassigned
    operator and grows with every later unassigned operator that commutes with
    all current members.  When that does not tile the basis (typical for
    n >= 2) a backtracking exact-cover search over commuting cliques, with the
    same lowest-index seeding, takes over.  ``exhaustive`` on the result tells
    whether a failure is definitive or the search budget ran out.
    """
    d = basis.d
    graph = _commutation_graph(basis.ops)
    items = list(range(1, len(basis)))
    sets = _greedy_sets(graph, items)
    ok = lambda ss: len(ss) == d + 1 and all(len(s) == d - 1 for s in ss)
    exhaustive = True
    if not ok(sets):
        budget = _Budget(search_budget)
        found = _exact_cover(graph, items, d - 1, budget)
        exhaustive = budget.left >= 0
        if found is not None:
            sets = found
    success = ok(sets)
    if success:
        # the commutation screen is probabilistic; confirm exactly
        success = all(
            _commute(basis.ops[a], basis.ops[b]) for s in sets for a, b in itertools.combinations(s, 2)
        )
    return PartitionResult(success, tuple(tuple(s) for s in sets), exhaustive)


def _eig_key(vals) -> tuple:
    key = []
    for v in vals:
        ang = float(np.angle(v)) % (2 * np.pi)
        if ang > 2 * np.pi - 1e-9 or abs(v) < 1e-9:
            ang = 0.0
        key.append((round(ang, 8), round(float(abs(v)), 8)))
    return tuple(key)


def _canonical_order(ops, vecs: np.ndarray) -> np.ndarray:
    """Sort eigenvector columns by eigenvalue phase (then modulus) and fix each
    vector's phase so its first non-negligible component is real positive."""
    vals = np.array([np.einsum("ji,jk,ki->i", vecs.conj(), w, vecs) for w in ops])
    order = sorted(range(vecs.shape[1]), key=lambda c: _eig_key(vals[:, c]))
    vecs = vecs[:, order].copy()
    for c in range(vecs.shape[1]):
        col = vecs[:, c]
        lead = np.flatnonzero(np.abs(col) > 1e-6)[0]
        vecs[:, c] = col * np.exp(-1j * np.angle(col[lead]))
    return vecs


def joint_eigenbasis(ops) -> np.ndarray:
    """Orthonormal vectors (columns) diagonalizing every operator in ``ops``.

    Raises:
        NonCommutingError: some pair of operators does not commute.
        DegenerateSetError: the set does not fix a unique basis (e.g. it is not
            a full commuting set).
    """
    ops = [np.asarray(w, dtype=complex) for w in ops]
    if not ops:
        raise ValueError("empty operator set")
    for (ia, a), (ib, b) in itertools.combinations(enumerate(ops), 2):
        if not _commute(a, b):
            raise NonCommutingError(f"operators {ia} and {ib} do not commute")
    rng = np.random.default_rng(20240611)
    coeffs = rng.normal(size=len(ops)) + 1j * rng.normal(size=len(ops))
    m = sum(c * w for c, w in zip(coeffs, ops))
    _, vecs = scipy.linalg.schur(m, output="complex")
    for w in ops:
        off = vecs.conj().T @ w @ vecs
        if np.abs(off - np.diag(np.diag(off))).max() > EIG_TOL:
            raise DegenerateSetError("set is not jointly diagonalized by a unique basis")
    vals = np.array([np.einsum("ji,jk,ki->i", vecs.conj(), w, vecs) for w in ops])
    keys = [tuple(np.round(vals[:, c], 7)) for c in range(vals.shape[1])]
    if len(set(keys)) != len(keys):
        raise DegenerateSetError(
            f"joint eigenvalues repeat: {len(keys) - len(set(keys))} degenerate direction(s)"
        )
    return _canonical_order(ops, vecs)


def hermitized_pairs(basis: OperatorBasis) -> list[tuple[int, int, complex]]:
    """Conjugate pairs ``(i, j, c)`` with ``W_i^dagger = c W_j``, i < j."""
    if not basis.unitary:
        raise HermitizeError("Hermitization needs a unitary basis")
    seen: set[int] = set()
    pairs = []
    for i in range(1, len(basis)):
        if i in seen:
            continue
        coeff = basis.coefficients(basis.ops[i].conj().T)
        j = int(np.argmax(np.abs(coeff)))
        if abs(abs(coeff[j]) - 1) > 1e-9:
            raise HermitizeError(f"adjoint of operator {i} is not in the basis up to phase")
        if j == i:
            raise HermitizeError(f"operator {i} is Hermitian up to phase; H would vanish")
        seen.update((i, j))
        pairs.append((i, j, complex(coeff[j])))
    return pairs


def hermitize(basis: OperatorBasis) -> OperatorBasis:
    """Hermitian basis from a unitary one: each conjugate pair {U, U^dagger}
    becomes ``H = (U - U^dagger)/(sqrt(2) i)`` and ``Hbar = (U + U^dagger)/sqrt(2)``.

    Output order is ``[I, H_1, Hbar_1, H_2, Hbar_2, ...]`` following the
    lowest index of each pair.
    """
    if basis.dims.p == 2:
        raise HermitizeError("p = 2 is not Hermitized (H would vanish; the qubit Paulis are already Hermitian)")
    if not basis.unitary:
        raise HermitizeError("Hermitization needs a unitary basis")
    ops = [np.eye(basis.d, dtype=complex)]
    labels, kinds, sources = ["I"], ["I"], [0]
    for i, _, _ in hermitized_pairs(basis):
        u = basis.ops[i]
        ud = u.conj().T
        ops.append((u - ud) / (np.sqrt(2) * 1j))
        ops.append((u + ud) / np.sqrt(2))
        labels += [f"H[{basis.labels[i]}]", f"Hbar[{basis.labels[i]}]"]
        kinds += ["H", "Hbar"]
        sources += [i, i]
    return OperatorBasis(
        basis.dims, np.array(ops), tuple(labels), origin="hermitized",
        kinds=tuple(kinds), sources=tuple(sources), parent=basis,
    )


def pair_of(hbasis: OperatorBasis, k: int) -> HermitizedPair:
    """The (H, Hbar) pair that operator ``k`` of a Hermitized basis belongs to."""
    if not hbasis.hermitized or k == 0:
        raise ValueError("not a Hermitized operator")
    first = k if hbasis.kinds[k] == "H" else k - 1
    return HermitizedPair(hbasis.ops[first], hbasis.ops[first + 1], hbasis.sources[k])


def gell_mann_basis() -> OperatorBasis:
    """Identity plus the eight SU(3) generators, scaled to unit norm."""
    lam = np.zeros((8, 3, 3), dtype=complex)
    for sym, (a, b) in zip((0, 3, 5), [(0, 1), (0, 2), (1, 2)]):
        lam[sym][a, b] = lam[sym][b, a] = 1
        lam[sym + 1][a, b], lam[sym + 1][b, a] = -1j, 1j
    lam[2] = np.diag([1, -1, 0])
    lam[7] = np.diag([1, 1, -2]) / np.sqrt(3)
    ops = np.concatenate([np.eye(3)[None], lam * np.sqrt(1.5)])
    labels = ("I",) + tuple(f"L{k}" for k in range(1, 9))
    return OperatorBasis(QupitDims(3, 1), ops, labels, origin="gellmann")


def spectral_table(basis: OperatorBasis) -> SpectralTable:
    part = basis.partition
    if not part.success:
        raise ValueError("spectral table needs a maximal partition")
    d = basis.d
    tables = []
    for j, members in enumerate(part.sets):
        vecs = basis.set_eigenbasis(j)
        rows = [np.ones(d, dtype=complex)]
        rows += [np.einsum("ji,jk,ki->i", vecs.conj(), basis.ops[i], vecs) for i in members]
        tables.append(rows)
    s = np.array([sum(range(k, d + 1)) for k in range(1, d + 1)])
    return SpectralTable(np.array(tables), s)


def _spectrum_signature(vals) -> tuple:
    """Sorted spectrum modulo a global phase (minimum over rotations that make
    one eigenvalue real positive)."""
    vals = np.asarray(vals, dtype=complex)
    rotations = [1.0] + [np.exp(-1j * np.angle(v)) for v in vals if abs(v) > 1e-9]
    sigs = []
    for r in rotations:
        sigs.append(tuple(sorted((round(float(z.real), 7) + 0.0, round(float(z.imag), 7) + 0.0) for z in vals * r)))
    return min(sigs)


def equal_spectra(basis: OperatorBasis) -> bool:
    """Whether all commuting sets carry the same multiset of operator spectra,
    each spectrum taken up to a global phase.

    This is the ordering-independent form of "all lambda^j equal".
    """
    table = spectral_table(basis)
    sigs = {tuple(sorted(_spectrum_signature(row) for row in lam[1:])) for lam in table.lambdas}
    return len(sigs) == 1


def eigenbases_unbiased(basis: OperatorBasis, tol: float = TOL) -> bool:
    part = basis.partition
    if not part.success:
        return False
    target = 1 / np.sqrt(basis.d)
    vecs = [basis.set_eigenbasis(j) for j in range(len(part.sets))]
    for a, b in itertools.combinations(vecs, 2):
        if np.abs(np.abs(a.conj().T @ b) - target).max() > tol:
            return False
    return True


def mub_witness(basis: OperatorBasis) -> Witness | None:
    """Largest departure from mutual unbiasedness between eigenbases of
    non-commuting basis operators, or None if every operator commutes."""
    d = basis.d
    target = 1 / np.sqrt(d)
    best = None
    for a, b in itertools.combinations(range(1, len(basis)), 2):
        if _commute(basis.ops[a], basis.ops[b]):
            continue
        ov = np.abs(basis.eigenbasis(a)[1].conj().T @ basis.eigenbasis(b)[1])
        dev = np.abs(ov - target)
        r, c = np.unravel_index(np.argmax(dev), dev.shape)
        if best is None or dev[r, c] > best.deviation:
            best = Witness(a, b, int(r), int(c), float(ov[r, c]), float(dev[r, c]))
    return best


def _maximal(basis: OperatorBasis) -> tuple[bool, bool, bool]:
    part = basis.partition.success
    mub = part and eigenbases_unbiased(basis, tol=EIG_TOL)
    lam = mub and equal_spectra(basis)
    return part, mub, lam


def classify_hierarchy(basis: OperatorBasis) -> HierarchyClass:
    """Place a basis on the A-E hierarchy of resource scaling.

    D: unitary, maximal partition, unbiased joint eigenbases, equal spectra.
    E: Hermitization of a class-D basis.  C: other Hermitian bases with those
    properties.  B: Hermitian tensor-product bases whose single-qupit factor
    has them but the multi-qupit basis does not.  A: everything else.
    """
    gram_dev = np.abs(basis.gram() - np.eye(len(basis))).max()
    if gram_dev > TOL:
        raise BasisError("basis is not orthonormal")
    part, mub, lam = _maximal(basis)
    evidence = [
        ("orthonormal", True),
        ("unitary", basis.unitary),
        ("hermitian", basis.hermitian),
        ("tensor_local", basis.tensor_local),
        ("maximal_partition", part),
        ("unbiased_eigenbases", mub),
        ("equal_spectra", lam),
    ]
    label = "A"
    if part and mub and lam:
        if basis.unitary:
            label = "D"
        elif basis.hermitian:
            from_d = basis.hermitized and basis.parent is not None and classify_hierarchy(basis.parent).label == "D"
            evidence.append(("hermitized_from_D", from_d))
            label = "E" if from_d else "C"
    elif basis.hermitian and basis.factors is not None and basis.factor_basis is not None:
        single = all(_maximal(basis.factor_basis))
        evidence.append(("single_qupit_maximal", single))
        if single:
            label = "B"
    return HierarchyClass(label, tuple((k, bool(v)) for k, v in evidence))


# --- .basis.json --------------------------------------------------------------

BASIS_SCHEMA = {
    "type": "object",
    "required": ["format", "p", "n", "ops", "labels", "origin"],
    "properties": {
        "format": {"const": "quditmc.basis"},
        "p": {"type": "integer", "minimum": 2},
        "n": {"type": "integer", "minimum": 1},
        "origin": {"type": "string"},
        "labels": {"type": "array", "items": {"type": "string"}},
        "ops": {"type": "array", "items": _io.MATRIX, "minItems": 1},
        "flags": {"type": "object"},
        "partition": {"type": ["array", "null"], "items": {"type": "array", "items": {"type": "integer"}}},
        "factors": {"type": ["array", "null"]},
        "kinds": {"type": ["array", "null"], "items": {"enum": ["I", "H", "Hbar"]}},
        "sources": {"type": ["array", "null"], "items": {"type": "integer"}},
        "parent": {"type": ["object", "null"]},
        "factor_basis": {"type": ["object", "null"]},
        "classification": {"type": ["object", "null"]},
    },
}


def basis_to_json(basis: OperatorBasis, classification: HierarchyClass | None = None) -> dict:
    part = basis.partition
    return {
        "format": "quditmc.basis",
        "p": int(basis.dims.p),
        "n": int(basis.dims.n),
        "origin": basis.origin,
        "labels": list(basis.labels),
        "flags": {
            "unitary": basis.unitary,
            "hermitian": basis.hermitian,
            "tensor_local": basis.tensor_local,
        },
        "partition": [list(s) for s in part.sets] if part.success else None,
        "factors": [list(f) for f in basis.factors] if basis.factors is not None else None,
        "factor_basis": basis_to_json(basis.factor_basis) if basis.factor_basis is not None else None,
        "kinds": list(basis.kinds) if basis.kinds is not None else None,
        "sources": list(basis.sources) if basis.sources is not None else None,
        "parent": basis_to_json(basis.parent) if basis.parent is not None else None,
        "classification": classification.as_dict() if classification is not None else None,
        "ops": _io.encode_array(basis.ops),
    }


def basis_from_json(doc: dict) -> OperatorBasis:
    _io.validate(doc, BASIS_SCHEMA)
    dims = QupitDims(doc["p"], doc["n"])
    fb = doc.get("factor_basis")
    parent = doc.get("parent")
    basis = OperatorBasis(
        dims,
        _io.decode_array(doc["ops"]),
        tuple(doc["labels"]),
        origin=doc["origin"],
        factors=tuple(tuple(f) for f in doc["factors"]) if doc.get("factors") else None,
        factor_basis=basis_from_json(fb) if fb else None,
        kinds=tuple(doc["kinds"]) if doc.get("kinds") else None,
        sources=tuple(doc["sources"]) if doc.get("sources") else None,
        parent=basis_from_json(parent) if parent else None,
    )
    stored = doc.get("partition")
    if stored is not None and [list(s) for s in basis.partition.sets] != stored:
        raise BasisError("stored partition does not match the recomputed one")
    return basis


def save_basis(basis: OperatorBasis, path: str | Path, classification: HierarchyClass | None = None) -> None:
    _io.dump_json(basis_to_json(basis, classification), path)


def load_basis(path: str | Path) -> OperatorBasis:
    return basis_from_json(_io.load_json(path))
