"""Mutually unbiased bases and the unitaries that move between them.

A :class:`MubSet` stores ``d + 1`` orthonormal bases as a ``(d+1, d, d)``
array whose ``[j][:, k]`` column is the k-th vector of basis j.  Sets come
either from the joint eigenbases of a partitioned operator basis or, for a
single odd-prime qupit, from the closed-form construction anchored on the
computational basis.

The basis-change family ``U_delta = sum_k |psi^{j+delta}_{pi(k)}><psi^j_k|``
is built by :func:`u_delta`.  Whether it really shifts *every* basis by delta
depends on how the set is indexed and phased, so nothing here assumes it:
:func:`verify_proposition1` and :func:`verify_group_law` measure it, and
:func:`arrange_for_shift` re-indexes a set along a Clifford orbit when such
an orbit exists.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from quditmc import _io
from quditmc.gates import csum, fourier, on_qupit, phase_gate
from quditmc.operator_basis import TOL, OperatorBasis, QupitDims, gen_pauli, is_prime

__all__ = [
    "MubError",
    "MubSet",
    "BasisChange",
    "ShiftReport",
    "GroupLawReport",
    "mubs_from_partition",
    "mubs_explicit",
    "mubs_equivalent",
    "u_delta",
    "verify_proposition1",
    "verify_group_law",
    "mub_permutation",
    "clifford_permutations",
    "permutation_cycles",
    "arrange_for_shift",
    "mub_to_json",
    "mub_from_json",
    "save_mubs",
    "load_mubs",
]

#: Two unit vectors are "equal up to phase" when their overlap modulus is this close to 1.
MATCH_TOL = 1e-9


class MubError(ValueError):
    pass


def _freeze(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MubSet:
    """d + 1 pairwise mutually unbiased orthonormal bases (validated)."""

    dims: QupitDims
    bases: np.ndarray
    origin: str = "custom"

    def __post_init__(self):
        bases = _freeze(self.bases)
        object.__setattr__(self, "bases", bases)
        d = self.dims.d
        if bases.shape != (d + 1, d, d):
            raise MubError(f"expected {d + 1} bases of {d} vectors in dimension {d}, got shape {bases.shape}")
        for j, b in enumerate(bases):
            dev = np.abs(b.conj().T @ b - np.eye(d)).max()
            if dev > TOL:
                raise MubError(f"basis {j} is not orthonormal (deviation {dev:.3e})")
        dev, where = self._unbiased_deviation()
        if dev > TOL:
            raise MubError(f"bases {where[0]} and {where[1]} are not unbiased: overlap modulus off 1/sqrt(d) by {dev:.3e}")

    @property
    def d(self) -> int:
        return self.dims.d

    def __len__(self) -> int:
        return len(self.bases)

    def __getitem__(self, j: int) -> np.ndarray:
        return self.bases[j]

    def vector(self, j: int, k: int) -> np.ndarray:
        return self.bases[j][:, k]

    def states(self) -> np.ndarray:
        """All d(d+1) vectors as rows, basis-major."""
        return self.bases.transpose(0, 2, 1).reshape(-1, self.d)

    def _unbiased_deviation(self) -> tuple[float, tuple[int, int]]:
        target = 1 / math.sqrt(self.d)
        worst, where = 0.0, (0, 0)
        for a, b in itertools.combinations(range(len(self.bases)), 2):
            dev = np.abs(np.abs(self.bases[a].conj().T @ self.bases[b]) - target).max()
            if dev > worst:
                worst, where = float(dev), (a, b)
        return worst, where

    def max_overlap_deviation(self) -> float:
        return self._unbiased_deviation()[0]

    def locate(self, v: np.ndarray) -> tuple[int, int, float]:
        """Best matching (basis, vector, overlap modulus) for a unit vector."""
        ov = np.abs(np.einsum("jik,i->jk", self.bases.conj(), v))
        j, k = np.unravel_index(np.argmax(ov), ov.shape)
        return int(j), int(k), float(ov[j, k])


@dataclass(frozen=True)
class BasisChange:
    """``matrix`` sends basis ``source`` to basis ``source + delta`` with the
    vector relabelling ``perm`` (identity for the plain transform)."""

    matrix: np.ndarray
    delta: int
    perm: tuple[int, ...]
    source: int = 0


def mubs_from_partition(basis: OperatorBasis) -> MubSet:
    part = basis.partition
    if not part.success:
        raise MubError("basis has no partition into d + 1 commuting sets")
    bases = np.stack([basis.set_eigenbasis(j) for j in range(len(part.sets))])
    try:
        return MubSet(basis.dims, bases, origin="from_partition")
    except MubError as err:
        raise MubError(f"joint eigenbases are not mutually unbiased, basis is not maximally partitioning: {err}") from None


def mubs_explicit(p: int) -> MubSet:
    """Closed-form MUBs for one qupit of odd prime level, anchored on the
    computational basis (which is basis 0)."""
    if p == 2 or not is_prime(p):
        raise MubError(f"closed-form construction needs an odd prime, got {p}; use mubs_from_partition")
    dims = QupitDims(p, 1)
    d, omega = p, dims.omega
    # 1-based k and l, exponent sums s_k = k + (k+1) + ... + d
    k = np.arange(1, d + 1)
    s = np.array([sum(range(kk, d + 1)) for kk in k])
    bases = [np.eye(d, dtype=complex)]
    for i in range(2, d + 2):
        phase = omega ** (((1 - i) * s) % p)
        b = omega ** (np.outer(d - k, k) % p) * phase[:, None] / math.sqrt(d)
        bases.append(b)
    return MubSet(dims, np.stack(bases), origin="explicit_construction")


def _match_basis(a: np.ndarray, b: np.ndarray, tol: float) -> tuple[int, ...] | None:
    ov = np.abs(b.conj().T @ a)
    hit = ov.argmax(axis=0)
    if np.all(ov[hit, np.arange(len(hit))] >= 1 - tol) and len(set(hit.tolist())) == len(hit):
        return tuple(int(h) for h in hit)
    return None


def mubs_equivalent(a: MubSet, b: MubSet, tol: float = MATCH_TOL) -> list[tuple[int, tuple[int, ...]]] | None:
    """Match every basis of ``a`` to a basis of ``b`` up to vector order and
    phase.  Returns ``[(j_b, vector_perm), ...]`` indexed by basis of ``a``,
    or None when the sets differ."""
    if a.d != b.d:
        return None
    out, used = [], set()
    for ba in a.bases:
        for jb, bb in enumerate(b.bases):
            if jb in used:
                continue
            perm = _match_basis(ba, bb, tol)
            if perm is not None:
                out.append((jb, perm))
                used.add(jb)
                break
        else:
            return None
    return out


def u_delta(mubs: MubSet, j: int, j_prime: int, perm=None) -> BasisChange:
    """``U = sum_k |psi^{j'}_{perm(k)}><psi^j_k|`` (0-based indices)."""
    n = len(mubs)
    if not (0 <= j < n and 0 <= j_prime < n):
        raise IndexError(f"basis indices must lie in 0..{n - 1}, got {j}, {j_prime}")
    perm = tuple(range(mubs.d)) if perm is None else tuple(int(x) for x in perm)
    if sorted(perm) != list(range(mubs.d)):
        raise ValueError(f"perm must be a permutation of 0..{mubs.d - 1}")
    m = mubs.bases[j_prime][:, list(perm)] @ mubs.bases[j].conj().T
    return BasisChange(_freeze(m), (j_prime - j) % n, perm, j)


@dataclass
class ShiftReport:
    delta: int
    shifts: list[int | None]
    violations: list[dict] = field(default_factory=list)
    max_deviation: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "ok": self.ok,
            "shifts": self.shifts,
            "max_deviation": self.max_deviation,
            "violations": self.violations,
        }


def verify_proposition1(mubs: MubSet, bc: BasisChange | np.ndarray, tol: float = MATCH_TOL) -> ShiftReport:
    """Check that the transform sends every vector of every basis ``i`` to a
    vector of basis ``i + delta`` up to phase."""
    if isinstance(bc, BasisChange):
        m, delta = bc.matrix, bc.delta
    else:
        m, delta = np.asarray(bc), 0
    n = len(mubs)
    report = ShiftReport(delta, [])
    for i, b in enumerate(mubs.bases):
        image = m @ b
        ov = np.abs(np.einsum("jik,il->jkl", mubs.bases.conj(), image))  # basis j, vector k, image l
        best = ov.max(axis=1)  # (basis, image)
        landed = best.argmax(axis=0)
        expected = (i + delta) % n
        dev = float((1 - best[expected]).max())
        report.max_deviation = max(report.max_deviation, dev)
        observed = sorted(set(int(x) for x in landed))
        if len(observed) == 1 and best[observed[0]].min() >= 1 - tol:
            report.shifts.append((observed[0] - i) % n)
        else:
            report.shifts.append(None)
        if dev > tol:
            report.violations.append(
                {"source": i, "expected": expected, "observed": observed, "max_deviation": dev}
            )
    return report


def _phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``min_phi max|a - e^{i phi} b|`` with phi from the Hilbert-Schmidt overlap."""
    ov = np.vdot(b, a)
    phase = ov / abs(ov) if abs(ov) > 1e-12 else 1.0
    return float(np.abs(a - phase * b).max())


@dataclass
class GroupLawReport:
    closure: float
    inverse: float
    cycle: float
    decomposition: float
    shifts: dict[int, bool]
    tol: float = TOL
    sampled_perms: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return max(self.closure, self.inverse, self.cycle, self.decomposition) <= self.tol

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "tol": self.tol,
            "closure_max_deviation": self.closure,
            "inverse_max_deviation": self.inverse,
            "cycle_max_deviation": self.cycle,
            "decomposition_max_deviation": self.decomposition,
            "shift_by_delta": {str(k): v for k, v in self.shifts.items()},
            "sampled_perms": self.sampled_perms,
        }


def verify_group_law(mubs: MubSet, samples: int = 3, seed: int = 0, tol: float = TOL) -> GroupLawReport:
    """Composition, inverse and (d+1)-fold laws of the anchor-based family
    ``U0_delta`` (all measured up to a global phase), plus the split of a
    permuted transform into a within-basis relabelling times ``U0_delta``.

    The per-delta shift results and the sampled-permutation shift checks are
    reported for information; ``ok`` covers the four algebraic laws.
    """
    n, d = len(mubs), mubs.d
    eye = np.eye(d)
    u0 = [u_delta(mubs, 0, delta).matrix for delta in range(n)]
    closure = max(
        _phase_distance(u0[a] @ u0[b], u0[(a + b) % n]) for a in range(n) for b in range(n)
    )
    inverse = max(_phase_distance(u0[a] @ u0[(-a) % n], eye) for a in range(n))
    cycle = _phase_distance(np.linalg.matrix_power(u0[1 % n], n), eye)
    rng = np.random.default_rng(seed)
    decomposition = 0.0
    sampled = []
    for _ in range(samples):
        delta = int(rng.integers(n))
        perm = tuple(int(x) for x in rng.permutation(d))
        bc = u_delta(mubs, 0, delta, perm)
        target = mubs.bases[delta]
        pi = target[:, list(perm)] @ target.conj().T
        decomposition = max(decomposition, float(np.abs(bc.matrix - pi @ u0[delta]).max()))
        rep = verify_proposition1(mubs, bc)
        sampled.append({"delta": delta, "perm": list(perm), "shift_ok": rep.ok, "max_deviation": rep.max_deviation})
    shifts = {delta: verify_proposition1(mubs, u_delta(mubs, 0, delta)).ok for delta in range(n)}
    return GroupLawReport(closure, inverse, cycle, decomposition, shifts, tol, sampled)


# --- Clifford orbits on a MUB set ----------------------------------------


def mub_permutation(mubs: MubSet, u: np.ndarray, tol: float = MATCH_TOL) -> tuple[int, ...] | None:
    """Basis permutation induced by ``u``, or None if ``u`` does not map the
    set onto itself basis by basis."""
    image = []
    for b in mubs.bases:
        ov = np.abs(np.einsum("jik,il->jkl", mubs.bases.conj(), u @ b)).max(axis=1)
        j = int(ov[:, 0].argmax())
        if ov[j].min() < 1 - tol:
            return None
        image.append(j)
    return tuple(image) if len(set(image)) == len(image) else None


def _default_generators(dims: QupitDims) -> list[np.ndarray]:
    p, n = dims.p, dims.n
    gens = []
    for site in range(n):
        gens.append(on_qupit(fourier(p), p, n, site))
        gens.append(on_qupit(phase_gate(p), p, n, site))
    for a in range(n - 1):
        pair = csum(p)
        gens.append(np.kron(np.kron(np.eye(p**a), pair), np.eye(p ** (n - a - 2))))
    return gens


def clifford_permutations(mubs: MubSet, generators=None, limit: int = 10_000) -> dict[tuple[int, ...], np.ndarray]:
    """Breadth-first closure of the basis permutations induced by products of
    ``generators`` (default: Fourier and phase gate on each qupit, CSUM on
    neighbours).  Generators that do not preserve the set are skipped.
    Returns ``{perm: representative unitary}``."""
    gens = _default_generators(mubs.dims) if generators is None else [np.asarray(g) for g in generators]
    moves = [(perm, g) for g in gens if (perm := mub_permutation(mubs, g)) is not None]
    start = tuple(range(len(mubs)))
    found = {start: np.eye(mubs.d, dtype=complex)}
    queue = deque([start])
    while queue and len(found) < limit:
        cur = queue.popleft()
        for perm, g in moves:
            nxt = tuple(perm[c] for c in cur)
            if nxt not in found:
                found[nxt] = g @ found[cur]
                queue.append(nxt)
    return found


def permutation_cycles(perm: tuple[int, ...]) -> list[list[int]]:
    seen, out = set(), []
    for s in range(len(perm)):
        if s in seen:
            continue
        cyc, x = [], s
        while x not in seen:
            seen.add(x)
            cyc.append(x)
            x = perm[x]
        out.append(cyc)
    return out


def arrange_for_shift(mubs: MubSet, delta: int, generators=None) -> tuple[MubSet, np.ndarray]:
    """Re-index and re-phase ``mubs`` so that ``U0_delta`` is a Clifford that
    moves every basis ``i`` to ``i + delta``.

    Searches the Clifford permutations of the set for one whose cycles all
    have length ``(d+1)/gcd(delta, d+1)``, lays the bases out along those
    cycles with basis 0 kept in place, and fills each cycle by applying the
    Clifford to the previous basis.  Returns the new set and the Clifford.
    Raises :class:`MubError` when no such Clifford permutation exists.
    """
    n, d = len(mubs), mubs.d
    delta %= n
    if delta == 0:
        return mubs, np.eye(d, dtype=complex)
    length = n // math.gcd(delta, n)
    perms = clifford_permutations(mubs, generators)
    candidates = [(perm, c) for perm, c in perms.items() if all(len(cy) == length for cy in permutation_cycles(perm))]
    if not candidates:
        types = sorted({tuple(sorted(len(cy) for cy in permutation_cycles(pm))) for pm in perms})
        raise MubError(
            f"no Clifford permutes these {n} bases as i -> i + {delta}: "
            f"needs cycles of length {length}, available cycle types {types}"
        )
    perm, c = candidates[0]
    # prefer a representative with C^(d+1) proportional to 1, fixing it up by Paulis
    paulis = gen_pauli(mubs.dims.p, mubs.dims.n).ops
    for w in paulis:
        trial = c @ w
        if _phase_distance(np.linalg.matrix_power(trial, n), np.eye(d)) < TOL:
            c = trial
            break
    layout = [None] * n
    bases = [None] * n
    free = list(range(n))
    for r in range(math.gcd(delta, n)):
        start = 0 if r == 0 else min(free)
        pos, old, vecs = r, start, mubs.bases[start]
        for _ in range(length):
            layout[pos], bases[pos] = old, vecs
            free.remove(old)
            pos, old, vecs = (pos + delta) % n, perm[old], c @ vecs
    return MubSet(mubs.dims, np.stack(bases), origin=mubs.origin), c


# --- files ---------------------------------------------------------------

MUB_SCHEMA = {
    "type": "object",
    "required": ["format", "p", "n", "origin", "bases"],
    "properties": {
        "format": {"const": "quditmc.mub"},
        "p": {"type": "integer", "minimum": 2},
        "n": {"type": "integer", "minimum": 1},
        "origin": {"type": "string"},
        "bases": {"type": "array", "items": {"type": "array", "items": {"type": "array", "items": _io.COMPLEX}}},
    },
}


def mub_to_json(mubs: MubSet) -> dict:
    # stored vector by vector: bases[j][k] is |psi^j_k>
    return {
        "format": "quditmc.mub",
        "p": mubs.dims.p,
        "n": mubs.dims.n,
        "origin": mubs.origin,
        "bases": _io.encode_array(mubs.bases.transpose(0, 2, 1)),
    }


def mub_from_json(doc: dict) -> MubSet:
    _io.validate(doc, MUB_SCHEMA)
    dims = QupitDims(doc["p"], doc["n"])
    vecs = _io.decode_array(doc["bases"])
    return MubSet(dims, vecs.transpose(0, 2, 1), origin=doc["origin"])


def save_mubs(mubs: MubSet, path: str | Path) -> None:
    _io.dump_json(mub_to_json(mubs), path)


def load_mubs(path: str | Path) -> MubSet:
    return mub_from_json(_io.load_json(path))
