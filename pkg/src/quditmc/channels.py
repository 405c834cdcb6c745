"""Density matrices, Kraus channels and projective measurements with complex
eigenvalues.

A non-Hermitian basis operator is "measured" by projecting onto its fixed
eigenbasis and reporting the eigenvalue of the outcome; how a laboratory
would realize that is outside this package.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from quditmc import _io
from quditmc.gates import haar_unitary
from quditmc.operator_basis import OperatorBasis, QupitDims, gen_pauli

__all__ = [
    "StateError",
    "ChannelError",
    "StateDM",
    "Channel",
    "MeasurementOp",
    "ShotRecord",
    "apply",
    "unitary_channel",
    "identity_channel",
    "depolarizing",
    "dephasing",
    "compose",
    "random_channel",
    "expectation",
    "born_probabilities",
    "measure_shots",
    "process_matrix",
    "channel_from_json",
    "channel_to_json",
    "load_channel",
    "save_channel",
]

STATE_TOL = 1e-10
TP_TOL = 1e-9


class StateError(ValueError):
    pass


class ChannelError(ValueError):
    pass


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateDM:
    rho: np.ndarray

    def __post_init__(self):
        rho = _readonly(self.rho)
        object.__setattr__(self, "rho", rho)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise StateError(f"density matrix must be square, got shape {rho.shape}")
        if np.abs(rho - rho.conj().T).max() > STATE_TOL:
            raise StateError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > STATE_TOL:
            raise StateError(f"trace is {np.trace(rho).real:.12g}, expected 1")
        low = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
        if low < -1e-9:
            raise StateError(f"not positive semidefinite (min eigenvalue {low:.3e})")

    @property
    def d(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def pure(cls, psi) -> StateDM:
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, d: int) -> StateDM:
        return cls(np.eye(d) / d)


@dataclass(frozen=True)
class Channel:
    """CPTP map in Kraus form, stored as a ``(m, d, d)`` stack."""

    kraus: np.ndarray
    label: str = ""

    def __post_init__(self):
        k = _readonly(self.kraus)
        if k.ndim == 2:
            k = _readonly(k[None])
        object.__setattr__(self, "kraus", k)
        if k.ndim != 3 or k.shape[1] != k.shape[2]:
            raise ChannelError(f"Kraus operators must be square matrices, got shape {k.shape}")
        gram = np.einsum("mji,mjk->ik", k.conj(), k)
        diff = np.abs(gram - np.eye(k.shape[1]))
        if diff.max() > TP_TOL:
            r, c = np.unravel_index(np.argmax(diff), diff.shape)
            raise ChannelError(
                f"not trace preserving: sum K^dagger K deviates from identity by {diff.max():.3e} at entry ({r}, {c})"
            )

    @property
    def d(self) -> int:
        return self.kraus.shape[1]

    def __call__(self, a: np.ndarray) -> np.ndarray:
        """Apply to any operator (or a stack of operators on the last two axes)."""
        a = np.asarray(a, dtype=complex)
        return np.einsum("mij,...jk,mlk->...il", self.kraus, a, self.kraus.conj())


@dataclass(frozen=True)
class MeasurementOp:
    """Operator together with the eigen-decomposition used to measure it.

    ``vectors[:, a]`` is the eigenvector with eigenvalue ``values[a]``.
    """

    op: np.ndarray
    values: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        for name in ("op", "values", "vectors"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        v = self.vectors
        if np.abs(v.conj().T @ v - np.eye(len(v))).max() > 1e-9:
            raise ValueError("eigenvectors are not orthonormal")
        if np.abs(self.op @ v - v * self.values).max() > 1e-8:
            raise ValueError("eigen-decomposition does not diagonalize the operator")

    @property
    def eigen(self) -> list[tuple[complex, np.ndarray]]:
        return [(complex(self.values[a]), self.vectors[:, a]) for a in range(len(self.values))]

    @classmethod
    def from_basis(cls, basis: OperatorBasis, k: int) -> MeasurementOp:
        vals, vecs = basis.eigenbasis(k)
        return cls(basis.ops[k], vals, vecs)


@dataclass(frozen=True)
class ShotRecord:
    input_index: int
    meas_index: int
    eigenstate_index: int
    input_eigenvalue: complex
    outcome: complex

    @property
    def product(self) -> complex:
        return self.input_eigenvalue.conjugate() * self.outcome


def apply(channel: Channel, state: StateDM) -> StateDM:
    if channel.d != state.d:
        raise ValueError(f"channel acts on dimension {channel.d}, state has dimension {state.d}")
    return StateDM(channel(state.rho))


def unitary_channel(u, label: str = "unitary") -> Channel:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or np.abs(u.conj().T @ u - np.eye(len(u))).max() > 1e-10:
        raise ChannelError("target is not unitary")
    return Channel(u[None], label)


def identity_channel(d: int) -> Channel:
    return Channel(np.eye(d)[None], "identity")


def _check_q(q: float) -> float:
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ChannelError(f"noise strength q must lie in [0, 1], got {q}")
    return q


def depolarizing(q: float, dims: QupitDims) -> Channel:
    """``rho -> (1 - q) rho + q 1/d`` via the generalized Pauli twirl."""
    q = _check_q(q)
    d = dims.d
    ops = gen_pauli(dims.p, dims.n).ops
    weights = np.full(d * d, q / d**2)
    weights[0] += 1 - q
    return Channel(np.sqrt(weights)[:, None, None] * ops, f"depolarizing(q={q})")


def dephasing(q: float, dims: QupitDims) -> Channel:
    """Kraus ``{sqrt(1-q) 1} + {sqrt(q/d) Z^b}`` over all d diagonal Paulis."""
    q = _check_q(q)
    d = dims.d
    basis = gen_pauli(dims.p, dims.n)
    diag = [w for w in basis.ops if np.allclose(w, np.diag(np.diag(w)))]
    kraus = [np.sqrt(1 - q) * np.eye(d)] + [np.sqrt(q / d) * z for z in diag]
    return Channel(np.stack(kraus), f"dephasing(q={q})")


def compose(c1: Channel, c2: Channel) -> Channel:
    """Apply ``c1`` first, then ``c2``."""
    if c1.d != c2.d:
        raise ValueError("dimension mismatch")
    kraus = np.einsum("aij,bjk->abik", c2.kraus, c1.kraus).reshape(-1, c1.d, c1.d)
    keep = np.abs(kraus).reshape(len(kraus), -1).max(axis=1) > 0
    return Channel(kraus[keep], f"{c2.label}∘{c1.label}")


def random_channel(d: int, rank: int, rng: np.random.Generator | int | None = None) -> Channel:
    """Channel with ``rank`` Kraus operators cut from a Haar isometry ``C^d -> C^(d rank)``."""
    if rank < 1:
        raise ValueError("rank must be at least 1")
    iso = haar_unitary(d * rank, rng)[:, :d]
    return Channel(iso.reshape(rank, d, d), f"random(rank={rank})")


def expectation(meas: MeasurementOp | np.ndarray, state: StateDM | np.ndarray) -> complex:
    op = meas.op if isinstance(meas, MeasurementOp) else np.asarray(meas)
    rho = state.rho if isinstance(state, StateDM) else np.asarray(state)
    return complex(np.trace(rho @ op))


def born_probabilities(meas: MeasurementOp, state: StateDM | np.ndarray) -> np.ndarray:
    rho = state.rho if isinstance(state, StateDM) else np.asarray(state)
    v = meas.vectors
    probs = np.einsum("ia,ij,ja->a", v.conj(), rho, v).real
    total = probs.sum()
    if abs(total - 1) > 1e-9:
        raise StateError(f"Born probabilities sum to {total:.12g}")
    return np.clip(probs, 0.0, None) / probs.clip(0.0, None).sum()


def measure_shots(meas: MeasurementOp, state: StateDM | np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` projective outcomes (eigenvalues, complex) in the operator's eigenbasis."""
    if count < 1:
        raise ValueError("count must be at least 1")
    idx = rng.choice(len(meas.values), size=count, p=born_probabilities(meas, state))
    return meas.values[idx]


def process_matrix(channel: Channel, basis: OperatorBasis) -> np.ndarray:
    """``chi`` with ``D(O) = sum_{nm} chi[n, m] W_m O W_n^dagger``."""
    if channel.d != basis.d:
        raise ValueError("dimension mismatch")
    coeffs = np.stack([basis.coefficients(k) for k in channel.kraus])  # (kraus, m)
    return np.einsum("am,an->nm", coeffs, coeffs.conj())


# --- files ---------------------------------------------------------------

_SHORTHAND = {"identity", "depolarizing", "dephasing", "unitary", "compose"}

CHANNEL_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "required": ["kraus"],
            "properties": {
                "format": {"const": "quditmc.channel"},
                "label": {"type": "string"},
                "kraus": {"type": "array", "items": _io.MATRIX, "minItems": 1},
            },
        },
        {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": sorted(_SHORTHAND)},
                "q": {"type": "number", "minimum": 0, "maximum": 1},
                "p": {"type": "integer", "minimum": 2},
                "n": {"type": "integer", "minimum": 1},
                "matrix": _io.MATRIX,
                "channels": {"type": "array", "minItems": 1},
            },
        },
    ]
}


def channel_from_json(doc: dict, dims: QupitDims | None = None) -> Channel:
    """Build a channel from a Kraus list or a shorthand such as
    ``{"type": "depolarizing", "q": 0.1}``.  Shorthands without ``p``/``n``
    take their dimensions from ``dims``."""
    if isinstance(doc, dict) and "kraus" in doc:
        _io.validate(doc, CHANNEL_SCHEMA["oneOf"][0])
        mats = [_io.decode_array(m) for m in doc["kraus"]]
        shapes = {m.shape for m in mats}
        if len(shapes) != 1 or any(len(s) != 2 or s[0] != s[1] for s in shapes):
            bad = next(i for i, m in enumerate(mats) if m.shape != mats[0].shape or m.shape[0] != m.shape[-1])
            raise _io.SchemaError(f"/kraus/{bad}", f"Kraus matrix has shape {mats[bad].shape}")
        kraus = np.stack(mats)
        deficit = np.eye(kraus.shape[1]) - np.einsum("mji,mjk->ik", kraus.conj(), kraus)
        norm = float(np.linalg.norm(deficit, 2))
        if norm > TP_TOL:
            # a single Kraus matrix with operator norm above 1 is the culprit on its own
            norms = [float(np.linalg.norm(m, 2)) for m in mats]
            worst = int(np.argmax(norms))
            r, c = np.unravel_index(np.argmax(np.abs(deficit)), deficit.shape)
            where = f"/kraus/{worst}" if norms[worst] > 1 + TP_TOL else "/kraus"
            raise _io.SchemaError(
                where,
                f"not trace preserving: 1 - sum K^dagger K has norm deficit {norm:.3e} "
                f"(largest entry at ({r}, {c}); largest Kraus norm {norms[worst]:.6g} at index {worst})",
            )
        return Channel(kraus, doc.get("label", "kraus"))
    _io.validate(doc, CHANNEL_SCHEMA["oneOf"][1])
    kind = doc["type"]
    if "p" in doc:
        dims = QupitDims(doc["p"], doc.get("n", 1))
    if kind == "compose":
        parts = [channel_from_json(c, dims) for c in doc["channels"]]
        out = parts[0]
        for c in parts[1:]:
            out = compose(out, c)
        return out
    if kind == "unitary":
        if "matrix" not in doc:
            raise _io.SchemaError("/matrix", "unitary channel needs a matrix")
        return unitary_channel(_io.decode_array(doc["matrix"]))
    if dims is None:
        raise _io.SchemaError("", f"'{kind}' shorthand needs p and n (or a basis to take them from)")
    if kind == "identity":
        return identity_channel(dims.d)
    if "q" not in doc:
        raise _io.SchemaError("/q", f"'{kind}' shorthand needs q")
    return (depolarizing if kind == "depolarizing" else dephasing)(doc["q"], dims)


def channel_to_json(channel: Channel) -> dict:
    return {"format": "quditmc.channel", "label": channel.label, "kraus": [_io.encode_array(k) for k in channel.kraus]}


def load_channel(path: str | Path, dims: QupitDims | None = None) -> Channel:
    return channel_from_json(_io.load_json(path), dims)


def save_channel(channel: Channel, path: str | Path) -> None:
    _io.dump_json(channel_to_json(channel), path)
