"""Monte Carlo fidelity estimation.

One run draws ``L = ceil(1/(eps^2 delta))`` events ``(i, k)`` from the
relevance distribution, repeats each ``m_l`` times and averages the
normalized outcomes:

    X_l = (1 / (beta m_l)) sum_n conj(lambda_n) w_n,     Y = mean_l X_l.

For the operator protocol the input is a uniformly drawn eigenstate of
``W_i`` (eigenvalue ``lambda``), the output is measured in the eigenbasis of
``W_k`` (outcome ``w``), and ``Y`` estimates the entanglement fidelity.
State protocols feed MUB states instead (``lambda = 1``) and estimate the
average fidelity directly, or the two classical fidelities.

Random numbers come from counter-based Philox streams keyed by
``(seed, run, stream)``: stream 0 draws the events, stream ``1 + l`` the
shots of event ``l``.  Results therefore do not depend on thread count or
completion order.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from quditmc import _io
from quditmc.channels import Channel
from quditmc.mub import MubError, MubSet, mubs_from_partition
from quditmc.operator_basis import OperatorBasis
from quditmc.oracle import (
    average_fidelity_2design,
    classical_fidelities,
    entanglement_fidelity,
    fav_from_fe,
)
from quditmc.relevance import (
    PROTOCOLS,
    CliffordMap,
    characteristic_table,
    clifford_map,
    draws_for,
    hermitized_relevance,
    relevance_distribution,
    shots_for,
)

__all__ = [
    "SHOT_MODES",
    "ProtocolError",
    "SamplingPlan",
    "EventDraw",
    "EstimateResult",
    "GuaranteeReport",
    "draw_events",
    "run_estimate",
    "run_estimate_hermitized",
    "verify_guarantee",
    "worker_count",
    "manifest_text",
]

SHOT_MODES = ("exact_expectation", "finite_shots")
#: Drawn events with |beta| at or below this indicate a broken table.
BETA_FLOOR = 1e-12
#: Oracles are computed only up to this dimension.
ORACLE_MAX_D = 32


class ProtocolError(ValueError):
    pass


def worker_count() -> int:
    """Worker cap from ``QUDITMC_THREADS`` (default 1)."""
    raw = os.environ.get("QUDITMC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"QUDITMC_THREADS must be an integer, got {raw!r}") from None


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class SamplingPlan:
    epsilon: float
    delta: float
    seed: int
    protocol: str = "entanglement"
    shot_mode: str = "finite_shots"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol '{self.protocol}'")
        if self.shot_mode not in SHOT_MODES:
            raise ValueError(f"shot_mode must be one of {SHOT_MODES}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")

    @property
    def L(self) -> int:
        return draws_for(self.epsilon, self.delta)

    def shots(self, beta_abs2) -> np.ndarray:
        return shots_for(beta_abs2, self.L, self.epsilon, self.delta)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "L": self.L,
            "seed": int(self.seed),
            "protocol": self.protocol,
            "shot_mode": self.shot_mode,
        }


@dataclass(frozen=True)
class EventDraw:
    i: int
    k: int
    beta: complex
    m: int


@dataclass
class EstimateResult:
    y_tilde: complex
    fe_estimate: float
    fav_estimate: float
    events: list[EventDraw]
    x_values: np.ndarray
    total_shots: int
    plan: SamplingPlan
    d: int
    oracle: dict | None = None
    extra: dict = field(default_factory=dict)

    @property
    def kappa(self) -> list[tuple[int, int]]:
        return [(e.i, e.k) for e in self.events]

    def to_dict(self, verbose: bool = False) -> dict:
        out = {
            "plan": self.plan.to_dict(),
            "d": self.d,
            "estimate": {
                "y_tilde": [float(self.y_tilde.real), float(self.y_tilde.imag)],
                "imag_residue": float(self.y_tilde.imag),
                "fe_estimate": float(self.fe_estimate),
                "fav_estimate": float(self.fav_estimate),
                "total_shots": int(self.total_shots),
                "draws": len(self.events),
                "x_sample_variance": float(np.var(self.x_values)) if len(self.x_values) > 1 else 0.0,
                **self.extra,
            },
            "oracle": self.oracle,
        }
        if self.oracle is not None and "fav" in self.oracle:
            err = abs(self.fav_estimate - self.oracle["fav"])
            out["guarantee"] = {"abs_error_fav": err, "epsilon": self.plan.epsilon, "within_epsilon": err < self.plan.epsilon}
        if verbose:
            out["events"] = [
                {"i": e.i, "k": e.k, "beta": [float(e.beta.real), float(e.beta.imag)], "m": e.m, "x": [float(x.real), float(x.imag)]}
                for e, x in zip(self.events, self.x_values)
            ]
        return out

    def csv_row(self) -> dict:
        o = self.oracle or {}
        return {
            "protocol": self.plan.protocol,
            "d": self.d,
            "epsilon": self.plan.epsilon,
            "delta": self.plan.delta,
            "seed": self.plan.seed,
            "L": self.plan.L,
            "total_shots": self.total_shots,
            "y_re": float(self.y_tilde.real),
            "y_im": float(self.y_tilde.imag),
            "fe_estimate": self.fe_estimate,
            "fav_estimate": self.fav_estimate,
            "oracle_fav": o.get("fav", ""),
        }

    def csv_text(self) -> str:
        buf = io.StringIO()
        row = self.csv_row()
        w = csv.DictWriter(buf, fieldnames=list(row))
        w.writeheader()
        w.writerow(row)
        return buf.getvalue()


# --- event drawing -----------------------------------------------------------


def _inverse_cdf(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs)
    return np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), len(probs) - 1)


def draw_events(dist, plan: SamplingPlan, rng: np.random.Generator, cmap: CliffordMap | None = None) -> list[EventDraw]:
    """``L`` independent events from a relevance distribution.

    With ``cmap`` (operator protocol, Clifford target) the table is bypassed:
    the input is drawn uniformly and its unique partner read off the map.
    Both routes consume the same uniforms, so on a uniform distribution they
    return the same events.
    """
    L = plan.L
    u = rng.random(L)
    if cmap is not None:
        n = len(cmap.images)
        i = np.minimum((u * n).astype(np.int64), n - 1)
        k = np.asarray(cmap.images)[i]
        beta = np.conj(cmap.phases[i])
    else:
        if len(dist.support) == 0:
            raise ValueError("empty support")
        pick = _inverse_cdf(dist.support_probs, u)
        i, k = dist.support[pick, 0], dist.support[pick, 1]
        beta = dist.table.chi_u[i, k]
    if np.any(np.abs(beta) <= BETA_FLOOR):
        raise ValueError("drawn event has vanishing characteristic function (inconsistent table)")
    m = plan.shots(np.abs(beta) ** 2)
    return [EventDraw(int(a), int(b), complex(c), int(s)) for a, b, c, s in zip(i, k, beta, m)]


def _stabilizer_events(cmap, basis, mubs, inputs, u_in, u_m, target_u):
    """State-protocol Clifford shortcut: input state j is a joint eigenstate
    of commuting set ``s``; the only nonzero measurements are the images of
    ``{1} + set s`` under the Clifford."""
    d = basis.d
    sets = basis.partition.sets
    j = np.minimum((u_in * len(inputs)).astype(np.int64), len(inputs) - 1)
    out = []
    for jj, um in zip(j, u_m):
        b, vec = inputs[jj]
        members = (0,) + tuple(sets[b])
        m = members[min(int(um * d), d - 1)]
        k = cmap.images[m]
        psi = target_u @ mubs.bases[b][:, vec]
        chi = complex(np.vdot(psi, basis.ops[k] @ psi))
        out.append((int(jj), int(k), chi))
    return out


# --- per-event evaluation ----------------------------------------------------


class _OperatorEvents:
    """Caches Born tables ``P[a, b] = <u_b| D(|v_a><v_a|) |u_b>`` per event."""

    def __init__(self, channel: Channel, basis: OperatorBasis):
        self.channel, self.basis = channel, basis
        self.cache: dict[tuple[int, int], tuple] = {}

    def prepare(self, i: int, k: int):
        if (i, k) in self.cache:
            return
        lam, v = self.basis.eigenbasis(i)
        mu, w = self.basis.eigenbasis(k)
        out = self.channel(np.einsum("ia,ja->aij", v, v.conj()))
        born = np.einsum("ib,aij,jb->ab", w.conj(), out, w).real
        born = np.clip(born, 0, None)
        born /= born.sum(axis=1, keepdims=True)
        d = self.basis.d
        alpha = complex(np.einsum("aij,ji->a", out, self.basis.ops[k]).dot(lam.conj()) / d)
        self.cache[(i, k)] = (lam, mu, born, alpha)

    def exact(self, i: int, k: int) -> complex:
        return self.cache[(i, k)][3]

    def sample(self, i: int, k: int, m: int, rng: np.random.Generator) -> complex:
        lam, mu, born, _ = self.cache[(i, k)]
        d = len(lam)
        counts_a = rng.multinomial(m, np.full(d, 1 / d))
        total = 0j
        for a in np.flatnonzero(counts_a):
            counts_b = rng.multinomial(counts_a[a], born[a])
            total += np.conj(lam[a]) * np.dot(counts_b, mu)
        return total


class _StateEvents:
    def __init__(self, channel: Channel, basis: OperatorBasis, states: np.ndarray):
        self.channel, self.basis, self.states = channel, basis, states
        self.cache: dict[tuple[int, int], tuple] = {}
        self.outputs: dict[int, np.ndarray] = {}

    def prepare(self, j: int, k: int):
        if (j, k) in self.cache:
            return
        if j not in self.outputs:
            s = self.states[j]
            self.outputs[j] = self.channel(np.outer(s, s.conj()))
        rho = self.outputs[j]
        mu, w = self.basis.eigenbasis(k)
        born = np.clip(np.einsum("ib,ij,jb->b", w.conj(), rho, w).real, 0, None)
        born /= born.sum()
        chi_d = complex(np.trace(rho @ self.basis.ops[k]))
        self.cache[(j, k)] = (mu, born, chi_d)

    def exact(self, j: int, k: int) -> complex:
        return self.cache[(j, k)][2]

    def sample(self, j: int, k: int, m: int, rng: np.random.Generator) -> complex:
        mu, born, _ = self.cache[(j, k)]
        return complex(np.dot(rng.multinomial(m, born), mu))


def _evaluate(events: list[EventDraw], engine, plan: SamplingPlan, run: int, threads: int) -> np.ndarray:
    for e in events:
        engine.prepare(e.i, e.k)
    if plan.shot_mode == "exact_expectation":
        return np.array([engine.exact(e.i, e.k) / e.beta for e in events])

    def one(pair):
        l, e = pair
        rng = _rng(plan.seed, run, 1 + l)
        return engine.sample(e.i, e.k, e.m, rng) / (e.beta * e.m)

    pairs = list(enumerate(events))
    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(one, pairs, chunksize=max(1, len(pairs) // (4 * threads))))
    else:
        vals = [one(p) for p in pairs]
    return np.array(vals, dtype=complex)


# --- pipelines ---------------------------------------------------------------


def _resolve_mubs(basis: OperatorBasis, mubs: MubSet | None, protocol: str) -> MubSet:
    if mubs is not None:
        return mubs
    try:
        return mubs_from_partition(basis)
    except MubError as err:
        raise ProtocolError(
            f"protocol '{protocol}' needs d + 1 mutually unbiased input bases, but this basis "
            f"does not supply them ({err}); use the entanglement protocol"
        ) from None


def _state_inputs(protocol: str, mubs: MubSet, pair: tuple[int, int]) -> list[tuple[int, int]]:
    bases = range(len(mubs)) if protocol == "two_design" else pair
    return [(b, v) for b in bases for v in range(mubs.d)]


def _shortcut_ok(basis: OperatorBasis, mubs: MubSet) -> bool:
    part = basis.partition
    return part.success and all(
        np.allclose(mubs.bases[j], basis.set_eigenbasis(j), atol=1e-10) for j in range(len(mubs))
    )


def _oracle(channel: Channel, u: np.ndarray, basis: OperatorBasis, mubs, protocol, pair) -> dict | None:
    if basis.d > ORACLE_MAX_D:
        return None
    fe = entanglement_fidelity(channel, u, basis)
    out = {"fe": fe, "fav": fav_from_fe(fe, basis.d)}
    if mubs is not None and protocol == "two_design":
        out["fav_2design"] = average_fidelity_2design(channel, u, mubs)
    if mubs is not None and protocol == "classical":
        cf = classical_fidelities(channel, u, mubs.bases[pair[0]], mubs.bases[pair[1]])
        out["classical"] = cf._asdict()
    return out


def run_estimate(
    target_u: np.ndarray,
    channel: Channel,
    basis: OperatorBasis,
    plan: SamplingPlan,
    mubs: MubSet | None = None,
    run: int = 0,
    oracle: bool = True,
    classical_pair: tuple[int, int] = (0, 1),
    threads: int | None = None,
    use_shortcut: bool = True,
) -> EstimateResult:
    """One Monte Carlo estimate for the given target and channel."""
    u = np.asarray(target_u, dtype=complex)
    d = basis.d
    threads = worker_count() if threads is None else threads
    rng = _rng(plan.seed, run, 0)
    protocol = plan.protocol
    cmap = clifford_map(u, basis) if (use_shortcut and basis.unitary) else None
    cmap = cmap if cmap else None

    if protocol == "entanglement":
        if cmap is not None:
            events = draw_events(None, plan, rng, cmap)
        else:
            dist = relevance_distribution(characteristic_table(protocol, u, None, basis))
            events = draw_events(dist, plan, rng)
        x = _evaluate(events, _OperatorEvents(channel, basis), plan, run, threads)
        y = complex(x.mean())
        fe = y.real
        result = EstimateResult(y, fe, fav_from_fe(fe, d), events, x, sum(e.m for e in events), plan, d)
    else:
        mubs = _resolve_mubs(basis, mubs, protocol)
        inputs = _state_inputs(protocol, mubs, classical_pair)
        states = np.array([mubs.bases[b][:, v] for b, v in inputs])
        if cmap is not None and _shortcut_ok(basis, mubs):
            u_in, u_m = rng.random(plan.L), rng.random(plan.L)
            raw = _stabilizer_events(cmap, basis, mubs, inputs, u_in, u_m, u)
            betas = np.array([c for _, _, c in raw])
            m = plan.shots(np.abs(betas) ** 2)
            events = [EventDraw(j, k, c, int(s)) for (j, k, c), s in zip(raw, m)]
        else:
            dist = relevance_distribution(characteristic_table(protocol, u, None, basis, mubs, classical_pair))
            events = draw_events(dist, plan, rng)
        if any(abs(e.beta) <= BETA_FLOOR for e in events):
            raise ValueError("drawn event has vanishing characteristic function")
        x = _evaluate(events, _StateEvents(channel, basis, states), plan, run, threads)
        y = complex(x.mean())
        total = sum(e.m for e in events)
        if protocol == "two_design":
            fav = y.real
            result = EstimateResult(y, ((d + 1) * fav - 1) / d, fav, events, x, total, plan, d)
        else:
            in_a = np.array([inputs[e.i][0] == classical_pair[0] for e in events])
            f1 = float(x[in_a].real.mean()) if in_a.any() else float("nan")
            f2 = float(x[~in_a].real.mean()) if (~in_a).any() else float("nan")
            lower, upper = f1 + f2 - 1, min(f1, f2)
            extra = {
                "classical_f1": f1,
                "classical_f2": f2,
                "fe_lower": lower,
                "fe_upper": upper,
                "fav_lower": fav_from_fe(lower, d),
                "fav_upper": fav_from_fe(upper, d),
            }
            result = EstimateResult(y, lower, fav_from_fe(lower, d), events, x, total, plan, d, extra=extra)
    if oracle:
        result.oracle = _oracle(channel, u, basis, mubs if protocol != "entanglement" else None, protocol, classical_pair)
    return result


def run_estimate_hermitized(
    target_clifford: np.ndarray,
    channel: Channel,
    hbasis: OperatorBasis,
    plan: SamplingPlan,
    run: int = 0,
    oracle: bool = True,
    threads: int | None = None,
) -> EstimateResult:
    """Two-stage sampling on a Hermitized basis: a uniform input, then a
    binary choice between the two outputs of the conjugated operator."""
    if not hbasis.hermitized or hbasis.parent is None:
        raise ValueError("needs a Hermitized basis")
    if plan.protocol != "entanglement":
        raise ProtocolError("two-stage sampling is defined for the operator protocol")
    u = np.asarray(target_clifford, dtype=complex)
    cmap = clifford_map(u, hbasis.parent)
    if not cmap:
        raise ProtocolError(f"target is not a Clifford (residual {cmap.residual:.3e})")
    hr = hermitized_relevance(cmap, hbasis)
    rng = _rng(plan.seed, run, 0)
    n = len(hbasis)
    u1, u2 = rng.random(plan.L), rng.random(plan.L)
    i = np.minimum((u1 * n).astype(np.int64), n - 1)
    like = u2 < hr.p_like[i]
    k = np.where(like, hr.like[i], hr.cross[i])
    beta = np.where(like, hr.c_like[i], hr.c_cross[i])
    if np.any(np.abs(beta) <= BETA_FLOOR):
        raise ValueError("drawn event has vanishing coefficient")
    m = plan.shots(beta**2)
    events = [EventDraw(int(a), int(b), complex(c), int(s)) for a, b, c, s in zip(i, k, beta, m)]
    threads = worker_count() if threads is None else threads
    x = _evaluate(events, _OperatorEvents(channel, hbasis), plan, run, threads)
    y = complex(x.mean())
    d = hbasis.d
    result = EstimateResult(y, y.real, fav_from_fe(y.real, d), events, x, int(m.sum()), plan, d)
    if oracle and d <= ORACLE_MAX_D:
        fe = entanglement_fidelity(channel, u, hbasis)
        result.oracle = {"fe": fe, "fav": fav_from_fe(fe, d)}
    return result


@dataclass
class GuaranteeReport:
    runs: int
    epsilon: float
    delta: float
    oracle_fav: float
    oracle_fe: float
    failures_fav: int
    failures_fe: int
    mean_fav: float
    max_abs_error_fav: float
    mean_total_shots: float
    max_total_shots: int

    @property
    def threshold(self) -> float:
        return self.delta + 2 * math.sqrt(self.delta / self.runs)

    @property
    def failure_fraction(self) -> float:
        return self.failures_fav / self.runs

    @property
    def ok(self) -> bool:
        return self.failure_fraction <= self.threshold

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "oracle_fav": self.oracle_fav,
            "oracle_fe": self.oracle_fe,
            "failure_fraction": self.failure_fraction,
            "failure_fraction_fe": self.failures_fe / self.runs,
            "threshold": self.threshold,
            "ok": self.ok,
            "mean_fav": self.mean_fav,
            "max_abs_error_fav": self.max_abs_error_fav,
            "mean_total_shots": self.mean_total_shots,
            "max_total_shots": self.max_total_shots,
        }


def verify_guarantee(
    target_u: np.ndarray,
    channel: Channel,
    basis: OperatorBasis,
    plan: SamplingPlan,
    runs: int = 200,
    mubs: MubSet | None = None,
    hermitized: bool = False,
    threads: int | None = None,
) -> GuaranteeReport:
    """Run ``runs`` independent seeded estimates and count how often the
    average-fidelity estimate misses the oracle by ``epsilon`` or more."""
    u = np.asarray(target_u, dtype=complex)
    fe_true = entanglement_fidelity(channel, u, basis)
    fav_true = fav_from_fe(fe_true, basis.d)
    if plan.protocol == "two_design":
        fav_true = average_fidelity_2design(channel, u, _resolve_mubs(basis, mubs, plan.protocol))
        fe_true = ((basis.d + 1) * fav_true - 1) / basis.d
    favs, fes, shots = [], [], []
    for r in range(runs):
        if hermitized:
            res = run_estimate_hermitized(u, channel, basis, plan, run=r, oracle=False, threads=threads)
        else:
            res = run_estimate(u, channel, basis, plan, mubs=mubs, run=r, oracle=False, threads=threads)
        favs.append(res.fav_estimate)
        fes.append(res.fe_estimate)
        shots.append(res.total_shots)
    favs, fes = np.array(favs), np.array(fes)
    err = np.abs(favs - fav_true)
    return GuaranteeReport(
        runs,
        plan.epsilon,
        plan.delta,
        fav_true,
        fe_true,
        int(np.sum(err >= plan.epsilon)),
        int(np.sum(np.abs(fes - fe_true) >= plan.epsilon)),
        float(favs.mean()),
        float(err.max()),
        float(np.mean(shots)),
        int(max(shots)),
    )


def manifest_text(result: EstimateResult, verbose: bool = False) -> str:
    return _io.dump_json(result.to_dict(verbose))
