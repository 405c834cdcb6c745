"""Command-line front end.

    quditmc basis -p 3 -n 1 --kind pauli --out q3.basis.json
    quditmc mub -p 5 --kind explicit --out q5.mub.json
    quditmc estimate --basis q3.basis.json --channel dep.channel.json \\
        --target fourier --epsilon 0.05 --delta 0.05 --seed 1 --out run.json
    quditmc verify mub -p 5

Targets are products of named gates, e.g. ``fourier@0*phase@1``, ``csum@0``,
``identity``, ``haar:SEED`` or ``file:PATH`` (a JSON matrix of [re, im]
pairs).  Exit status is 0 on success, 1 when a verify suite fails and 2 on
bad input.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from quditmc import _io
from quditmc.channels import ChannelError, compose, depolarizing, load_channel, unitary_channel
from quditmc.estimator import (
    ProtocolError,
    SamplingPlan,
    run_estimate,
    run_estimate_hermitized,
    verify_guarantee,
)
from quditmc.gates import csum, fourier, haar_unitary, is_unitary, on_qupit, phase_gate
from quditmc.mub import (
    MubError,
    arrange_for_shift,
    mub_to_json,
    mubs_equivalent,
    mubs_explicit,
    mubs_from_partition,
    u_delta,
    verify_group_law,
    verify_proposition1,
)
from quditmc.operator_basis import (
    BasisError,
    HermitizeError,
    OperatorBasis,
    QupitDims,
    basis_to_json,
    classify_hierarchy,
    gell_mann_basis,
    gen_pauli,
    hermitize,
    load_basis,
    tensor_basis,
)
from quditmc.relevance import PROTOCOLS, characteristic_table, clifford_map, relevance_distribution

KINDS = ("pauli", "gellmann", "hermitized", "hermitized_local")
SUITES = ("algebra", "mub", "relevance", "guarantee", "hierarchy")


class UsageError(Exception):
    pass


# --- builders ------------------------------------------------------------------


def build_basis(p: int, n: int, kind: str) -> OperatorBasis:
    if kind == "pauli":
        return gen_pauli(p, n)
    if kind == "gellmann":
        if (p, n) != (3, 1):
            raise UsageError("the Gell-Mann basis exists here only for one qutrit (-p 3 -n 1)")
        return gell_mann_basis()
    if kind == "hermitized":
        return hermitize(gen_pauli(p, n))
    if kind == "hermitized_local":
        return tensor_basis(hermitize(gen_pauli(p, 1)), n)
    raise UsageError(f"unknown kind '{kind}', expected one of {KINDS}")


def parse_target(spec: str, dims: QupitDims) -> np.ndarray:
    """Product of ``*``-separated factors, multiplied left to right."""
    p, n, d = dims.p, dims.n, dims.d
    out = np.eye(d, dtype=complex)
    for term in spec.split("*"):
        term = term.strip()
        name, _, arg = term.partition("@")
        if name.startswith("haar:"):
            mat = haar_unitary(d, int(name[5:]))
        elif name.startswith("file:"):
            mat = _io.decode_array(_io.load_json(name[5:]))
        elif name in ("identity", "id"):
            mat = np.eye(d)
        elif name in ("fourier", "phase"):
            site = int(arg or 0)
            gate = fourier(p) if name == "fourier" else phase_gate(p)
            mat = on_qupit(gate, p, n, site)
        elif name == "csum":
            a = int(arg or 0)
            if a + 1 >= n:
                raise UsageError("csum@a needs qupits a and a+1")
            mat = np.kron(np.kron(np.eye(p**a), csum(p)), np.eye(p ** (n - a - 2)))
        else:
            raise UsageError(f"unknown target factor '{term}'")
        if mat.shape != (d, d):
            raise UsageError(f"target factor '{term}' has shape {mat.shape}, expected {(d, d)}")
        out = out @ mat
    if not is_unitary(out):
        raise UsageError("target is not unitary")
    return out


# --- commands -------------------------------------------------------------------


def _emit(doc, out: str | None) -> None:
    text = _io.dump_json(doc)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_basis(args) -> int:
    basis = build_basis(args.p, args.n, args.kind)
    cls = classify_hierarchy(basis)
    _emit(basis_to_json(basis, cls), args.out)
    return 0


def cmd_mub(args) -> int:
    if args.kind == "explicit":
        if args.n != 1:
            raise UsageError("the closed-form construction is for a single qupit (-n 1)")
        mubs = mubs_explicit(args.p)
    else:
        mubs = mubs_from_partition(gen_pauli(args.p, args.n))
    if args.shift:
        mubs, _ = arrange_for_shift(mubs, args.shift)
    _emit(mub_to_json(mubs), args.out)
    return 0


def _load_inputs(args):
    if args.basis:
        basis = load_basis(args.basis)
    else:
        if args.p is None:
            raise UsageError("give --basis FILE or -p/-n/--kind")
        basis = build_basis(args.p, args.n, args.kind)
    channel = load_channel(args.channel, basis.dims)
    if channel.d != basis.d:
        raise UsageError(f"channel acts on dimension {channel.d}, basis on {basis.d}")
    return basis, channel


def cmd_estimate(args) -> int:
    basis, noise = _load_inputs(args)
    target = parse_target(args.target, basis.dims)
    # the channel file describes the noise; the implemented map is noise after the ideal gate
    channel = noise if args.channel_is_full else compose(unitary_channel(target), noise)
    plan = SamplingPlan(args.epsilon, args.delta, args.seed, args.protocol, "exact_expectation" if args.shots == "exact" else "finite_shots")
    cls = classify_hierarchy(basis)
    if args.protocol != "entanglement" and cls.label == "B":
        raise ProtocolError(
            f"protocol '{args.protocol}' needs input states from d + 1 mutually unbiased bases; a class-B basis "
            "does not supply them, use --protocol entanglement"
        )
    two_stage = basis.hermitized and args.protocol == "entanglement" and bool(clifford_map(target, basis.parent))
    if two_stage:
        result = run_estimate_hermitized(target, channel, basis, plan)
    else:
        result = run_estimate(target, channel, basis, plan)
    doc = {
        "format": "quditmc.manifest",
        "inputs": {
            "p": basis.dims.p,
            "n": basis.dims.n,
            "basis_origin": basis.origin,
            "basis_class": cls.label,
            "channel": noise.label,
            "target": args.target,
            "two_stage": two_stage,
        },
        **result.to_dict(verbose=args.verbose),
    }
    _emit(doc, args.out)
    if args.csv:
        Path(args.csv).write_text(result.csv_text())
    return 0


# --- verify suites ------------------------------------------------------------------


def suite_algebra(args) -> dict:
    rows = []
    for p, n in ([(args.p, args.n)] if args.p else [(p, n) for p in (2, 3, 5) for n in (1, 2)]):
        b = gen_pauli(p, n)
        d, eye = b.d, np.eye(b.d)
        pow_dev = max(float(np.abs(np.linalg.matrix_power(w, p) - eye).max()) for w in b.ops)
        rows.append(
            {
                "p": p,
                "n": n,
                "orthonormal_dev": float(np.abs(b.gram() - np.eye(d * d)).max()),
                "traceless_dev": float(max(abs(np.trace(w)) for w in b.ops[1:])),
                "unitary_dev": float(max(np.abs(w.conj().T @ w - eye).max() for w in b.ops)),
                "w_pow_p_dev": pow_dev,
            }
        )
    ok = all(max(r["orthonormal_dev"], r["traceless_dev"], r["unitary_dev"], r["w_pow_p_dev"]) <= 1e-10 for r in rows)
    return {"suite": "algebra", "ok": ok, "results": rows}


def suite_mub(args) -> dict:
    p, n = args.p or 3, args.n
    mubs = mubs_from_partition(gen_pauli(p, n))
    out = {"suite": "mub", "p": p, "n": n, "bases": len(mubs), "expected_overlap": 1 / np.sqrt(mubs.d), "max_overlap_deviation": mubs.max_overlap_deviation()}
    ok = out["max_overlap_deviation"] <= 1e-10
    if n == 1 and p > 2:
        explicit = mubs_explicit(p)
        out["explicit_matches_partition"] = mubs_equivalent(explicit, mubs) is not None
        ok = ok and out["explicit_matches_partition"]
        out["shift_by_delta"] = {
            str(dl): verify_proposition1(explicit, u_delta(explicit, 0, dl)).ok for dl in range(1, len(mubs))
        }
        out["group_law"] = verify_group_law(explicit).to_dict()
    out["ok"] = bool(ok)
    return out


def suite_relevance(args) -> dict:
    p, n = args.p or 3, args.n
    basis = gen_pauli(p, n)
    mubs = mubs_from_partition(basis)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for protocol in PROTOCOLS:
        for _ in range(20):
            dist = relevance_distribution(characteristic_table(protocol, haar_unitary(basis.d, rng), None, basis, mubs))
            worst = max(worst, abs(dist.probs.sum() - 1))
    clifford = {}
    for name in ("fourier", "phase", "fourier*phase"):
        u = parse_target(name, basis.dims)
        row = {}
        for protocol in PROTOCOLS:
            dist = relevance_distribution(characteristic_table(protocol, u, None, basis, mubs))
            vals = dist.support_probs
            row[protocol] = {"support": len(vals), "uniform": dist.uniform, "spread": float(vals.max() - vals.min())}
        clifford[name] = row
    d = basis.d
    expected = {"entanglement": d * d, "two_design": d * d * (d + 1), "classical": 2 * d * d}
    ok = worst <= 1e-9 and all(
        r[pr]["support"] == expected[pr] and r[pr]["spread"] <= 1e-12 for r in clifford.values() for pr in PROTOCOLS
    )
    return {"suite": "relevance", "ok": bool(ok), "max_normalization_error": worst, "clifford": clifford}


def suite_guarantee(args) -> dict:
    p, n = args.p or 3, args.n
    basis = gen_pauli(p, n)
    target = parse_target("fourier", basis.dims)
    channel = compose(unitary_channel(target), depolarizing(args.q, basis.dims))
    plan = SamplingPlan(args.epsilon, args.delta, args.seed)
    rep = verify_guarantee(target, channel, basis, plan, runs=args.runs)
    return {"suite": "guarantee", **rep.to_dict()}


def suite_hierarchy(args) -> dict:
    labels = {}
    for name, build in (
        ("pauli_p3", lambda: gen_pauli(3, 1)),
        ("gellmann", gell_mann_basis),
        ("hermitized_p3", lambda: hermitize(gen_pauli(3, 1))),
    ):
        labels[name] = classify_hierarchy(build()).label
    ok = labels == {"pauli_p3": "D", "gellmann": "A", "hermitized_p3": "E"}
    return {"suite": "hierarchy", "ok": ok, "labels": labels}


def cmd_verify(args) -> int:
    report = {
        "algebra": suite_algebra,
        "mub": suite_mub,
        "relevance": suite_relevance,
        "guarantee": suite_guarantee,
        "hierarchy": suite_hierarchy,
    }[args.suite](args)
    _emit(report, args.out)
    return 0 if report["ok"] else 1


# --- parser ---------------------------------------------------------------------


def _positive_float(text: str) -> float:
    val = float(text)
    if not val > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return val


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quditmc", description="Monte Carlo fidelity estimation for qupit gates.")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("basis", help="build an operator basis and write .basis.json")
    b.add_argument("-p", type=int, required=True)
    b.add_argument("-n", type=int, default=1)
    b.add_argument("--kind", choices=KINDS, default="pauli")
    b.add_argument("--out")
    b.set_defaults(func=cmd_basis)

    m = sub.add_parser("mub", help="build a MUB set and write .mub.json")
    m.add_argument("-p", type=int, required=True)
    m.add_argument("-n", type=int, default=1)
    m.add_argument("--kind", choices=("partition", "explicit"), default="partition")
    m.add_argument("--shift", type=int, default=0, help="re-index so U0_delta shifts every basis by this delta")
    m.add_argument("--out")
    m.set_defaults(func=cmd_mub)

    e = sub.add_parser("estimate", help="run one Monte Carlo estimate and write a manifest")
    e.add_argument("--basis", help=".basis.json file (or build one with -p/-n/--kind)")
    e.add_argument("-p", type=int)
    e.add_argument("-n", type=int, default=1)
    e.add_argument("--kind", choices=KINDS, default="pauli")
    e.add_argument("--channel", required=True, help=".channel.json noise model applied after the target")
    e.add_argument("--channel-is-full", action="store_true", help="the channel file already contains the gate")
    e.add_argument("--target", default="identity")
    e.add_argument("--protocol", choices=PROTOCOLS, default="entanglement")
    e.add_argument("--epsilon", type=_positive_float, default=0.05)
    e.add_argument("--delta", type=_positive_float, default=0.05)
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--shots", choices=("exact", "finite"), default="finite")
    e.add_argument("--verbose", action="store_true", help="include per-event records")
    e.add_argument("--csv", help="also write a one-row CSV summary")
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimate)

    v = sub.add_parser("verify", help="run an invariant suite; exit 1 on failure")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("-p", type=int)
    v.add_argument("-n", type=int, default=1)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--runs", type=int, default=200)
    v.add_argument("--epsilon", type=_positive_float, default=0.1)
    v.add_argument("--delta", type=_positive_float, default=0.1)
    v.add_argument("--q", type=float, default=0.05, help="depolarizing strength for the guarantee suite")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ProtocolError, HermitizeError, BasisError, MubError, ChannelError, _io.SchemaError, ValueError) as err:
        print(f"quditmc {args.command}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
