"""Monte Carlo estimation of average gate fidelities for qupit operations.

Main entry points::

    from quditmc import gen_pauli, depolarizing, fourier, SamplingPlan, run_estimate

    basis = gen_pauli(3)
    target = fourier(3)
    noisy = compose(unitary_channel(target), depolarizing(0.1, basis.dims))
    result = run_estimate(target, noisy, basis, SamplingPlan(0.05, 0.05, seed=1))
"""

from quditmc.channels import (
    Channel,
    MeasurementOp,
    ShotRecord,
    StateDM,
    apply,
    born_probabilities,
    compose,
    dephasing,
    depolarizing,
    expectation,
    identity_channel,
    load_channel,
    measure_shots,
    process_matrix,
    save_channel,
    unitary_channel,
)
from quditmc.estimator import (
    EstimateResult,
    EventDraw,
    SamplingPlan,
    draw_events,
    run_estimate,
    run_estimate_hermitized,
    verify_guarantee,
)
from quditmc.gates import csum, fourier, haar_unitary, on_qupit, phase_gate
from quditmc.mub import (
    BasisChange,
    MubSet,
    arrange_for_shift,
    load_mubs,
    mubs_equivalent,
    mubs_explicit,
    mubs_from_partition,
    save_mubs,
    u_delta,
    verify_group_law,
    verify_proposition1,
)
from quditmc.operator_basis import (
    HierarchyClass,
    OperatorBasis,
    QupitDims,
    classify_hierarchy,
    gell_mann_basis,
    gen_pauli,
    gen_pauli_single,
    hermitize,
    joint_eigenbasis,
    load_basis,
    partition_commuting,
    save_basis,
    spectral_table,
    tensor_basis,
    mub_witness,
)
from quditmc.oracle import (
    average_fidelity,
    average_fidelity_2design,
    classical_fidelities,
    entanglement_fidelity,
    process_purity,
)
from quditmc.relevance import (
    CharacteristicTable,
    CliffordMap,
    RelevanceDistribution,
    characteristic_table,
    clifford_map,
    expected_experiments,
    hermitized_relevance,
    relevance_distribution,
    shot_bound,
)

__all__ = [
    "Channel",
    "MeasurementOp",
    "ShotRecord",
    "StateDM",
    "apply",
    "born_probabilities",
    "compose",
    "dephasing",
    "depolarizing",
    "expectation",
    "identity_channel",
    "load_channel",
    "measure_shots",
    "process_matrix",
    "save_channel",
    "unitary_channel",
    "EstimateResult",
    "EventDraw",
    "SamplingPlan",
    "draw_events",
    "run_estimate",
    "run_estimate_hermitized",
    "verify_guarantee",
    "csum",
    "fourier",
    "haar_unitary",
    "on_qupit",
    "phase_gate",
    "BasisChange",
    "MubSet",
    "arrange_for_shift",
    "load_mubs",
    "mubs_equivalent",
    "mubs_explicit",
    "mubs_from_partition",
    "save_mubs",
    "u_delta",
    "verify_group_law",
    "verify_proposition1",
    "HierarchyClass",
    "OperatorBasis",
    "QupitDims",
    "classify_hierarchy",
    "gell_mann_basis",
    "gen_pauli",
    "gen_pauli_single",
    "hermitize",
    "joint_eigenbasis",
    "load_basis",
    "partition_commuting",
    "save_basis",
    "spectral_table",
    "tensor_basis",
    "mub_witness",
    "average_fidelity",
    "average_fidelity_2design",
    "classical_fidelities",
    "entanglement_fidelity",
    "process_purity",
    "CharacteristicTable",
    "CliffordMap",
    "RelevanceDistribution",
    "characteristic_table",
    "clifford_map",
    "expected_experiments",
    "hermitized_relevance",
    "relevance_distribution",
    "shot_bound",
]

__version__ = "0.1.0"
