"""
Hermitian observables from the qutrit Pauli basis
=================================================

Turn each pair W, W^dagger into two Hermitian operators, check where the
resulting bases sit in the hierarchy, and run the two-stage estimator on a
dephased phase gate.
"""

import numpy as np

from quditmc import (
    SamplingPlan,
    classify_hierarchy,
    compose,
    dephasing,
    gell_mann_basis,
    gen_pauli,
    hermitize,
    phase_gate,
    run_estimate_hermitized,
    tensor_basis,
    unitary_channel,
)

# %%
# Hierarchy labels for a few bases.
for name, basis in [
    ("Pauli, one qutrit", gen_pauli(3)),
    ("Gell-Mann", gell_mann_basis()),
    ("Hermitized, one qutrit", hermitize(gen_pauli(3))),
    ("Hermitized, two qutrits", hermitize(gen_pauli(3, 2))),
    ("Hermitized local, two qutrits", tensor_basis(hermitize(gen_pauli(3)), 2)),
]:
    print(f"{name:>30}: class {classify_hierarchy(basis).label}")

# %%
# Spectra: sqrt(2) Im(omega^a) for H, sqrt(2) Re(omega^a) for H-bar.
h = hermitize(gen_pauli(3))
print(h.labels[1], np.round(np.linalg.eigvalsh(h.ops[1]), 4))
print(h.labels[2], np.round(np.linalg.eigvalsh(h.ops[2]), 4))

# %%
# Two-stage sampling: uniform input, then one of two outputs.
u = phase_gate(3)
channel = compose(unitary_channel(u), dephasing(0.1, h.dims))
res = run_estimate_hermitized(u, channel, h, SamplingPlan(0.05, 0.05, seed=7))
print(f"estimate {res.fav_estimate:.4f}, exact {res.oracle['fav']:.4f}, shots {res.total_shots}")
