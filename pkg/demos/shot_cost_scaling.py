"""
How many experiments does an estimate cost?
===========================================

Compare the expected number of shots for Clifford and generic targets on
one, two and three qubits. Clifford targets cost the same at every size;
a generic unitary grows roughly with d**2.
"""

from quditmc import characteristic_table, gen_pauli, haar_unitary, relevance_distribution
from quditmc.cli import parse_target
from quditmc.relevance import expected_experiments, shot_bound

eps = delta = 0.05
cliffords = {1: "fourier*phase", 2: "fourier@0*csum@0", 3: "fourier@0*csum@0*csum@1"}

print(f"{'n':>2} {'d':>3} {'Clifford':>10} {'generic':>10} {'bound(d)':>10}")
for n in (1, 2, 3):
    basis = gen_pauli(2, n)
    cost = {}
    for name, u in (("clifford", parse_target(cliffords[n], basis.dims)), ("generic", haar_unitary(basis.d, 0))):
        dist = relevance_distribution(characteristic_table("entanglement", u, None, basis))
        cost[name] = expected_experiments(dist, eps, delta)
    print(f"{n:>2} {basis.d:>3} {cost['clifford']:>10.0f} {cost['generic']:>10.0f} {shot_bound(eps, delta, basis.d):>10.0f}")

# %%
# The Clifford column equals L = 1/(eps^2 delta) = 8000 (one shot per draw)
# and stays below the size-independent bound.
print("Clifford bound:", round(shot_bound(eps, delta), 2))
