"""
Which basis shifts can a Clifford gate perform?
===============================================

A unitary that moves every MUB to the next one has to permute the d + 1
bases in cycles of equal length. List the permutations reachable with
Clifford gates and try to arrange each set for every shift.
"""

from collections import Counter

from quditmc import arrange_for_shift, gen_pauli, mubs_explicit, mubs_from_partition, u_delta, verify_proposition1
from quditmc.mub import MubError, clifford_permutations, permutation_cycles

for p in (2, 3, 5):
    mubs = mubs_from_partition(gen_pauli(2)) if p == 2 else mubs_explicit(p)
    perms = clifford_permutations(mubs)
    types = Counter(tuple(sorted(len(c) for c in permutation_cycles(pm))) for pm in perms)
    print(f"p = {p}: {len(perms)} permutations, cycle types {dict(types)}")
    for delta in range(1, p + 1):
        try:
            arranged, _ = arrange_for_shift(mubs, delta)
        except MubError:
            print(f"  shift by {delta}: no Clifford")
            continue
        ok = verify_proposition1(arranged, u_delta(arranged, 0, delta)).ok
        print(f"  shift by {delta}: {'holds' if ok else 'fails'} after re-indexing")
