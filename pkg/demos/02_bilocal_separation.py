"""The shared random bit separates the standard and factorisation hierarchies.

All three parties output the same uniform bit.  A single global source
reproduces this easily (it is classical), so the standard hierarchy is
feasible at every level.  Two independent sources cannot: the A-C moment
<A0 C0> = 1/2 would have to factorize into <A0><C0> = 1/4.  The
factorisation hierarchy turns that into two contradictory linear rows.
"""

from netnpa import factorisation, sdp
from netnpa.moment import (
    build_factorisation_bilocal,
    build_standard,
    pin_distribution,
)
from netnpa.scenarios import Scenario, shared_random_bit

scenario = Scenario("bilocal", outputs=(2, 2, 2), inputs=(1, 1, 1))
srb = shared_random_bit("bilocal")
print("distribution: q(000) = q(111) = 1/2, no inputs\n")

standard = pin_distribution(build_standard(scenario, 3), srb)
out = sdp.solve_feasibility(standard)
print(f"standard hierarchy, n=3:      {out.verdict.upper()}")
print(f"  ({out.evidence})\n")

fact = pin_distribution(build_factorisation_bilocal(scenario, 3), srb)
fact = factorisation.pin_linearize(fact)
out = sdp.solve_feasibility(fact)
print(f"factorisation hierarchy, n=3: {out.verdict.upper()}")
print(f"  ({out.evidence})")
print("\nThe pair of verdicts shows the hierarchy separation: the shared")
print("random bit is a fine tripartite quantum distribution but admits no")
print("bilocal model, and the pinned-linearized factorisation row catches")
print("it rigorously, with no SDP iteration needed.")
