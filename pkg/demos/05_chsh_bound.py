"""Tsirelson's bound from the standard hierarchy.

Sanity check against a value known in closed form: maximising the CHSH
functional over level-2 moment matrices returns 2*sqrt(2).  The third
party is trivial (one input, one output), reducing the scenario to the
bipartite Bell setting.
"""

import numpy as np

from netnpa import sdp
from netnpa.moment import build_standard
from netnpa.scenarios import Scenario
from netnpa.words import EMPTY_WORD, Letter, concat, word

scenario = Scenario("bell3", outputs=(2, 2, 1), inputs=(2, 2, 1))
problem = build_standard(scenario, 2)
print(f"level-2 index: {problem.dim} words, {problem.n_classes} classes")

objective: dict[int, float] = {}
for x in range(2):
    for y in range(2):
        sign = -1.0 if x == 1 and y == 1 else 1.0
        for a in range(2):
            for b in range(2):
                w = concat(word([Letter("measurement", "A", a, x)]),
                           word([Letter("measurement", "B", b, y)]))
                cls = problem.class_of_cell(EMPTY_WORD, w)
                objective[cls] = objective.get(cls, 0.0) + sign * (-1.0) ** (a + b)

value, _witness = sdp.maximize_linear(problem, objective)
print(f"max CHSH value:  {value:.9f}")
print(f"2*sqrt(2)     :  {2 * np.sqrt(2):.9f}")
print(f"difference    :  {abs(value - 2 * np.sqrt(2)):.2e}")
