"""Tour of the word algebra and ground-truth moment oracles.

Words are the symbolic indices of every moment matrix: products of
measurement symbols under idempotency, cross-party commutation, and
involution.  A quantum strategy turns each word into a number Tr(tau*w),
and those numbers are what the hierarchies constrain.
"""

import numpy as np

from netnpa.scenarios import MomentOracle, Scenario, random_strategy
from netnpa.words import (
    EMPTY_WORD,
    Letter,
    concat,
    enumerate_words,
    involute,
    parse_word,
    render_word,
    scalar_letter,
    word,
)

a0 = Letter("measurement", "A", output=0, input=0)
a1 = Letter("measurement", "A", output=1, input=0)
b0 = Letter("measurement", "B", output=0, input=0)

print("== canonical forms ==")
print(f"a0 * a0          -> {render_word(word([a0, a0]))}   (projectors are idempotent)")
print(f"b0 * a0          -> {render_word(word([b0, a0]))}   (parties commute, fixed order)")
print(f"(a0 a1)^dagger   -> {render_word(involute(word([a0, a1])))}")
kappa = scalar_letter(word([a0]))
print(f"kappa^2          -> {render_word(word([kappa, kappa]))}   (scalars are NOT idempotent)")

rendered = render_word(word([kappa, a0, b0]))
print(f"render/parse     -> {rendered!r} -> {render_word(parse_word(rendered))!r}")

print("\n== word counts ==")
scenario = Scenario("bilocal", outputs=(2, 2, 2), inputs=(1, 1, 1))
for n in (1, 2, 3):
    print(f"bilocal words of length <= {n}: "
          f"{len(enumerate_words(scenario.alphabet(), n))}")

print("\n== moments of a random two-qubit-source strategy ==")
strategy = random_strategy(scenario, dims=(2, 2, 2, 2), seed=7)
oracle = MomentOracle(strategy)
wa, wc = word([a0]), word([Letter("measurement", "C", 0, 0)])
print(f"<1>        = {oracle.value(EMPTY_WORD):.6f}")
print(f"<A0>       = {oracle.value(wa):.6f}")
print(f"<C0>       = {oracle.value(wc):.6f}")
print(f"<A0 C0>    = {oracle.value(concat(wa, wc)):.6f}")
print(f"<A0><C0>   = {oracle.value(wa) * oracle.value(wc):.6f}   "
      "(equal: the two sources are independent)")

words = enumerate_words(scenario.alphabet(), 2)
G = oracle.gram(words)
print(f"\nGram matrix on {len(words)} words: min eigenvalue "
      f"{np.linalg.eigvalsh(G).min():.2e} (PSD, as every moment matrix must be)")
