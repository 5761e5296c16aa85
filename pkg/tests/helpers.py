"""Shared test machinery: brute-force word oracles, cached problem builds,
and hand-built strategies used as independent references."""

from __future__ import annotations

import functools
import itertools

import numpy as np

from netnpa.moment import (
    build_factorisation_bilocal,
    build_inflation,
    build_scalar_extension,
    build_standard,
    build_star_factorisation,
)
from netnpa.scenarios import QuantumStrategy, Scenario
from netnpa.words import Letter, letters_commute, word


def meas(party: str, output: int = 0, input: int = 0, copies=None) -> Letter:
    return Letter("measurement", party, output, input, copies)


# ---------------------------------------------------------------------------
# brute-force rewrite closure (the independent oracle for canonical forms)
# ---------------------------------------------------------------------------

def rewrite_closure(seq: tuple[Letter, ...]) -> set[tuple[Letter, ...]]:
    """All letter sequences reachable by swapping commuting adjacent pairs
    and collapsing equal adjacent measurement letters."""
    seen = {tuple(seq)}
    frontier = [tuple(seq)]
    while frontier:
        s = frontier.pop()
        for i in range(len(s) - 1):
            a, b = s[i], s[i + 1]
            if a != b and letters_commute(a, b):
                t = s[:i] + (b, a) + s[i + 2:]
                if t not in seen:
                    seen.add(t)
                    frontier.append(t)
            if a == b and a.is_measurement:
                t = s[:i] + (a,) + s[i + 2:]
                if t not in seen:
                    seen.add(t)
                    frontier.append(t)
    return seen


def seq_key(s: tuple[Letter, ...]):
    return (len(s), tuple(l.sort_key() for l in s))


def brute_canonical(seq: tuple[Letter, ...]) -> tuple[Letter, ...]:
    return min(rewrite_closure(seq), key=seq_key)


def all_sequences(letters, max_len):
    for n in range(max_len + 1):
        yield from itertools.product(letters, repeat=n)


# ---------------------------------------------------------------------------
# cached problem builds (structures are immutable; pins copy them)
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def cached_problem(hierarchy: str, topology: str, outputs: tuple, inputs: tuple,
                   n: int, m: int | None = None, completeness: bool = True):
    sc = Scenario(topology, outputs, inputs)
    builders = {
        "standard": lambda: build_standard(sc, n, completeness=completeness),
        "factorisation": lambda: build_factorisation_bilocal(
            sc, n, completeness=completeness),
        "scalar": lambda: build_scalar_extension(sc, n, completeness=completeness),
        "inflation": lambda: build_inflation(sc, n, m, completeness=completeness),
        "star": lambda: build_star_factorisation(sc, n, completeness=completeness),
    }
    return builders[hierarchy]()


BILOCAL_111 = ("bilocal", (2, 2, 2), (1, 1, 1))
TRIANGLE_111 = ("triangle", (2, 2, 2), (1, 1, 1))


# ---------------------------------------------------------------------------
# hand-built strategies
# ---------------------------------------------------------------------------

def singlet_pauli_strategy() -> QuantumStrategy:
    """Two singlet sources; A and C measure X or Z, B measures in the Bell
    basis.  Real matrices throughout."""
    sc = Scenario("bilocal", outputs=(2, 4, 2), inputs=(2, 1, 2))
    psi = np.array([0.0, 1.0, -1.0, 0.0]) / np.sqrt(2.0)
    rho = np.outer(psi, psi)
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    Z = np.diag([1.0, -1.0])
    pvms = {}
    for party in ("A", "C"):
        for x, obs in enumerate((X, Z)):
            w, v = np.linalg.eigh(obs)
            order = np.argsort(-w)  # outcome 0 = +1 eigenvalue
            pvms[(party, x)] = [np.outer(v[:, order[o]], v[:, order[o]])
                                for o in range(2)]
    bell = np.array([
        [1, 0, 0, 1],
        [1, 0, 0, -1],
        [0, 1, 1, 0],
        [0, 1, -1, 0],
    ]) / np.sqrt(2.0)
    pvms[("B", 0)] = [np.outer(bell[k], bell[k]) for k in range(4)]
    return QuantumStrategy(model="tensor_bilocal", scenario=sc,
                           dims=(2, 2, 2, 2), pvms=pvms, rho=rho, sigma=rho.copy())


def classical_mixture_strategy(weights, atoms, inputs_free: int = 1) -> QuantumStrategy:
    """Diagonal commuting model for a mixture of deterministic points:
    q = sum_k weights[k] * [atoms[k]] over the bilocal parties."""
    sc = Scenario("bilocal", outputs=(2, 2, 2), inputs=(1, 1, 1))
    k = len(weights)
    tau = np.diag(np.asarray(weights, dtype=float))
    pvms = {}
    for p_idx, party in enumerate(sc.parties):
        ops = []
        for o in range(2):
            ops.append(np.diag([1.0 if atoms[j][p_idx] == o else 0.0
                                for j in range(k)]))
        pvms[(party, 0)] = ops
    return QuantumStrategy(model="commutator_general", scenario=sc, dims=(k,),
                           pvms=pvms, tau=tau)
