"""Compilation of (scenario, hierarchy, level) into moment problems.

A :class:`MomentProblem` is the full symbolic encoding of a moment-matrix
feasibility question: the word index, the partition of matrix cells into
equality classes (cells whose products have equal canonical form share a
value), pinned values coming from a distribution, completeness rows
(each PVM sums to the identity), bilinear factorisation families, and,
for inflated problems, the merges induced by permutation symmetry of the
source copies.

Hierarchies
-----------
``standard_npa``
    index = words of length <= n, Hankel classes, pin at the empty word.
``factorisation_bilocal``
    standard plus bilinear pairs G[alpha, gamma] = G[alpha, 1]*G[1, gamma].
``scalar_extension``
    index over words with commuting scalar symbols kappa_alpha; the
    classes of alpha*gamma and kappa_alpha*gamma are identified.
``inflation``
    index over copy-indexed letters; classes are merged along the orbit
    of the per-source symmetric-group action, and every product whose
    connected components look like fresh copies of (a sub-network of) the
    original scenario is pinned to the matching marginal product.
``factorisation_star``
    pairwise factorisation for the three leaf parties of the star plus
    the triple family G[alpha*gamma, delta] = G[alpha*gamma, 1]*G[1, delta].
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .scenarios import Distribution, Scenario
from .words import (
    EMPTY_WORD,
    Alphabet,
    Letter,
    Word,
    act_permutation,
    concat,
    enumerate_words,
    involute,
    scalar_letter,
    word,
)

HIERARCHIES = (
    "standard_npa",
    "factorisation_bilocal",
    "scalar_extension",
    "inflation",
    "factorisation_star",
)

DEFAULT_INDEX_BUDGET = 5000


class BudgetError(RuntimeError):
    """Index would exceed the configured word budget."""


class PinConflictError(ValueError):
    """Two pinnable keys inside one equality class disagree."""


@dataclass(frozen=True)
class Row:
    """Sparse linear equality sum_k coeff_k * y[class_k] = rhs."""

    classes: tuple[int, ...]
    coeffs: tuple[float, ...]
    rhs: float
    family: str

    def signature(self):
        pairs = tuple(sorted(zip(self.classes, self.coeffs)))
        return (pairs, self.rhs)


@dataclass(frozen=True)
class FactorConstraint:
    """G[row_word, col_word] = G[row_word, 1] * G[1, col_word]."""

    row_word: Word
    col_word: Word
    cls_prod: int
    cls_row: int
    cls_col: int


@dataclass
class MomentProblem:
    scenario: Scenario
    hierarchy: str
    n: int
    m: int | None
    alphabet: Alphabet
    index: tuple[Word, ...]
    group_keys: tuple[Word, ...]          # one canonical product word per Hankel group
    group_cells: tuple[np.ndarray, ...]   # flat cell positions per group
    group_class: np.ndarray               # group -> merged class id
    cell_class: np.ndarray                # (N, N) class id per cell
    pinned: dict[int, float]
    rows: tuple[Row, ...]
    factor_pairs: tuple[FactorConstraint, ...] = ()
    factor_triples: tuple[FactorConstraint, ...] = ()
    check_products: tuple[tuple[int, tuple[int, ...]], ...] = ()
    merge_family: str = ""                # symmetry / scalar identification label
    completeness: bool = True
    linear_factor_rows: tuple[Row, ...] = ()   # filled in by pin_linearize
    flagged_bilinear: tuple[FactorConstraint, ...] = ()

    # --- derived helpers ---------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.index)

    @property
    def n_classes(self) -> int:
        return int(self.group_class.max()) + 1 if len(self.group_class) else 0

    def pos(self, w: Word) -> int:
        return self._pos[w]

    def __post_init__(self) -> None:
        self._pos = {w: i for i, w in enumerate(self.index)}
        classes: list[list[int]] = [[] for _ in range(self.n_classes)]
        for g, c in enumerate(self.group_class):
            classes[int(c)].append(g)
        self._class_groups = classes

    def class_groups(self, cls: int) -> list[int]:
        return self._class_groups[cls]

    def class_cells_flat(self, cls: int) -> np.ndarray:
        return np.concatenate([self.group_cells[g] for g in self._class_groups[cls]])

    def class_of_cell(self, row_word: Word, col_word: Word) -> int:
        return int(self.cell_class[self.pos(row_word), self.pos(col_word)])

    def representative_key(self, cls: int) -> Word:
        return self.group_keys[self._class_groups[cls][0]]

    def active_rows(self) -> tuple[Row, ...]:
        return self.rows + self.linear_factor_rows

    def describe(self) -> str:
        """Textual dump used for golden-file regression tests."""
        from .words import render_word

        lines = [
            f"hierarchy: {self.hierarchy}",
            f"scenario: {self.scenario.topology} outputs={self.scenario.outputs} "
            f"inputs={self.scenario.inputs}",
            f"level: n={self.n}" + (f" m={self.m}" if self.m else ""),
            f"index ({self.dim} words):",
        ]
        lines += [f"  {i}: {render_word(w)}" for i, w in enumerate(self.index)]
        lines.append(f"classes: {self.n_classes}")
        for cls in range(self.n_classes):
            keys = " == ".join(render_word(self.group_keys[g])
                               for g in self.class_groups(cls))
            pin = f" = {self.pinned[cls]!r}" if cls in self.pinned else ""
            lines.append(f"  [{cls}] {keys}{pin}")
        lines.append(f"rows: {len(self.rows)}")
        lines.append(f"factor_pairs: {len(self.factor_pairs)}")
        for fc in self.factor_pairs:
            lines.append(f"  ({render_word(fc.row_word)} ; {render_word(fc.col_word)})"
                         f" -> cls {fc.cls_prod} = cls {fc.cls_row} * cls {fc.cls_col}")
        lines.append(f"factor_triples: {len(self.factor_triples)}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Core builder
# ---------------------------------------------------------------------------

def _min_key(w: Word) -> Word:
    wd = involute(w)
    return w if w.sort_key() <= wd.sort_key() else wd


def _build_groups(index: Sequence[Word]):
    n = len(index)
    invols = [involute(w) for w in index]
    key_of: dict[Word, int] = {}
    keys: list[Word] = []
    cells: list[list[int]] = []
    cell_class = np.zeros((n, n), dtype=np.int32)
    for i in range(n):
        for j in range(i, n):
            k = _min_key(concat(invols[i], index[j]))
            g = key_of.get(k)
            if g is None:
                g = len(keys)
                key_of[k] = g
                keys.append(k)
                cells.append([])
            cells[g].append(i * n + j)
            if i != j:
                cells[g].append(j * n + i)
            cell_class[i, j] = cell_class[j, i] = g
    return keys, [np.asarray(c, dtype=np.int64) for c in cells], key_of, cell_class


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def _completeness_rows(scenario: Scenario, alphabet: Alphabet,
                       index: Sequence[Word], cell_class: np.ndarray,
                       pos: Mapping[Word, int]) -> list[Row]:
    """Rows sum_a G[w, A_{a|x} v] = G[w, v], deduplicated at class level."""
    n = len(index)
    # group generator letters into PVMs: (party, copies, input) -> letters
    pvm: dict[tuple, list[Letter]] = {}
    for l in alphabet.letters:
        if l.is_measurement:
            pvm.setdefault((l.party, l.copies, l.input), []).append(l)
    rows: dict = {}
    for j, v in enumerate(index):
        for (party, copies, x), letters in pvm.items():
            targets = []
            ok = True
            for l in sorted(letters, key=Letter.sort_key):
                t = concat(word([l]), v)
                tj = pos.get(t)
                if tj is None:
                    ok = False
                    break
                targets.append(tj)
            if not ok:
                continue
            for i in range(n):
                coeffs: dict[int, float] = {}
                for tj in targets:
                    c = int(cell_class[i, tj])
                    coeffs[c] = coeffs.get(c, 0.0) + 1.0
                c0 = int(cell_class[i, j])
                coeffs[c0] = coeffs.get(c0, 0.0) - 1.0
                coeffs = {c: w for c, w in coeffs.items() if w != 0.0}
                if not coeffs:
                    continue
                row = Row(tuple(sorted(coeffs)),
                          tuple(coeffs[c] for c in sorted(coeffs)),
                          0.0, "completeness")
                rows.setdefault(row.signature(), row)
    return list(rows.values())


def _source_nodes(scenario: Scenario, l: Letter,
                  inflated: bool) -> list[tuple[str, int]]:
    """(source, copy) pairs a letter uses; global pseudo-source otherwise."""
    if not inflated:
        return [("__global__", 1)]
    slots = scenario.topo.party_sources[l.party]
    return [(src, l.copies[i]) for i, src in enumerate(slots)]


def _pinnable_value(scenario: Scenario, dist: Distribution, key: Word,
                    inflated: bool,
                    marginal_cache: dict) -> float | None:
    """Value forced on a class by distribution compatibility, or None.

    The key word is split into connected components through shared source
    copies.  A component is a fresh copy of a sub-network when each party
    occurs once and parties adjacent to a common source use a common copy
    of it; its value is then the corresponding marginal of the
    distribution, and the word's value is the product over components.
    """
    letters = key.letters
    if any(not l.is_measurement for l in letters):
        return None
    if not letters:
        return 1.0
    # union-find over (source, copy) nodes
    parent: dict[tuple[str, int], tuple[str, int]] = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    nodes_of = []
    for l in letters:
        nodes = _source_nodes(scenario, l, inflated)
        nodes_of.append(nodes)
        for nd in nodes:
            parent.setdefault(nd, nd)
        for nd in nodes[1:]:
            ra, rb = find(nodes[0]), find(nd)
            if ra != rb:
                parent[ra] = rb
    comps: dict[tuple[str, int], list[int]] = {}
    for li, nodes in enumerate(nodes_of):
        comps.setdefault(find(nodes[0]), []).append(li)
    total = 1.0
    for members in comps.values():
        parties = [letters[li].party for li in members]
        if len(set(parties)) != len(parties):
            return None
        if inflated:
            # parties sharing a source in the network must share its copy
            copy_used: dict[str, set[int]] = {}
            for li in members:
                for src, cp in nodes_of[li]:
                    copy_used.setdefault(src, set()).add(cp)
            for src, cps in copy_used.items():
                feeders = set(_source_parties(scenario, src)) & set(parties)
                if len(feeders) >= 2 and len(cps) >= 2:
                    return None
        sub = tuple(sorted(parties))
        if sub not in marginal_cache:
            marginal_cache[sub] = dist.marginal(sub)
        marg = marginal_cache[sub]
        order = {p: k for k, p in enumerate(sub)}
        outs = [0] * len(sub)
        ins = [0] * len(sub)
        for li in members:
            l = letters[li]
            outs[order[l.party]] = l.output
            ins[order[l.party]] = l.input
        total *= float(marg[tuple(outs) + tuple(ins)])
    return total


def _source_parties(scenario: Scenario, source: str) -> tuple[str, ...]:
    if source == "__global__":
        return scenario.parties
    return scenario.topo.sources[source]


def _assemble(scenario: Scenario, hierarchy: str, n: int, m: int | None,
              alphabet: Alphabet, *, completeness: bool,
              budget: int, merges: Callable | None = None,
              merge_family: str = "",
              index_words: Sequence[Word] | None = None) -> MomentProblem:
    if index_words is None:
        index = enumerate_words(alphabet, n)
    else:
        index = sorted(set(index_words) | {EMPTY_WORD}, key=Word.sort_key)
    if len(index) > budget:
        raise BudgetError(
            f"index size {len(index)} exceeds budget {budget} "
            f"({hierarchy}, n={n}" + (f", m={m}" if m else "") + ")")
    keys, cells, key_of, cell_group = _build_groups(index)
    uf = _UnionFind(len(keys))
    if merges is not None:
        for g1, g2 in merges(keys, key_of):
            uf.union(g1, g2)
    # compact class ids
    root_to_cls: dict[int, int] = {}
    group_class = np.zeros(len(keys), dtype=np.int32)
    for g in range(len(keys)):
        r = uf.find(g)
        if r not in root_to_cls:
            root_to_cls[r] = len(root_to_cls)
        group_class[g] = root_to_cls[r]
    cell_class = group_class[cell_group]
    pos = {w: i for i, w in enumerate(index)}
    rows: list[Row] = []
    if completeness:
        rows = _completeness_rows(scenario, alphabet, index, cell_class, pos)
    pinned = {int(cell_class[0, 0]): 1.0}  # G[1, 1] = 1
    return MomentProblem(
        scenario=scenario, hierarchy=hierarchy, n=n, m=m, alphabet=alphabet,
        index=tuple(index), group_keys=tuple(keys), group_cells=tuple(cells),
        group_class=group_class, cell_class=cell_class, pinned=pinned,
        rows=tuple(rows), merge_family=merge_family, completeness=completeness)


# ---------------------------------------------------------------------------
# Public builders
# ---------------------------------------------------------------------------

def build_standard(scenario: Scenario, n: int, *, completeness: bool = True,
                   budget: int = DEFAULT_INDEX_BUDGET) -> MomentProblem:
    """Standard moment problem: words of length <= n, Hankel classes,
    G[1,1] = 1, completeness rows.  Hierarchy verdicts are meaningful for
    n >= 3; lower levels are allowed as diagnostics."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _assemble(scenario, "standard_npa", n, None, scenario.alphabet(),
                     completeness=completeness, budget=budget)


def _party_words(problem_index: Sequence[Word], party: str,
                 nonempty: bool = True) -> list[Word]:
    out = []
    for w in problem_index:
        if len(w) == 0:
            if not nonempty:
                out.append(w)
            continue
        if all(l.is_measurement and l.party == party for l in w.letters):
            out.append(w)
    return out


def _attach_factor_pairs(p: MomentProblem,
                         party_pairs: Iterable[tuple[str, str]]) -> list[FactorConstraint]:
    cls_empty = int(p.cell_class[0, 0])
    pairs = []
    for pa, pc in party_pairs:
        for a in _party_words(p.index, pa):
            ia = p.pos(a)
            for c in _party_words(p.index, pc):
                ic = p.pos(c)
                pairs.append(FactorConstraint(
                    a, c, int(p.cell_class[ia, ic]),
                    int(p.cell_class[ia, 0]), int(p.cell_class[0, ic])))
    return pairs


def build_factorisation_bilocal(scenario: Scenario, n: int, *,
                                completeness: bool = True,
                                budget: int = DEFAULT_INDEX_BUDGET) -> MomentProblem:
    """Standard problem plus the bilinear A-C factorisation family."""
    if scenario.topology != "bilocal":
        raise ValueError("factorisation_bilocal requires the bilocal topology")
    if n < 1:
        raise ValueError("n must be >= 1")
    p = _assemble(scenario, "factorisation_bilocal", n, None, scenario.alphabet(),
                  completeness=completeness, budget=budget)
    pairs = _attach_factor_pairs(p, scenario.topo.factor_pairs)
    return replace(p, factor_pairs=tuple(pairs))


def build_star_factorisation(scenario: Scenario, n: int, *,
                             completeness: bool = True,
                             budget: int = DEFAULT_INDEX_BUDGET) -> MomentProblem:
    """Star network: pairwise leaf factorisation plus the triple family."""
    if scenario.topology != "star4":
        raise ValueError("factorisation_star requires the star4 topology")
    if n < 4:
        raise ValueError("the star hierarchy starts at n = 4")
    p = _assemble(scenario, "factorisation_star", n, None, scenario.alphabet(),
                  completeness=completeness, budget=budget)
    pairs = _attach_factor_pairs(p, scenario.topo.factor_pairs)
    triples = []
    pa, pc, pd = scenario.topo.factor_triples[0]
    for a in _party_words(p.index, pa):
        for c in _party_words(p.index, pc):
            if len(a) + len(c) > n:
                continue
            ac = concat(a, c)
            iac = p.pos(ac)
            for d in _party_words(p.index, pd):
                idd = p.pos(d)
                triples.append(FactorConstraint(
                    ac, d, int(p.cell_class[iac, idd]),
                    int(p.cell_class[iac, 0]), int(p.cell_class[0, idd])))
    return replace(p, factor_pairs=tuple(pairs), factor_triples=tuple(triples))


def build_scalar_extension(scenario: Scenario, n: int, *,
                           completeness: bool = True,
                           budget: int = DEFAULT_INDEX_BUDGET) -> MomentProblem:
    """Scalar-extension problem over words with kappa symbols.

    The classes of alpha*gamma and kappa_alpha*gamma are identified for
    every A-word alpha (1 <= |alpha| <= n) and C-word gamma (|gamma| <=
    n), gamma empty included.  Hierarchy verdicts are meaningful for
    n >= 3; lower levels serve as diagnostics and as the target of the
    inflation-to-scalar-extension map.
    """
    if scenario.topology != "bilocal":
        raise ValueError("scalar_extension requires the bilocal topology")
    if n < 1:
        raise ValueError("n must be >= 1")
    alphabet = scenario.scalar_alphabet(n)

    def merges(keys: list[Word], key_of: dict[Word, int]):
        a_words = [w for w in enumerate_words(
            Alphabet("a", tuple(l for l in alphabet.letters
                                if l.is_measurement and l.party == "A")), n)
            if len(w) >= 1]
        c_words = enumerate_words(
            Alphabet("c", tuple(l for l in alphabet.letters
                                if l.is_measurement and l.party == "C")), n)
        out = []
        for a in a_words:
            ka = word([scalar_letter(a)])
            for c in c_words:
                k1 = _min_key(concat(a, c))
                k2 = _min_key(concat(ka, c))
                g1, g2 = key_of.get(k1), key_of.get(k2)
                if g1 is not None and g2 is not None:
                    out.append((g1, g2))
        return out

    return _assemble(scenario, "scalar_extension", n, None, alphabet,
                     completeness=completeness, budget=budget,
                     merges=merges, merge_family="scalar identification")


def _perm_group(m: int) -> list[dict[int, int]]:
    perms = []
    for images in itertools.permutations(range(1, m + 1)):
        perms.append({i + 1: images[i] for i in range(m)})
    return perms


def build_inflation(scenario: Scenario, n: int, m: int, *,
                    completeness: bool = True,
                    budget: int = DEFAULT_INDEX_BUDGET,
                    index_words: Sequence[Word] | None = None) -> MomentProblem:
    """Inflated moment problem with per-source symmetric-group merges.

    ``index_words`` restricts the index to an explicit word list (plus the
    empty word); used to host the scalar-extension image words, where the
    full order-n index over many copies would be far beyond desk scale.
    Symmetry merges are skipped for restricted indices: the permutation
    group of a large m explodes, and the restricted assignments feed a
    construction that never consults the merged classes.
    """
    if scenario.topology not in ("bilocal", "triangle"):
        raise ValueError("inflation supports the bilocal and triangle topologies")
    if n < 2 or m < 1:
        raise ValueError("inflation needs n >= 2 and m >= 1")
    if index_words is None and m > 3:
        raise BudgetError("inflation order > 3 exceeds the desk-scale budget")
    alphabet = scenario.inflated_alphabet(m)
    sources = alphabet.sources()

    def merges(keys: list[Word], key_of: dict[Word, int]):
        out = []
        group = _perm_group(m)
        for combo in itertools.product(group, repeat=len(sources)):
            if all(all(p[k] == k for k in p) for p in combo):
                continue
            perms_by_source = dict(zip(sources, combo))
            for g, k in enumerate(keys):
                img = _min_key(act_permutation(
                    k, None, alphabet=alphabet, perms_by_source=perms_by_source))
                g2 = key_of.get(img)
                if g2 is not None and g2 != g:
                    out.append((g, g2))
        return out

    p = _assemble(scenario, "inflation", n, m, alphabet,
                  completeness=completeness, budget=budget,
                  merges=merges if index_words is None else None,
                  merge_family="copy symmetry", index_words=index_words)

    # verification-only nonlinear products: diagonal words on disjoint copies
    check = _diagonal_check_products(p)
    return replace(p, check_products=tuple(check))


def _diagonal_word_copies(scenario: Scenario, w: Word) -> set[int] | None:
    """Copy index if w is a diagonal word on a single copy, else None."""
    cps: set[int] = set()
    for l in w.letters:
        if not l.is_measurement or l.copies is None:
            return None
        if len(set(l.copies)) != 1:
            return None
        cps.update(l.copies)
    return cps if len(cps) == 1 else None


def _diagonal_check_products(p: MomentProblem):
    """(product class, factor classes) for products of single-copy diagonal
    words on distinct copies; imposed only at verification time."""
    diag: dict[int, list[Word]] = {}
    for w in p.index:
        cps = _diagonal_word_copies(p.scenario, w)
        if cps:
            diag.setdefault(next(iter(cps)), []).append(w)
    out = []
    pos = {w: i for i, w in enumerate(p.index)}
    copies = sorted(diag)
    for c1, c2 in itertools.combinations(copies, 2):
        for w1 in diag[c1]:
            for w2 in diag[c2]:
                ip = pos.get(concat(w1, w2))
                if ip is None:
                    continue
                i1, i2 = pos[w1], pos[w2]
                out.append((int(p.cell_class[0, ip]),
                            (int(p.cell_class[0, i1]), int(p.cell_class[0, i2]))))
    return out


# ---------------------------------------------------------------------------
# Distribution pins
# ---------------------------------------------------------------------------

def pin_distribution(problem: MomentProblem, dist: Distribution,
                     *, tol: float = 1e-9) -> MomentProblem:
    """Pin every class whose key is forced by compatibility with ``dist``.

    Full correlators, all marginals reachable by summing outcomes, and
    (for inflated problems) products over fresh source copies are pinned.
    Signalling tables are rejected with the offending inputs named.
    """
    if dist.scenario.topology != problem.scenario.topology or \
            dist.scenario.outputs != problem.scenario.outputs or \
            dist.scenario.inputs != problem.scenario.inputs:
        raise ValueError("distribution and problem scenarios differ")
    nparties = len(problem.scenario.parties)
    if 2 * problem.n < nparties and problem.hierarchy != "inflation":
        # full-correlator words appear as cell products of length <= 2n
        raise ValueError(
            f"level n={problem.n} cannot pin the full correlators of "
            f"{nparties} parties")
    inflated = problem.hierarchy == "inflation"
    cache: dict = {}
    pinned = dict(problem.pinned)
    for cls in range(problem.n_classes):
        values = []
        for g in problem.class_groups(cls):
            v = _pinnable_value(problem.scenario, dist, problem.group_keys[g],
                                inflated, cache)
            if v is not None:
                values.append((problem.group_keys[g], v))
        if not values:
            continue
        vmin = min(v for _, v in values)
        vmax = max(v for _, v in values)
        if vmax - vmin > tol:
            wa = [w for w, v in values if v == vmin][0]
            wb = [w for w, v in values if v == vmax][0]
            raise PinConflictError(
                f"keys {wa!r} and {wb!r} of one class pin to {vmin} != {vmax}")
        if cls in pinned and abs(pinned[cls] - values[0][1]) > tol:
            raise PinConflictError(
                f"class {cls} already pinned to {pinned[cls]}, got {values[0][1]}")
        pinned[cls] = values[0][1]
    return replace(problem, pinned=pinned)


# ---------------------------------------------------------------------------
# Assignments and checking
# ---------------------------------------------------------------------------

@dataclass
class MomentAssignment:
    problem: MomentProblem
    matrix: np.ndarray

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.shape != (self.problem.dim, self.problem.dim):
            raise ValueError("assignment dimension does not match the index")
        if np.abs(self.matrix - self.matrix.T).max() > 1e-12:
            raise ValueError("assignment matrix must be symmetric")

    def class_values(self) -> np.ndarray:
        flat = self.matrix.reshape(-1)
        return np.array([
            flat[self.problem.class_cells_flat(c)].mean()
            for c in range(self.problem.n_classes)])

    def value(self, row_word: Word, col_word: Word) -> float:
        return float(self.matrix[self.problem.pos(row_word),
                                 self.problem.pos(col_word)])


def oracle_assignment(problem: MomentProblem, oracle) -> MomentAssignment:
    """Fill the moment matrix from a strategy oracle.

    Uses the Gram fast path when the oracle provides one; falls back to
    per-class evaluation of the product words.
    """
    n = problem.dim
    if hasattr(oracle, "gram"):
        return MomentAssignment(problem, oracle.gram(problem.index))
    mat = np.zeros((n, n))
    flat = mat.reshape(-1)
    for g, key in enumerate(problem.group_keys):
        flat[problem.group_cells[g]] = oracle.value(key)
    return MomentAssignment(problem, (mat + mat.T) / 2)


@dataclass
class ResidualReport:
    hankel: float
    merges: float          # symmetry orbits / scalar identifications
    pins: float
    completeness: float
    factorisation: float
    extended_products: float
    min_eigenvalue: float

    def families(self) -> dict[str, float]:
        return {
            "hankel": self.hankel,
            "merges": self.merges,
            "pins": self.pins,
            "completeness": self.completeness,
            "factorisation": self.factorisation,
            "extended_products": self.extended_products,
            "psd": max(0.0, -self.min_eigenvalue),
        }

    def max_residual(self) -> float:
        return max(self.families().values())

    def ok(self, tol: float) -> bool:
        return self.max_residual() <= tol

    def __str__(self) -> str:
        rows = [f"  {name:<18} {value: .3e}"
                for name, value in self.families().items()]
        return "residuals:\n" + "\n".join(rows)


def check_assignment(problem: MomentProblem, assignment: MomentAssignment,
                     tol: float = 1e-8) -> ResidualReport:
    """Per-family maximal residuals of an assignment (tol is advisory;
    all families are always evaluated and reported)."""
    X = assignment.matrix
    flat = X.reshape(-1)
    hankel = 0.0
    merge_res = 0.0
    group_means = np.zeros(len(problem.group_keys))
    for g, cells in enumerate(problem.group_cells):
        vals = flat[cells]
        group_means[g] = vals.mean()
        if len(vals) > 1:
            hankel = max(hankel, float(vals.max() - vals.min()))
    class_vals = np.zeros(problem.n_classes)
    for cls in range(problem.n_classes):
        gs = problem.class_groups(cls)
        means = group_means[gs]
        class_vals[cls] = means.mean()
        if len(gs) > 1:
            merge_res = max(merge_res, float(means.max() - means.min()))
    pins = 0.0
    for cls, val in problem.pinned.items():
        cells = problem.class_cells_flat(cls)
        pins = max(pins, float(np.abs(flat[cells] - val).max()))
    completeness = 0.0
    for row in problem.active_rows():
        s = sum(c * class_vals[k] for k, c in zip(row.classes, row.coeffs))
        completeness = max(completeness, abs(s - row.rhs))
    fact = 0.0
    for fc in problem.factor_pairs + problem.factor_triples:
        fact = max(fact, abs(class_vals[fc.cls_prod]
                             - class_vals[fc.cls_row] * class_vals[fc.cls_col]))
    ext = 0.0
    for cls_prod, factors in problem.check_products:
        prod = 1.0
        for c in factors:
            prod *= class_vals[c]
        ext = max(ext, abs(class_vals[cls_prod] - prod))
    eigmin = float(np.linalg.eigvalsh((X + X.T) / 2).min())
    return ResidualReport(hankel=hankel, merges=merge_res, pins=pins,
                          completeness=completeness, factorisation=fact,
                          extended_products=ext, min_eigenvalue=eigmin)


# ---------------------------------------------------------------------------
# Inflation -> scalar extension
# ---------------------------------------------------------------------------

def _check_scalar_bound(scenario: Scenario, n: int, m: int) -> None:
    d = len([l for l in scenario.alphabet().letters if l.party == "A"])
    bound = sum(d ** i for i in range(n + 1))
    if m < bound:
        raise ValueError(
            f"inflation order m={m} is below the scalar-extension bound "
            f"sum d^i = {bound} (d={d}, n={n})")


def scalar_key_image(u: Word, m: int, scenario: Scenario) -> Word:
    """Image of a scalar-extension product word inside the inflated algebra.

    Measurement blocks act on source copy 1; every scalar-symbol
    *occurrence* expands to its payload on a fresh copy (2, 3, ... in
    order of appearance).  Fresh copies make each scalar occurrence an
    isolated source component, so on inflation moment values the symbol
    contributes the factor Tr(tau * payload), exactly the scalar it
    abbreviates.
    """
    next_copy = 2
    out: list[Letter] = []
    for l in u.letters:
        if l.is_scalar:
            if next_copy > m:
                raise ValueError(
                    f"word {u!r} needs more than m={m} source copies")
            for pl in l.payload.letters:
                out.append(Letter(pl.kind, pl.party, pl.output, pl.input,
                                  (next_copy,)))
            next_copy += 1
        else:
            nslots = len(scenario.topo.party_sources[l.party])
            out.append(Letter(l.kind, l.party, l.output, l.input,
                              (1,) * nslots))
    return word(out)


def _split_in_index(v: Word, pos: Mapping[Word, int]) -> tuple[int, int] | None:
    """Cell (i, j) of an inflation problem whose product is ``v``."""
    letters = v.letters
    for h in range(len(letters) + 1):
        left = involute(word(letters[:h]))
        right = word(letters[h:])
        i, j = pos.get(left), pos.get(right)
        if i is not None and j is not None:
            return i, j
    return None


def required_inflation_words(scenario: Scenario, n: int, m: int) -> list[Word]:
    """Inflated index over which a Xi assignment must be built so that
    :func:`inflation_to_scalar_extension` can read off every value."""
    _check_scalar_bound(scenario, n, m)
    omega = build_scalar_extension(scenario, n)
    needed: set[Word] = {EMPTY_WORD}
    for key in omega.group_keys:
        v = scalar_key_image(key, m, scenario)
        h = (len(v) + 1) // 2
        needed.add(involute(word(v.letters[:h])))
        needed.add(word(v.letters[h:]))
    return sorted(needed, key=Word.sort_key)


def inflation_to_scalar_extension(xi: MomentAssignment, n: int, m: int, *,
                                  input_tol: float = 1e-8) -> MomentAssignment:
    """Construct a scalar-extension assignment from an inflation assignment.

    Each equality class of the order-n scalar problem takes the inflation
    value of the image of its product key under :func:`scalar_key_image`.
    Requires m >= sum_i d^i (d = number of A letters), which leaves room
    for one fresh copy per scalar occurrence in any product key.  The
    input must satisfy its own problem within ``input_tol`` and must
    index enough words to locate every image value (see
    :func:`required_inflation_words`).
    """
    problem = xi.problem
    if problem.hierarchy != "inflation":
        raise ValueError("source assignment must be an inflation assignment")
    scenario = problem.scenario
    _check_scalar_bound(scenario, n, m)
    report = check_assignment(problem, xi)
    if max(report.hankel, report.merges, report.completeness) > input_tol:
        raise ValueError(
            f"inflation assignment violates its own constraints "
            f"(residual {report.max_residual():.3e} > {input_tol:g})")
    omega = build_scalar_extension(scenario, n)
    pos = {w: i for i, w in enumerate(xi.problem.index)}
    values = np.zeros(omega.n_classes)
    for cls in range(omega.n_classes):
        g = omega.class_groups(cls)[0]
        v = scalar_key_image(omega.group_keys[g], m, scenario)
        cell = _split_in_index(v, pos)
        if cell is None:
            raise ValueError(
                f"inflation index cannot evaluate the image word {v!r}; "
                "build the assignment over required_inflation_words(...)")
        values[cls] = xi.matrix[cell]
    mat = values[omega.cell_class]
    return MomentAssignment(omega, (mat + mat.T) / 2)
