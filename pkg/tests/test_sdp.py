"""SDP compilation, solving, projection, and SDPA export."""

import os

import numpy as np
import pytest

from netnpa import factorisation
from netnpa.moment import build_standard, oracle_assignment, pin_distribution
from netnpa.scenarios import (
    MomentOracle,
    Scenario,
    random_strategy,
    shared_random_bit,
)
from netnpa.sdp import (
    AffineSdp,
    SdpRow,
    SdpStructureError,
    compile,
    export_sdpa,
    maximize_linear,
    parse_sdpa,
    project_psd,
    propagated_values,
    solve_feasibility,
)
from netnpa.words import EMPTY_WORD, Letter, concat, word

from helpers import BILOCAL_111, cached_problem, meas

BILOCAL = Scenario(*BILOCAL_111)


# --- compile -----------------------------------------------------------------

def test_compile_counts_bell3_n1():
    p = cached_problem("standard", "bell3", (2, 2, 2), (1, 1, 1), 1)
    s = compile(p)
    # hand count on the 7-word index: 28 upper cells collapse into 22
    # classes (6 tie rows), one pin, 18 deduplicated completeness rows
    n_upper = 7 * 8 // 2
    assert len(s.rows) == (n_upper - p.n_classes) + 1 + len(p.rows)
    assert len(s.rows) == 6 + 1 + 18


def test_compile_rejects_bilinear():
    p = cached_problem("factorisation", *BILOCAL_111, 3)
    with pytest.raises(SdpStructureError, match="linearize"):
        compile(p)


def test_compile_linearized_factorisation():
    p = pin_distribution(cached_problem("factorisation", *BILOCAL_111, 3),
                         shared_random_bit("bilocal"))
    lp = factorisation.pin_linearize(p)
    s = compile(lp)  # all pairs resolved; compiles fine
    assert s.dim == p.dim


def test_compile_scalar_extension_is_linear():
    p = cached_problem("scalar", *BILOCAL_111, 2)
    s = compile(p)
    assert s.dim == p.dim


# --- project_psd ---------------------------------------------------------------

def test_project_psd_examples():
    out = project_psd(np.diag([1.0, -1.0]))
    assert np.abs(out - np.diag([1.0, 0.0])).max() < 1e-14
    rng = np.random.default_rng(0)
    M = rng.normal(size=(6, 6))
    M = (M + M.T) / 2
    P = project_psd(M)
    w = np.linalg.eigvalsh(M)
    assert np.linalg.eigvalsh(P).min() > -1e-12
    # distance equals the negative-eigenvalue mass
    assert abs(np.linalg.norm(M - P) ** 2 - (w[w < 0] ** 2).sum()) < 1e-10
    psd = P + 1e-3 * np.eye(6)
    assert np.abs(project_psd(psd) - psd).max() < 1e-12


def test_project_psd_nonexpansive():
    rng = np.random.default_rng(1)
    for _ in range(5):
        A = rng.normal(size=(5, 5))
        B = rng.normal(size=(5, 5))
        A, B = (A + A.T) / 2, (B + B.T) / 2
        assert (np.linalg.norm(project_psd(A) - project_psd(B))
                <= np.linalg.norm(A - B) + 1e-12)


def test_project_psd_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        project_psd(np.array([[0.0, 1.0], [0.0, 0.0]]))


# --- feasibility ----------------------------------------------------------------

def test_feasible_oracle_pinned_problem():
    st = random_strategy(BILOCAL, (2, 2, 2, 2), 31)
    orc = MomentOracle(st)
    p = pin_distribution(cached_problem("standard", *BILOCAL_111, 3), orc.born())
    out = solve_feasibility(p)
    assert out.verdict == "feasible"
    assert out.residuals.max_residual() < 1e-7


def test_srb_standard_feasible_vs_factorisation_infeasible():
    srb = shared_random_bit("bilocal")
    std = pin_distribution(cached_problem("standard", *BILOCAL_111, 3), srb)
    out_std = solve_feasibility(std)
    assert out_std.verdict == "feasible"
    fac = pin_distribution(cached_problem("factorisation", *BILOCAL_111, 3), srb)
    out_fac = solve_feasibility(factorisation.pin_linearize(fac))
    assert out_fac.verdict == "infeasible"
    assert out_fac.t_star <= -0.05


def test_infeasibility_monotone_in_level():
    srb = shared_random_bit("bilocal")
    for n in (3, 4):
        p = pin_distribution(cached_problem("factorisation", *BILOCAL_111, n), srb)
        out = solve_feasibility(factorisation.pin_linearize(p))
        assert out.verdict == "infeasible"


def test_engines_agree_on_multi_input_instance():
    sc = Scenario("bilocal", (2, 2, 2), (2, 1, 1))
    st = random_strategy(sc, (2, 2, 2, 2), 5)
    p = pin_distribution(build_standard(sc, 2), MomentOracle(st).born())
    out_c = solve_feasibility(p, engine="cvxopt")
    out_p = solve_feasibility(p, engine="projection", max_iter=20000)
    assert out_c.verdict == "feasible"
    assert out_p.verdict == "feasible"
    assert out_p.residuals.max_residual() < 1e-6


def test_solver_deterministic():
    st = random_strategy(BILOCAL, (2, 2, 2, 2), 31)
    p = pin_distribution(cached_problem("standard", *BILOCAL_111, 3),
                         MomentOracle(st).born())
    out1 = solve_feasibility(p)
    out2 = solve_feasibility(p)
    assert out1.verdict == out2.verdict
    assert out1.t_star == out2.t_star
    assert np.array_equal(out1.witness, out2.witness)


def test_propagated_values_match_oracle():
    st = random_strategy(BILOCAL, (2, 2, 2, 2), 3)
    orc = MomentOracle(st)
    p = pin_distribution(cached_problem("standard", *BILOCAL_111, 3), orc.born())
    known, contradiction = propagated_values(p)
    assert contradiction is None
    vals = oracle_assignment(p, orc).class_values()
    mask = ~np.isnan(known)
    assert np.abs(known[mask] - vals[mask]).max() < 1e-10


# --- CHSH -----------------------------------------------------------------------

def chsh_problem_and_objective(level=2):
    sc = Scenario("bell3", (2, 2, 1), (2, 2, 1))
    p = cached_problem("standard", "bell3", (2, 2, 1), (2, 2, 1), level)
    obj: dict[int, float] = {}
    for x in range(2):
        for y in range(2):
            sign = -1.0 if x == 1 and y == 1 else 1.0
            for a in range(2):
                for b in range(2):
                    w = concat(word([Letter("measurement", "A", a, x)]),
                               word([Letter("measurement", "B", b, y)]))
                    cls = p.class_of_cell(EMPTY_WORD, w)
                    obj[cls] = obj.get(cls, 0.0) + sign * (-1.0) ** (a + b)
    return p, obj


def test_chsh_tsirelson_level2():
    p, obj = chsh_problem_and_objective()
    value, X = maximize_linear(p, obj)
    assert abs(value - 2 * np.sqrt(2)) < 1e-6


# --- SDPA export ------------------------------------------------------------------

def test_sdpa_golden_minimal_file(tmp_path):
    s = AffineSdp(dim=1, rows=(SdpRow(((0, 0),), (1.0,), 1.0),))
    path = tmp_path / "one.dat-s"
    export_sdpa(s, str(path))
    golden = os.path.join(os.path.dirname(__file__), "golden", "one_by_one.dat-s")
    with open(golden) as fh:
        assert path.read_text() == fh.read()


@pytest.mark.parametrize("fixture", ["standard-bell3", "factorisation-srb",
                                     "scalar", "inflation", "chsh"])
def test_sdpa_roundtrip_byte_exact(tmp_path, fixture):
    if fixture == "standard-bell3":
        problem = cached_problem("standard", "bell3", (2, 2, 2), (1, 1, 1), 2)
        s = compile(problem)
    elif fixture == "factorisation-srb":
        p = pin_distribution(cached_problem("factorisation", *BILOCAL_111, 3),
                             shared_random_bit("bilocal"))
        s = compile(factorisation.pin_linearize(p))
    elif fixture == "scalar":
        s = compile(cached_problem("scalar", *BILOCAL_111, 2))
    elif fixture == "inflation":
        s = compile(cached_problem("inflation", *BILOCAL_111, 2, 2))
    else:
        p, obj = chsh_problem_and_objective()
        s = compile(p, objective=obj)
    path1 = tmp_path / "a.dat-s"
    path2 = tmp_path / "b.dat-s"
    export_sdpa(s, str(path1))
    parsed = parse_sdpa(str(path1))
    assert parsed.dim == s.dim
    assert parsed.rows == s.rows
    assert parsed.objective == s.objective
    assert parsed.objective_cells == s.objective_cells
    assert parsed.objective_coeffs == s.objective_coeffs
    export_sdpa(parsed, str(path2))
    assert path1.read_bytes() == path2.read_bytes()


def test_parsed_sdp_cannot_be_solved_directly(tmp_path):
    s = AffineSdp(dim=1, rows=(SdpRow(((0, 0),), (1.0,), 1.0),))
    path = tmp_path / "x.dat-s"
    export_sdpa(s, str(path))
    with pytest.raises(SdpStructureError, match="external"):
        solve_feasibility(parse_sdpa(str(path)))
