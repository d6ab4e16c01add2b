import pytest

from logdiv.errors import ConfigError
from logdiv.potentials import AlphaParam, make_builtin_potential
from logdiv.schemas import BuiltinName, SuiteSizes
from logdiv.verification import MAX_DRAWS, SUITES, default_potentials, run_report

SMALL = SuiteSizes(pairs=4, points=3, triples=3, reconstruct_pairs=3)


def test_unknown_suite():
    with pytest.raises(ConfigError):
        run_report(suites=["fenchel", "no-such-suite"], sizes=SMALL)


def test_report_is_deterministic():
    a = run_report(seed=11, suites=["fenchel", "roundtrip"], sizes=SMALL)
    b = run_report(seed=11, suites=["fenchel", "roundtrip"], sizes=SMALL, max_workers=1)
    assert a.model_dump() == b.model_dump()


def test_suite_result_does_not_depend_on_the_selection():
    both = run_report(seed=3, suites=["fenchel", "roundtrip"], sizes=SMALL)
    alone = run_report(seed=3, suites=["roundtrip"], sizes=SMALL)
    assert both.suites[1].model_dump() == alone.suites[0].model_dump()


def test_results_come_back_in_request_order():
    rep = run_report(seed=0, suites=["roundtrip", "fenchel"], sizes=SMALL)
    assert [s.name for s in rep.suites] == ["roundtrip", "fenchel"]


@pytest.mark.parametrize("name", list(SUITES))
def test_every_suite_passes(name):
    rep = run_report(seed=0, suites=[name], sizes=SMALL)
    result = rep.suites[0]
    assert result.name == name
    assert result.passed, result
    assert rep.passed


def test_curvature_suite_catches_a_corrupted_hessian():
    result = run_report(seed=0, suites=["curvature"], sizes=SMALL).suites[0]
    assert result.detail["corrupted_gap"] > 1e-6
    assert result.detail["fd_consistency"] <= 1e-6


def test_tolerance_precedence():
    blanket = run_report(suites=["fenchel"], sizes=SMALL, blanket_tolerance=-1.0)
    assert not blanket.passed
    assert blanket.suites[0].tolerance == -1.0
    override = run_report(suites=["fenchel"], sizes=SMALL, blanket_tolerance=-1.0,
                          tolerances={"fenchel": 1e-12})
    assert override.passed
    assert override.suites[0].tolerance == 1e-12


def test_custom_subjects():
    rep = run_report(suites=["fenchel"], sizes=SMALL, potentials=default_potentials(3)[:2])
    assert rep.passed
    assert rep.suites[0].samples > 0


@pytest.mark.parametrize(
    "name, expected",
    [
        ("fenchel", lambda subjects: SMALL.pairs * len(subjects)),
        ("pythagoras", lambda subjects: SMALL.triples * len(subjects)),
        ("renyi", lambda subjects: SMALL.pairs * 6),
        ("reconstruction",
         lambda subjects: SMALL.reconstruct_pairs * sum(not p.alpha.is_bregman for p in subjects)),
    ],
)
def test_sampled_suites_check_every_requested_sample(name, expected):
    result = run_report(seed=2, suites=[name], sizes=SMALL).suites[0]
    assert result.samples == expected(default_potentials())
    assert result.detail["requested"] == result.samples
    assert result.passed


def test_renyi_sample_count_follows_the_pairs_size():
    sizes = SuiteSizes(pairs=12, points=1, triples=1, reconstruct_pairs=1)
    result = run_report(seed=0, suites=["renyi"], sizes=sizes).suites[0]
    # two families for each of the three regimes
    assert result.samples == 6 * 12
    assert result.passed


def test_suite_that_checks_nothing_fails():
    # in one dimension every direction is parallel to the dual tangent
    line = make_builtin_potential(BuiltinName.SIMPLEX_F_ALPHA, 1, AlphaParam(1.0))
    result = run_report(suites=["pythagoras"], sizes=SMALL, potentials=[line]).suites[0]
    assert result.samples == 0
    assert result.detail["skipped"] == MAX_DRAWS * SMALL.triples
    assert not result.passed
