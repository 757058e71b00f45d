"""Seeded Monte Carlo harness: estimator correctness against exact
references, discard policy, determinism across worker counts, and the
triviality-scan verdicts."""

import math

import pytest

from brwlab import (
    Classification,
    DomainError,
    ExcessiveDiscardError,
    GrowthCaps,
    LogDivergentLaw,
    McConfig,
    classify,
    extinction_probability,
    functional_on_outcome,
    functional_on_tree,
    grow_tree,
    mc_extinction,
    mc_importance_identity,
    mc_mean_w,
    mc_spine_slope,
    mc_triviality_scan,
    parse_functional,
    pgf_eval,
    replicate_rng,
)

# ---------------------------------------------------------------------------
# configuration contract
# ---------------------------------------------------------------------------


def test_config_rejects_degenerate_runs():
    with pytest.raises(DomainError):
        McConfig(replicates=1, depth=3, master_seed=0)
    with pytest.raises(DomainError):
        McConfig(replicates=10, depth=-1, master_seed=0)
    with pytest.raises(DomainError):
        McConfig(replicates=10, depth=3, master_seed=0, workers=0)


# ---------------------------------------------------------------------------
# martingale mean
# ---------------------------------------------------------------------------


def test_mean_w_pair_law(pair_law):
    cfg = McConfig(replicates=2000, depth=8, master_seed=11)
    s = mc_mean_w(pair_law, 1.0, cfg)
    assert s.reference == 1.0
    assert s.passed
    assert abs(s.estimate - 1.0) <= 4 * s.se
    assert s.n == 2000 and s.discarded == 0
    assert not s.unreliable


def test_mean_w_binary_is_exact(binary_law):
    cfg = McConfig(replicates=50, depth=6, master_seed=0)
    s = mc_mean_w(binary_law, 1.0, cfg)
    assert s.estimate == 1.0 and s.se == 0.0 and s.passed


def test_mean_w_flags_degenerate_regimes(heavy_law):
    cfg = McConfig(
        replicates=16, depth=2, master_seed=3, caps=GrowthCaps(max_nodes=3_000_000)
    )
    s = mc_mean_w(heavy_law, 0.0, cfg)
    assert s.unreliable
    assert "TRIVIAL_LLOGL" in s.note


def test_mean_w_se_shrinks_with_replicates(pair_law):
    small = mc_mean_w(pair_law, 1.0, McConfig(replicates=100, depth=6, master_seed=7))
    large = mc_mean_w(pair_law, 1.0, McConfig(replicates=1600, depth=6, master_seed=7))
    ratio = small.se / large.se
    assert 2.0 < ratio < 8.0  # ideal 4, allow sampling noise


def test_mean_w_deterministic_across_workers(pair_law):
    one = mc_mean_w(pair_law, 1.0, McConfig(replicates=400, depth=6, master_seed=5, workers=1))
    four = mc_mean_w(pair_law, 1.0, McConfig(replicates=400, depth=6, master_seed=5, workers=4))
    assert one.estimate == four.estimate
    assert one.se == four.se


# ---------------------------------------------------------------------------
# spine slope
# ---------------------------------------------------------------------------


def test_spine_slope_alpha_zero(pair_law):
    cfg = McConfig(replicates=200, depth=400, master_seed=3)
    s = mc_spine_slope(pair_law, 0.0, cfg)
    assert s.reference == pytest.approx(0.5)
    assert s.passed


def test_spine_slope_tilted(pair_law):
    cfg = McConfig(replicates=200, depth=800, master_seed=3)
    s = mc_spine_slope(pair_law, 1.0, cfg)
    assert s.reference == pytest.approx(0.26894142136999516, rel=1e-12)
    assert s.passed
    assert abs(s.estimate - s.reference) <= 4 * s.se


# ---------------------------------------------------------------------------
# extinction
# ---------------------------------------------------------------------------


def test_extinction_pair_law(pair_law):
    cfg = McConfig(replicates=4000, depth=30, master_seed=5)
    s = mc_extinction(pair_law, cfg)
    # reference is the depth-30 pgf iterate, already within 1e-12 of 1/4
    assert s.reference == pytest.approx(0.25, abs=1e-12)
    assert s.passed
    assert abs(s.estimate - s.reference) <= 4 * s.se


def test_extinction_reference_is_pgf_iterate(pair_law):
    cfg = McConfig(replicates=100, depth=4, master_seed=1)
    s = mc_extinction(pair_law, cfg)
    it = 0.0
    for _ in range(4):
        it = pgf_eval(pair_law, it)
    assert s.reference == pytest.approx(it, abs=1e-15)


def test_extinction_binary_is_zero(binary_law):
    s = mc_extinction(binary_law, McConfig(replicates=64, depth=10, master_seed=2))
    assert s.estimate == 0.0 and s.reference == 0.0 and s.passed


def test_extinction_critical_law(critical_law):
    assert extinction_probability(critical_law) == 1.0
    s = mc_extinction(critical_law, McConfig(replicates=3000, depth=40, master_seed=8))
    assert s.passed
    # at depth 40 the pgf iterate is still well below the limit 1
    assert 0.8 < s.reference < 1.0


# ---------------------------------------------------------------------------
# triviality scan
# ---------------------------------------------------------------------------


def test_scan_binary_is_stable(binary_law):
    cfg = McConfig(replicates=16, depth=0, master_seed=2)
    rep = mc_triviality_scan(binary_law, 1.0, (4, 8, 12), cfg)
    assert rep.verdict == "STABLE"
    assert rep.medians == (0.0, 0.0, 0.0)
    assert rep.survivors == (16, 16, 16)
    assert rep.fractions == (1.0, 1.0, 1.0)
    assert rep.agrees


def test_scan_quad_law_decays(quad_law):
    cfg = McConfig(
        replicates=48, depth=0, master_seed=2, caps=GrowthCaps(max_nodes=8_000_000)
    )
    rep = mc_triviality_scan(quad_law, 5.0, (2, 7, 12), cfg)
    assert rep.verdict == "DECAYING"
    assert rep.classification == "TRIVIAL_DRIFT"
    assert rep.agrees
    assert rep.medians[0] > rep.medians[-1]


def test_scan_pair_law_not_decaying(pair_law):
    cfg = McConfig(replicates=100, depth=0, master_seed=2)
    rep = mc_triviality_scan(pair_law, 1.0, (5, 10, 20), cfg)
    assert rep.verdict != "DECAYING"
    assert rep.agrees
    assert rep.n == 100
    assert all(0 < s <= 100 for s in rep.survivors)
    assert rep.fractions == tuple(s / 100 for s in rep.survivors)


def test_scan_rejects_bad_grids(pair_law):
    cfg = McConfig(replicates=8, depth=0, master_seed=0)
    for grid in [(), (3, 2), (2, 2), (-1, 4)]:
        with pytest.raises(DomainError):
            mc_triviality_scan(pair_law, 1.0, grid, cfg)


# ---------------------------------------------------------------------------
# importance identity
# ---------------------------------------------------------------------------


def test_importance_identities(pair_law):
    cfg = McConfig(replicates=3000, depth=2, master_seed=9)
    for text, want in [("one", 0.768), ("indicator_z:4", 0.512), ("min_z:2", 1.536)]:
        s = mc_importance_identity(pair_law, 1.0, parse_functional(text), cfg)
        assert s.reference == pytest.approx(want, abs=1e-12)
        assert s.passed, (text, s.estimate, s.reference, s.se)


def test_importance_binary_is_exact(binary_law):
    cfg = McConfig(replicates=32, depth=3, master_seed=1)
    s = mc_importance_identity(binary_law, 1.0, parse_functional("one"), cfg)
    assert s.estimate == 1.0 and s.reference == 1.0 and s.passed


def test_parse_functional_contract():
    assert parse_functional("one").kind == "one"
    assert parse_functional("indicator_z:4").param == 4
    assert parse_functional("min_z:2").kind == "min_z"
    assert parse_functional("exp_neg_max:0.5").param == 0.5
    for bad in ["", "bogus", "indicator_z", "indicator_z:x", "min_z:-1", "exp_neg_max:-2"]:
        with pytest.raises(DomainError):
            parse_functional(bad)


def test_functional_on_tree_and_outcome_agree(pair_law):
    fn = parse_functional("min_z:3")
    tree = grow_tree(pair_law, 2, GrowthCaps(), replicate_rng(4, 2))
    z = tree.generation_index[2].size
    assert functional_on_tree(fn, tree) == float(min(z, 3))
    outcome = (1, ((1, (None, None)), (0, ())))
    assert functional_on_outcome(fn, pair_law, outcome, 2) == 2.0
    assert functional_on_outcome(parse_functional("exp_neg_max:1"), pair_law, outcome, 2) == pytest.approx(math.exp(-1.0))
    dead = (0, ())
    assert functional_on_outcome(parse_functional("exp_neg_max:1"), pair_law, dead, 2) == 0.0


# ---------------------------------------------------------------------------
# discard policy
# ---------------------------------------------------------------------------


def test_excessive_discards_raise(quad_law):
    # every replicate of the quad law blows a 10-node cap by depth 5
    cfg = McConfig(
        replicates=16, depth=5, master_seed=0, caps=GrowthCaps(max_nodes=10)
    )
    with pytest.raises(ExcessiveDiscardError):
        mc_mean_w(quad_law, 1.0, cfg)


def test_summary_records_values_when_asked(pair_law):
    cfg = McConfig(replicates=50, depth=3, master_seed=6)
    s = mc_mean_w(pair_law, 1.0, cfg, keep_values=True)
    assert s.values is not None and len(s.values) == 50
    assert len(s.kept) == 50
