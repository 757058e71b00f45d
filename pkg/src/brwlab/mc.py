"""Monte Carlo estimators with exact references where one exists.

Seeding: replicate ``r`` always draws from ``replicate_rng(master_seed,
r)``; results are merged in replicate order, so estimates are
bit-identical for any worker count.  Replicates whose tree growth hits
the node cap are discarded, and a run refusing more than 1% of its
replicates aborts with ``ExcessiveDiscardError`` rather than report a
biased estimate.

Agreement bands are four standard errors wide.  A failed band on a
sound implementation is a once-per-tens-of-thousands event, so ``passed
= False`` flags a defect, not noise; ``unreliable = True`` marks runs
whose estimand has heavy tails (the mean-of-W check outside the
nontrivial-limit regime), where the band is not meaningful.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .brw import GrowthCaps, LabelledTree, _draw_offspring, grow_tree, martingale_trajectory
from .errors import DomainError, ExcessiveDiscardError, PopulationCapError
from .offspring import (
    Classification,
    FiniteLaw,
    Law,
    classify,
    pgf_eval,
    validate_law,
)
from .oracle import (
    ENUM_CAP,
    count_outcomes,
    enumerate_trees,
    generation_positions,
)
from .rng import replicate_rng
from .spine import grow_spined_tree, sample_spine_walk

# population size at which survival is resolved analytically instead of
# by per-individual simulation (the remaining-survival law is exact)
_ANALYTIC_SWITCH = 256

_DISCARD_LIMIT = 0.01

_ORACLE_REF_CAP = 200_000

_DISCARDED = object()


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return float("inf")


@dataclass(frozen=True)
class McConfig:
    replicates: int
    depth: int
    master_seed: int
    caps: GrowthCaps = field(default_factory=GrowthCaps)
    workers: int = 1

    def __post_init__(self):
        if self.replicates < 2:
            raise DomainError(
                f"replicates must be >= 2 (standard error undefined otherwise), "
                f"got {self.replicates}"
            )
        if self.depth < 0:
            raise DomainError(f"depth must be >= 0, got {self.depth}")
        if self.workers < 1:
            raise DomainError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class McSummary:
    estimator: str
    estimate: float
    se: float
    n: int
    discarded: int
    master_seed: int
    reference: float | None
    passed: bool | None
    unreliable: bool = False
    note: str = ""
    kept: tuple[int, ...] = ()
    values: np.ndarray | None = None


def _run_replicates(
    cfg: McConfig,
    one: Callable[[np.random.Generator], object],
    index_offset: int = 0,
) -> tuple[list, list[int], int]:
    """Per-replicate results in replicate order: (kept values, kept ids,
    discarded count).  Cap-hit replicates are discarded."""

    def run(r: int):
        rng = replicate_rng(cfg.master_seed, r + index_offset)
        try:
            return one(rng)
        except PopulationCapError:
            return _DISCARDED

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            raw = list(pool.map(run, range(cfg.replicates)))
    else:
        raw = [run(r) for r in range(cfg.replicates)]
    kept = [(r, v) for r, v in enumerate(raw) if v is not _DISCARDED]
    discarded = cfg.replicates - len(kept)
    if discarded > _DISCARD_LIMIT * cfg.replicates:
        raise ExcessiveDiscardError(discarded, cfg.replicates)
    return [v for _, v in kept], [r for r, _ in kept], discarded


def _mean_se(values: Sequence[float]) -> tuple[float, float, int]:
    arr = np.asarray(values, dtype=np.float64)
    n = arr.size
    if n == 0:
        raise DomainError("no replicates survived; nothing to estimate")
    est = float(np.mean(arr))
    se = float(np.std(arr, ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return est, se, n


def _band(estimate: float, reference: float, se: float) -> bool:
    return abs(estimate - reference) <= 4.0 * se


def _summary(estimator, law_values, discarded, cfg, reference, kept, keep_values,
             unreliable=False, note="", se_extra=0.0) -> McSummary:
    est, se, n = _mean_se(law_values)
    passed = None
    if reference is not None and math.isfinite(reference):
        passed = _band(est, reference, math.hypot(se, se_extra))
    return McSummary(
        estimator=estimator,
        estimate=est,
        se=se,
        n=n,
        discarded=discarded,
        master_seed=cfg.master_seed,
        reference=reference,
        passed=passed,
        unreliable=unreliable,
        note=note,
        kept=tuple(kept),
        values=np.asarray(law_values, dtype=np.float64) if keep_values else None,
    )


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def mc_mean_w(law: Law, alpha: float, cfg: McConfig, keep_values: bool = False) -> McSummary:
    """Sample mean of ``W_depth``; reference ``E[W_n] = 1`` exactly."""
    law = validate_law(law)
    profile = classify(law, alpha)

    def one(rng):
        tree = grow_tree(law, cfg.depth, cfg.caps, rng)
        traj = martingale_trajectory(tree, alpha, profile.log_m)
        return _safe_exp(traj.log_w[cfg.depth])

    values, kept, discarded = _run_replicates(cfg, one)
    unreliable = profile.classification is not Classification.NONTRIVIAL
    note = (
        ""
        if not unreliable
        else f"classification {profile.classification.name}: W_n is heavy-tailed "
        "or degenerate here, the four-sigma band is not a reliable gate"
    )
    return _summary("mean_w", values, discarded, cfg, 1.0, kept, keep_values,
                    unreliable=unreliable, note=note)


def mc_spine_slope(law: Law, alpha: float, cfg: McConfig, keep_values: bool = False) -> McSummary:
    """Mean of ``S(xi_depth)/depth`` over distinguished-ray walks; the
    reference is the drift ``-m'(alpha)/m(alpha)``."""
    law = validate_law(law)
    if cfg.depth < 1:
        raise DomainError("spine slope needs depth >= 1")
    profile = classify(law, alpha)
    if not math.isfinite(profile.drift):
        raise DomainError("drift undefined (tilted mass overflow); no slope reference")

    def one(rng):
        return float(sample_spine_walk(law, alpha, cfg.depth, rng)[-1]) / cfg.depth

    values, kept, discarded = _run_replicates(cfg, one)
    return _summary("spine_slope", values, discarded, cfg, profile.drift, kept, keep_values)


def mc_extinction(law: Law, cfg: McConfig, keep_values: bool = False) -> McSummary:
    """Fraction of replicates extinct by ``depth``; reference is the exact
    ``depth``-fold pgf iterate at 0.

    Populations are simulated individual by individual only while small;
    past ``_ANALYTIC_SWITCH`` particles the remaining extinction event is
    drawn from its exact probability ``f^(remaining)(0)^Z``, which leaves
    the sampled law unchanged and bounds the cost per replicate.
    """
    law = validate_law(law)
    f_iter = [0.0]
    for _ in range(cfg.depth):
        f_iter.append(pgf_eval(law, f_iter[-1]))

    def one(rng):
        z = 1
        for g in range(cfg.depth):
            if z == 0:
                return 1.0
            if z > _ANALYTIC_SWITCH:
                return 1.0 if rng.random() < f_iter[cfg.depth - g] ** z else 0.0
            _, counts = _draw_offspring(law, z, rng)
            z = int(counts.sum())
        return 1.0 if z == 0 else 0.0

    values, kept, discarded = _run_replicates(cfg, one)
    return _summary("extinction", values, discarded, cfg, f_iter[cfg.depth], kept, keep_values)


# ---------------------------------------------------------------------------
# triviality scan
# ---------------------------------------------------------------------------

_STABLE_BAND = 0.5  # nats
_DECAY_DROP = 1.0  # nats
_DECAY_WIGGLE = 0.1  # nats of non-monotonicity tolerated


@dataclass(frozen=True)
class TrivialityReport:
    estimator: str
    alpha: float
    grid: tuple[int, ...]
    medians: tuple[float, ...]  # median log W among survivors, per depth
    means: tuple[float, ...]  # mean log W among survivors, per depth
    survivors: tuple[int, ...]
    fractions: tuple[float, ...]  # surviving fraction of kept replicates
    n: int
    discarded: int
    master_seed: int
    verdict: str
    classification: str
    agrees: bool
    values: np.ndarray | None = None  # (replicate, grid) log_w matrix
    kept: tuple[int, ...] = ()


def _scan_verdict(medians: Sequence[float]) -> str:
    if any(not math.isfinite(x) for x in medians):
        return "INCONCLUSIVE"
    if max(abs(x - medians[0]) for x in medians) <= _STABLE_BAND:
        return "STABLE"
    drops = all(
        medians[i + 1] <= medians[i] + _DECAY_WIGGLE for i in range(len(medians) - 1)
    )
    if drops and medians[0] - medians[-1] >= _DECAY_DROP:
        return "DECAYING"
    return "INCONCLUSIVE"


def mc_triviality_scan(
    law: Law,
    alpha: float,
    grid: Sequence[int],
    cfg: McConfig,
    keep_values: bool = False,
) -> TrivialityReport:
    """Survivor-median ``log W_n`` over a depth grid, with a coarse verdict.

    STABLE needs every survivor median within half a nat of the first;
    DECAYING needs a monotone drop of at least one nat end to end;
    everything else (including any grid depth with no survivors) is
    INCONCLUSIVE.  ``agrees`` records consistency with the analytic
    classification: a nontrivial limit must not look DECAYING, a trivial
    one must not look STABLE, and for other classifications any verdict
    is acceptable.
    """
    law = validate_law(law)
    grid = tuple(int(d) for d in grid)
    if not grid or any(d < 0 for d in grid) or tuple(sorted(set(grid))) != grid:
        raise DomainError("depth grid must be sorted, distinct, nonnegative")
    profile = classify(law, alpha)
    depth_max = grid[-1]
    cols = np.asarray(grid, dtype=np.int64)

    def one(rng):
        tree = grow_tree(law, depth_max, cfg.caps, rng)
        traj = martingale_trajectory(tree, alpha, profile.log_m)
        return traj.log_w[cols]

    rows, kept, discarded = _run_replicates(cfg, one)
    matrix = np.vstack(rows) if rows else np.empty((0, len(grid)))
    medians, means, survivors, fractions = [], [], [], []
    for j in range(len(grid)):
        col = matrix[:, j]
        alive = col[np.isfinite(col)]
        survivors.append(int(alive.size))
        fractions.append(alive.size / len(rows) if rows else float("nan"))
        medians.append(float(np.median(alive)) if alive.size else float("nan"))
        means.append(float(np.mean(alive)) if alive.size else float("nan"))
    verdict = _scan_verdict(medians)
    cls = profile.classification
    if cls is Classification.NONTRIVIAL:
        agrees = verdict != "DECAYING"
    elif cls in (
        Classification.TRIVIAL_LLOGL,
        Classification.TRIVIAL_DRIFT,
        Classification.TRIVIAL_DRIFT_BOUNDARY,
    ):
        agrees = verdict != "STABLE"
    else:
        agrees = True
    return TrivialityReport(
        estimator="triviality_scan",
        alpha=float(alpha),
        grid=grid,
        medians=tuple(medians),
        means=tuple(means),
        survivors=tuple(survivors),
        fractions=tuple(fractions),
        n=len(rows),
        discarded=discarded,
        master_seed=cfg.master_seed,
        verdict=verdict,
        classification=cls.name,
        agrees=agrees,
        values=matrix if keep_values else None,
        kept=tuple(kept),
    )


# ---------------------------------------------------------------------------
# importance identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Functional:
    """Bounded tree statistic evaluated at the final generation."""

    name: str
    kind: str
    param: float = 0.0


def parse_functional(text: str) -> Functional:
    """Parse ``one``, ``indicator_z:K``, ``min_z:K`` or ``exp_neg_max:B``."""
    head, _, arg = text.partition(":")
    if head == "one":
        if arg:
            raise DomainError("functional 'one' takes no parameter")
        return Functional(text, "one")
    try:
        if head == "indicator_z":
            k = int(arg)
            if k < 0:
                raise ValueError
            return Functional(text, "indicator_z", float(k))
        if head == "min_z":
            k = int(arg)
            if k < 1:
                raise ValueError
            return Functional(text, "min_z", float(k))
        if head == "exp_neg_max":
            value = float(arg)
            if not math.isfinite(value) or value < 0:
                raise ValueError
            return Functional(text, "exp_neg_max", value)
    except ValueError:
        raise DomainError(f"bad functional parameter in {text!r}") from None
    raise DomainError(
        f"unknown functional {text!r}; expected one, indicator_z:K, min_z:K "
        "or exp_neg_max:B"
    )


def _functional_value(fn: Functional, z: int, max_position: float | None) -> float:
    if fn.kind == "one":
        return 1.0
    if fn.kind == "indicator_z":
        return 1.0 if z == int(fn.param) else 0.0
    if fn.kind == "min_z":
        return float(min(z, int(fn.param)))
    # exp_neg_max: an extinct generation has no maximum; use 0 (the
    # functional's infimum) so the statistic stays bounded and defined
    if max_position is None:
        return 0.0
    return math.exp(-fn.param * max_position)


def functional_on_tree(fn: Functional, tree: LabelledTree) -> float:
    idx = tree.generation_index[tree.depth_grown]
    z = int(idx.size)
    max_pos = float(np.max(tree.position[idx])) if z else None
    return _functional_value(fn, z, max_pos)


def functional_on_outcome(fn: Functional, law: FiniteLaw, t, depth: int) -> float:
    positions = generation_positions(law, t, depth)
    max_pos = max(positions) if positions else None
    return _functional_value(fn, len(positions), max_pos)


def mc_importance_identity(
    law: Law,
    alpha: float,
    functional: Functional,
    cfg: McConfig,
    keep_values: bool = False,
) -> McSummary:
    """Sample ``E_sized[F(T)/W_n]`` and compare against its exact value.

    The change of measure charges only trees alive at generation ``n``,
    so the identity reads ``E_sized[F/W_n] = E_plain[F; Z_n > 0]``.  For
    the built-in functionals other than ``one`` (which all vanish on
    extinct trees) the right side is just ``E_plain[F]``; for ``one``
    the estimator recovers the survival probability to depth ``n``.

    The reference is exact (exhaustive enumeration) when the outcome
    count is small enough, otherwise a plain-law Monte Carlo using the
    replicate index range just above this run's (so the two samples never
    share a stream); the band then uses both standard errors.
    """
    law = validate_law(law)
    profile = classify(law, alpha)

    def one(rng):
        spined = grow_spined_tree(law, alpha, cfg.depth, cfg.caps, rng)
        traj = martingale_trajectory(spined.tree, alpha, profile.log_m)
        return functional_on_tree(functional, spined.tree) * _safe_exp(
            -traj.log_w[cfg.depth]
        )

    values, kept, discarded = _run_replicates(cfg, one)

    exact_ref = isinstance(law, FiniteLaw) and count_outcomes(law, cfg.depth) <= min(
        _ORACLE_REF_CAP, ENUM_CAP
    )
    if exact_ref:
        terms = []
        for t, p in enumerate_trees(law, cfg.depth):
            if generation_positions(law, t, cfg.depth):
                terms.append(p * functional_on_outcome(functional, law, t, cfg.depth))
        ref = math.fsum(terms)
        return _summary(
            f"importance[{functional.name}]", values, discarded, cfg, ref, kept,
            keep_values, note="reference: exhaustive enumeration of E[F; alive]",
        )

    def plain(rng):
        tree = grow_tree(law, cfg.depth, cfg.caps, rng)
        alive = tree.generation_index[tree.depth_grown].size > 0
        return functional_on_tree(functional, tree) if alive else 0.0

    ref_values, _, ref_discarded = _run_replicates(cfg, plain, index_offset=cfg.replicates)
    ref, ref_se, _ = _mean_se(ref_values)
    return _summary(
        f"importance[{functional.name}]", values, discarded + ref_discarded, cfg,
        ref, kept, keep_values, se_extra=ref_se,
        note=f"reference: plain-law Monte Carlo of E[F; alive], se {ref_se:.3g}",
    )
