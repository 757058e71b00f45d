"""Command line front end.

Exit codes (exhaustive): 0 success; 1 any validation failure, including
malformed flags and model files; 2 resource refusal (enumeration too
large, node cap hit, excessive Monte Carlo discards, tilted-mass
overflow, fixed-point non-convergence), with partial artifacts written
and flagged on stderr where they exist; 3 an exact identity check
failed, which signals an implementation bug, never a property of the
law under study.

All randomness flows from --seed; simulate, spine and mc refuse to run
without it, so no run ever depends on the wall clock.  Replicate
streams are split deterministically from the seed, which makes output
files byte-identical across reruns and across --workers settings.

Artifacts: stdout by default, --out to write a file.  JSON renders
non-finite floats as the strings "Infinity", "-Infinity", "NaN"; CSV
uses Python float repr (shortest round-trip form).
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict

import click
import numpy as np

from .brw import GrowthCaps, grow_tree, martingale_trajectory
from .errors import (
    BrwError,
    DomainError,
    MassOverflowError,
    NoConvergenceError,
    ResourceError,
    PopulationCapError,
    TooLargeError,
    ValidationError,
)
from .mc import (
    McConfig,
    mc_extinction,
    mc_importance_identity,
    mc_mean_w,
    mc_spine_slope,
    mc_triviality_scan,
    parse_functional,
)
from .offspring import classify, extinction_probability, law_from_json, tilted_mass
from .oracle import run_verify
from .rng import replicate_rng
from .spine import grow_spined_tree, spine_positions


# ---------------------------------------------------------------------------
# parsing and serialization helpers
# ---------------------------------------------------------------------------


def _require(value, flag: str):
    if value is None:
        raise DomainError(f"{flag} is required for this subcommand")
    return value


def _parse_alphas(text: str) -> list[float]:
    """Comma list ("0,1,5") or linspace triple ("0:2:5")."""
    try:
        if ":" in text:
            lo, hi, count = text.split(":")
            n = int(count)
            if n < 1:
                raise ValueError
            return [float(a) for a in np.linspace(float(lo), float(hi), n)]
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise DomainError(f"cannot parse alpha list {text!r}") from None
    if not values:
        raise DomainError("empty alpha list")
    return values


def _single_alpha(text: str) -> float:
    values = _parse_alphas(text)
    if len(values) != 1:
        raise DomainError("this subcommand takes exactly one alpha")
    return values[0]


def _parse_depth_grid(text: str) -> tuple[int, ...]:
    try:
        grid = tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise DomainError(f"cannot parse depth grid {text!r}") from None
    if not grid:
        raise DomainError("empty depth grid")
    return grid


def _check_seed(seed: int) -> int:
    if not 0 <= seed < 2**64:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def _caps(max_nodes: int | None) -> GrowthCaps:
    if max_nodes is None:
        return GrowthCaps()
    if max_nodes < 1:
        raise DomainError("--max-nodes must be positive")
    return GrowthCaps(max_nodes=max_nodes)


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if x == math.inf:
            return "Infinity"
        if x == -math.inf:
            return "-Infinity"
        return x
    return obj


def _json_text(payload) -> str:
    return json.dumps(_sanitize(payload), indent=2, allow_nan=False) + "\n"


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        click.echo(text, nl=False)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _load_model(path: str):
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as e:
        raise DomainError(f"cannot read model file {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise DomainError(f"model file {path} is not valid JSON: {e}") from None
    return law_from_json(payload)


# ---------------------------------------------------------------------------
# command group and exit-code dispatch
# ---------------------------------------------------------------------------


@click.group(name="brwlab")
def cli():
    """Branching random walk laboratory: classification, exact identity
    verification, trajectory simulation and seeded Monte Carlo."""


def main(argv=None) -> None:
    sys.exit(_dispatch(argv))


def _dispatch(argv=None) -> int:
    """Run the CLI, folding every failure into the documented exit codes."""
    try:
        cli(args=argv, standalone_mode=False)
        return 0
    except SystemExit as e:
        return int(e.code or 0)
    except click.exceptions.Exit as e:
        return int(e.exit_code)
    except click.UsageError as e:
        click.echo(f"error: {e.format_message()}", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except TooLargeError as e:
        click.echo(
            f"TOO_LARGE: estimated {e.estimate} outcomes exceeds cap {e.cap}",
            err=True,
        )
        return 2
    except ValidationError as e:
        click.echo(f"error: {e}", err=True)
        return 1
    except (ResourceError, MassOverflowError, NoConvergenceError) as e:
        click.echo(f"refused: {e}", err=True)
        return 2
    except BrwError as e:
        click.echo(f"error: {e}", err=True)
        return 1


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------

_PROFILE_FIELDS = [
    "alpha",
    "m",
    "m_prime",
    "drift",
    "log_m",
    "llogl",
    "gap",
    "q",
    "classification",
    "reason",
]


@cli.command("classify")
@click.option("--model", "model_path", default=None, help="Model JSON path.")
@click.option("--alpha", "alpha_text", default=None, help="Alpha list or a:b:n grid.")
@click.option("--out", default=None, help="Output path (default stdout).")
@click.option("--format", "fmt", default="json", help="json or csv.")
def classify_cmd(model_path, alpha_text, out, fmt):
    """Tilted-mass profile and martingale-limit classification per alpha."""
    law = _load_model(_require(model_path, "--model"))
    alphas = _parse_alphas(_require(alpha_text, "--alpha"))
    q = extinction_probability(law)
    profiles = []
    for a in alphas:
        p = asdict(classify(law, a))
        p["classification"] = p["classification"].name
        p["q"] = q
        profiles.append(p)
    if fmt == "json":
        _emit(_json_text({"model": model_path, "profiles": profiles}), out)
    elif fmt == "csv":
        rows = [[p[k] for k in _PROFILE_FIELDS] for p in profiles]
        _emit(_csv_text(_PROFILE_FIELDS, rows), out)
    else:
        raise DomainError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

_VERIFY_FIELDS = ["check", "law", "alpha", "depth", "max_discrepancy", "outcomes", "pass"]


def _verify_exit_code(rows: list[dict]) -> int:
    return 0 if all(r["pass"] for r in rows) else 3


@cli.command("verify")
@click.option("--model", "model_path", default=None)
@click.option("--alpha", "alpha_text", default=None)
@click.option("--depth", type=int, default=None)
@click.option("--out", default=None)
@click.option("--format", "fmt", default="json")
def verify_cmd(model_path, alpha_text, depth, out, fmt):
    """Run all six exact identity checks by exhaustive enumeration."""
    law = _load_model(_require(model_path, "--model"))
    alphas = _parse_alphas(_require(alpha_text, "--alpha"))
    depth = _require(depth, "--depth")
    if depth < 0:
        raise DomainError("--depth must be nonnegative")
    rows = []
    for a in alphas:
        for res in run_verify(law, a, depth):
            rows.append(
                {
                    "check": res.check,
                    "law": model_path,
                    "alpha": res.alpha,
                    "depth": res.depth,
                    "max_discrepancy": res.max_discrepancy,
                    "outcomes": res.outcomes,
                    "pass": res.passed,
                }
            )
    if fmt == "json":
        _emit(_json_text(rows), out)
    elif fmt == "csv":
        _emit(_csv_text(_VERIFY_FIELDS, [[r[k] for k in _VERIFY_FIELDS] for r in rows]), out)
    else:
        raise DomainError(f"unknown format {fmt!r}")
    code = _verify_exit_code(rows)
    if code:
        click.echo("identity check failure: this is an implementation bug", err=True)
        sys.exit(code)


# ---------------------------------------------------------------------------
# simulate and spine
# ---------------------------------------------------------------------------


def _ordered_parallel(workers: int, fn, count: int):
    """Evaluate fn(0..count-1), yielding results in index order."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(fn, range(count))
    else:
        for r in range(count):
            yield fn(r)


@cli.command("simulate")
@click.option("--model", "model_path", default=None)
@click.option("--alpha", "alpha_text", default=None)
@click.option("--depth", type=int, default=None)
@click.option("--reps", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--max-nodes", type=int, default=None)
@click.option("--workers", type=int, default=1)
@click.option("--out", default=None)
@click.option("--format", "fmt", default="csv")
def simulate_cmd(model_path, alpha_text, depth, reps, seed, max_nodes, workers, out, fmt):
    """Grow plain trees; long-format per-generation trajectory artifact.

    A replicate that hits the node cap contributes the generations it
    completed; the run stops there, flags it on stderr, and exits 2.
    """
    law = _load_model(_require(model_path, "--model"))
    alpha = _single_alpha(_require(alpha_text, "--alpha"))
    depth = _require(depth, "--depth")
    reps = _require(reps, "--reps")
    seed = _check_seed(_require(seed, "--seed"))
    if depth < 0 or reps < 1 or workers < 1:
        raise DomainError("need depth >= 0, reps >= 1, workers >= 1")
    caps = _caps(max_nodes)
    log_m = math.log(tilted_mass(law, alpha))

    def one(r: int):
        rng = replicate_rng(seed, r)
        capped_at = None
        try:
            tree = grow_tree(law, depth, caps, rng)
        except PopulationCapError as e:
            tree, capped_at = e.partial, e.generation
        traj = martingale_trajectory(tree, alpha, log_m)
        rows = [
            (r, n, int(traj.population[n]), float(traj.log_w[n]))
            for n in range(tree.depth_grown + 1)
        ]
        return rows, capped_at

    all_rows: list[tuple] = []
    code = 0
    for r, (rows, capped_at) in enumerate(_ordered_parallel(workers, one, reps)):
        all_rows.extend(rows)
        if capped_at is not None:
            click.echo(
                f"replicate {r} hit max-nodes {caps.max_nodes} growing generation "
                f"{capped_at}; partial trajectory written, later replicates dropped",
                err=True,
            )
            code = 2
            break
    header = ["replicate", "n", "Z_n", "log_w"]
    if fmt == "csv":
        _emit(_csv_text(header, all_rows), out)
    elif fmt == "json":
        _emit(_json_text([dict(zip(header, row)) for row in all_rows]), out)
    else:
        raise DomainError(f"unknown format {fmt!r}")
    if code:
        sys.exit(code)


@cli.command("spine")
@click.option("--model", "model_path", default=None)
@click.option("--alpha", "alpha_text", default=None)
@click.option("--depth", type=int, default=None)
@click.option("--reps", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--max-nodes", type=int, default=None)
@click.option("--workers", type=int, default=1)
@click.option("--out", default=None)
@click.option("--format", "fmt", default="csv")
def spine_cmd(model_path, alpha_text, depth, reps, seed, max_nodes, workers, out, fmt):
    """Grow size-biased (tree, ray) pairs; per-level ray artifact.

    Columns: ray position, cumulative log change-of-measure weight along
    the ray, and the embedded tree's log martingale value.  A replicate
    that hits the node cap is flagged and the run exits 2 (a partial
    spined tree has no consistent reading, so it contributes no rows).
    """
    law = _load_model(_require(model_path, "--model"))
    alpha = _single_alpha(_require(alpha_text, "--alpha"))
    depth = _require(depth, "--depth")
    reps = _require(reps, "--reps")
    seed = _check_seed(_require(seed, "--seed"))
    if depth < 0 or reps < 1 or workers < 1:
        raise DomainError("need depth >= 0, reps >= 1, workers >= 1")
    caps = _caps(max_nodes)
    log_m = math.log(tilted_mass(law, alpha))

    def one(r: int):
        rng = replicate_rng(seed, r)
        try:
            spined = grow_spined_tree(law, alpha, depth, caps, rng)
        except PopulationCapError as e:
            return None, e.generation
        traj = martingale_trajectory(spined.tree, alpha, log_m)
        positions = spine_positions(spined)
        rows = [
            (
                r,
                k,
                float(positions[k]),
                float(spined.spine_log_weight[k]),
                float(traj.log_w[k]),
            )
            for k in range(depth + 1)
        ]
        return rows, None

    all_rows: list[tuple] = []
    code = 0
    for r, (rows, capped_at) in enumerate(_ordered_parallel(workers, one, reps)):
        if capped_at is not None:
            click.echo(
                f"replicate {r} hit max-nodes {caps.max_nodes} at generation "
                f"{capped_at}; run truncated before this replicate",
                err=True,
            )
            code = 2
            break
        all_rows.extend(rows)
    header = ["replicate", "k", "S(v_k)", "spine_log_weight", "log_w"]
    if fmt == "csv":
        _emit(_csv_text(header, all_rows), out)
    elif fmt == "json":
        keys = ["replicate", "k", "S", "spine_log_weight", "log_w"]
        _emit(_json_text([dict(zip(keys, row)) for row in all_rows]), out)
    else:
        raise DomainError(f"unknown format {fmt!r}")
    if code:
        sys.exit(code)


# ---------------------------------------------------------------------------
# mc
# ---------------------------------------------------------------------------

_ESTIMATORS = ("mean_w", "spine_slope", "extinction", "triviality_scan", "importance")

_SUMMARY_FIELDS = [
    "estimator",
    "estimate",
    "se",
    "n",
    "discarded",
    "seed",
    "reference_value",
    "pass",
    "unreliable",
    "note",
]


@cli.command("mc")
@click.option("--model", "model_path", default=None)
@click.option("--alpha", "alpha_text", default=None)
@click.option("--depth", type=int, default=None)
@click.option("--depth-grid", "depth_grid_text", default=None)
@click.option("--reps", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--estimator", default=None, help="|".join(_ESTIMATORS))
@click.option("--functional", default=None, help="importance estimator statistic.")
@click.option("--max-nodes", type=int, default=None)
@click.option("--workers", type=int, default=1)
@click.option("--out", default=None)
@click.option("--format", "fmt", default="json")
@click.option("--values-out", default=None, help="Also write per-replicate values CSV.")
def mc_cmd(
    model_path,
    alpha_text,
    depth,
    depth_grid_text,
    reps,
    seed,
    estimator,
    functional,
    max_nodes,
    workers,
    out,
    fmt,
    values_out,
):
    """Seeded Monte Carlo estimators with reference values and 4-sigma bands.

    A failed band is reported in the payload (exit stays 0); identity
    failures are the verify subcommand's business.
    """
    law = _load_model(_require(model_path, "--model"))
    estimator = _require(estimator, "--estimator")
    if estimator not in _ESTIMATORS:
        raise DomainError(f"unknown estimator {estimator!r}; pick from {_ESTIMATORS}")
    reps = _require(reps, "--reps")
    seed = _check_seed(_require(seed, "--seed"))
    if workers < 1:
        raise DomainError("--workers must be >= 1")
    caps = _caps(max_nodes)
    keep = values_out is not None

    if estimator == "triviality_scan":
        alpha = _single_alpha(_require(alpha_text, "--alpha"))
        grid = _parse_depth_grid(_require(depth_grid_text, "--depth-grid"))
        cfg = McConfig(reps, max(grid), seed, caps, workers)
        report = mc_triviality_scan(law, alpha, grid, cfg, keep_values=keep)
        payload = {
            "estimator": report.estimator,
            "alpha": report.alpha,
            "grid": list(report.grid),
            "medians": list(report.medians),
            "means": list(report.means),
            "survivors": list(report.survivors),
            "surviving_fractions": list(report.fractions),
            "n": report.n,
            "discarded": report.discarded,
            "seed": report.master_seed,
            "verdict": report.verdict,
            "classification": report.classification,
            "agrees": report.agrees,
        }
        if fmt == "json":
            _emit(_json_text(payload), out)
        elif fmt == "csv":
            rows = list(
                zip(
                    report.grid,
                    report.medians,
                    report.means,
                    report.survivors,
                    report.fractions,
                )
            )
            _emit(
                _csv_text(
                    ["depth", "median_log_w", "mean_log_w", "survivors", "surviving_fraction"],
                    rows,
                ),
                out,
            )
        else:
            raise DomainError(f"unknown format {fmt!r}")
        if keep:
            rows = [
                (rep, d, float(report.values[i, j]))
                for i, rep in enumerate(report.kept)
                for j, d in enumerate(report.grid)
            ]
            _emit(_csv_text(["replicate", "n", "log_w"], rows), values_out)
        return

    depth = _require(depth, "--depth")
    cfg = McConfig(reps, depth, seed, caps, workers)
    if estimator == "extinction":
        summary = mc_extinction(law, cfg, keep_values=keep)
    else:
        alpha = _single_alpha(_require(alpha_text, "--alpha"))
        if estimator == "mean_w":
            summary = mc_mean_w(law, alpha, cfg, keep_values=keep)
        elif estimator == "spine_slope":
            summary = mc_spine_slope(law, alpha, cfg, keep_values=keep)
        else:
            fn = parse_functional(_require(functional, "--functional"))
            summary = mc_importance_identity(law, alpha, fn, cfg, keep_values=keep)

    payload = {
        "estimator": summary.estimator,
        "estimate": summary.estimate,
        "se": summary.se,
        "n": summary.n,
        "discarded": summary.discarded,
        "seed": summary.master_seed,
        "reference_value": summary.reference,
        "pass": summary.passed,
        "unreliable": summary.unreliable,
        "note": summary.note,
    }
    if fmt == "json":
        _emit(_json_text(payload), out)
    elif fmt == "csv":
        _emit(_csv_text(_SUMMARY_FIELDS, [[payload[k] for k in _SUMMARY_FIELDS]]), out)
    else:
        raise DomainError(f"unknown format {fmt!r}")
    if keep:
        rows = [
            (rep, float(summary.values[i])) for i, rep in enumerate(summary.kept)
        ]
        _emit(_csv_text(["replicate", "value"], rows), values_out)


if __name__ == "__main__":
    main()
