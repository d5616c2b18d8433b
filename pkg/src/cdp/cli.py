"""CLI entry point for cdp."""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from cdp.belief.finite import condition_finite, image_finite, load_scenario
from cdp.config.settings import ConfigError, load_config
from cdp.core.pipeline import Pipeline
from cdp.invariants.affine import AffineInequality
from cdp.invariants.hierarchy import Hierarchy
from cdp.mechanisms.noise import (
    NoiseSpec,
    PrivacyParams,
    calibrate_gaussian,
    calibrate_laplace,
    sample_additive,
)
from cdp.revision.mh import MHConfig, mh_sample
from cdp.stages.load import HierarchyMismatchError, bench_invariant, load_counts
from cdp.update.imaging import imaged_mechanism
from cdp.update.projection import Projector
from cdp.update.topdown import topdown
from cdp.utils.io import read_vector, write_json, write_samples, write_vector
from cdp.verify.claims import CLAIMS, run_claims, write_report
from cdp.verify.diagnostics import MIN_DRAWS, mcmc_diagnostics

# Exit code of a bench sweep in which some cells failed
EXIT_PARTIAL = 2

EPILOG = """
Examples:
  # Add Laplace noise to a count vector
  cdp perturb --input counts.csv --mechanism laplace --epsilon 1 --seed 7 --output noisy.csv

  # Condition / image on a finite scenario
  cdp oracle --scenario banana.json --event banana

  # Conditioned release: MH draws from M(x) given the hierarchy constraints
  cdp condition --counts counts.csv --hierarchy h.csv --epsilon 1 --samples 1000 --output samples.csv

  # Imaged release: L2 projection of M(x) onto the constraints
  cdp image --counts counts.csv --hierarchy h.csv --epsilon 1 --samples 1000 --output samples.csv

  # Make a noisy vector consistent
  cdp project --counts noisy.csv --hierarchy h.csv --method topdown --output consistent.csv

  # Check the numerical claims
  cdp verify --output report.json

  # Benchmark sweep (exit code 2 when some cells failed)
  CDP_THREADS=4 cdp bench --config bench.yaml --out results/results.csv
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdp",
        description="Constrained differential privacy by conditioning and imaging",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=EPILOG,
    )
    parser.add_argument("--debug", action="store_true", help="Print tracebacks on errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("perturb", help="Release counts with additive Laplace or Gaussian noise")
    p.add_argument("--input", type=Path, required=True, help="node,count CSV")
    p.add_argument("--mechanism", choices=["laplace", "gaussian"], default="laplace")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.0, help="Required for gaussian")
    p.add_argument("--sensitivity", type=float, default=1.0, help="L1 (laplace) or L2 (gaussian) sensitivity (default: 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", type=Path, required=True)

    p = sub.add_parser("oracle", help="Condition and image a finite belief state")
    p.add_argument("--scenario", type=Path, required=True, help="JSON {worlds, probs, events, closest}")
    p.add_argument("--event", required=True, help="Event name from the scenario")
    p.add_argument("--op", choices=["condition", "image", "both"], default="both")
    p.add_argument("--output", type=Path, default=None, help="Write the result as JSON")

    for name, help_text in (
        ("condition", "Sample the conditioned mechanism on a hierarchy"),
        ("image", "Sample the imaged mechanism on a hierarchy"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--counts", type=Path, required=True, help="Leaf node,count CSV")
        p.add_argument("--hierarchy", type=Path, required=True, help="node,parent[,level] CSV")
        p.add_argument("--epsilon", type=float, required=True)
        p.add_argument("--samples", type=int, default=1000, help="Draws to write (default: 1000)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--nonneg", action="store_true", help="Add x >= 0 to the constraints")
        p.add_argument("--output", type=Path, required=True, help="CSV, one draw per row")
        if name == "condition":
            p.add_argument("--burnin", type=int, default=10_000, help="Burn-in iterations (default: 10000)")
            p.add_argument("--thinning", type=int, default=1)
            p.add_argument("--chains", type=int, default=1, help="Parallel chains; must divide --samples")
            p.add_argument(
                "--diagnostics",
                type=Path,
                default=None,
                help="Diagnostics JSON (default: diagnostics.json next to --output)",
            )

    p = sub.add_parser("project", help="Make a noisy node vector consistent")
    p.add_argument("--counts", type=Path, required=True, help="node,count CSV over all nodes")
    p.add_argument("--hierarchy", type=Path, required=True)
    p.add_argument("--method", choices=["l2", "topdown"], default="l2")
    p.add_argument("--nonneg", action="store_true", help="Add x >= 0 (l2 only)")
    p.add_argument("--output", type=Path, required=True)

    p = sub.add_parser("verify", help="Run the numerical claim suite")
    p.add_argument("--claims", nargs="*", default=None, metavar="ID", help=f"Subset of: {', '.join(CLAIMS)}")
    p.add_argument("--draws", type=int, default=10 ** 5, help="Monte-Carlo draws per claim (default: 100000)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", type=Path, default=Path("./verify_report.json"))

    p = sub.add_parser("bench", help="Run a benchmark sweep")
    p.add_argument("--config", type=Path, required=True, help="JSON or YAML experiment config")
    p.add_argument("--out", type=Path, default=Path("./output/results.csv"), help="CSV table path")
    p.add_argument("--resume", action="store_true", help="Resume from checkpoint if available")
    p.add_argument("--threads", type=int, default=None, help="Worker cap (default: CDP_THREADS or CPU count)")
    p.add_argument("--quiet", action="store_true", help="Suppress stage progress")
    return parser


def _ordered(h: Hierarchy, path: Path) -> np.ndarray:
    nodes, values = read_vector(path)
    missing = sorted(set(h.nodes) - set(nodes))
    extra = sorted(set(nodes) - set(h.nodes))
    if missing or extra:
        raise HierarchyMismatchError(missing, extra)
    by_node = dict(zip(nodes, values))
    return np.array([by_node[n] for n in h.nodes])


def cmd_perturb(args: argparse.Namespace) -> int:
    nodes, values = read_vector(args.input)
    if args.mechanism == "laplace":
        scale = calibrate_laplace(args.sensitivity, args.epsilon)
        noise = NoiseSpec.laplace(scale, len(nodes))
    else:
        scale = calibrate_gaussian(args.sensitivity, PrivacyParams(args.epsilon, args.delta))
        noise = NoiseSpec.gaussian(scale, len(nodes))
    write_vector(args.output, nodes, sample_additive(values, noise, args.seed))
    print(f"  {args.mechanism} scale: {scale:.6g}")
    print(f"  Output: {args.output}")
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    state, events = load_scenario(args.scenario)
    if args.event not in events:
        raise KeyError(f"event {args.event!r} not in scenario (have {sorted(events)})")
    event = events[args.event]
    result: Dict[str, Any] = {}
    if args.op in ("condition", "both"):
        result["condition"] = {str(w): p for w, p in condition_finite(state, event).as_dict().items()}
    if args.op in ("image", "both"):
        result["image"] = {str(w): p for w, p in image_finite(state, event).as_dict().items()}
    if args.output:
        write_json(args.output, result)
        print(f"  Output: {args.output}")
    else:
        print(json.dumps(result, indent=2))
    return 0


def _hierarchy_release_setup(args: argparse.Namespace) -> Tuple[np.ndarray, Hierarchy, NoiseSpec]:
    x, h = load_counts(args.counts, args.hierarchy)
    noise = NoiseSpec.laplace(calibrate_laplace(1.0, args.epsilon), h.size)
    return x, h, noise


def cmd_condition(args: argparse.Namespace) -> int:
    x, h, noise = _hierarchy_release_setup(args)
    cfg = MHConfig(
        n_samples=args.samples,
        burn_in=args.burnin,
        thinning=args.thinning,
        seed=args.seed,
        n_chains=args.chains,
    )
    ineq = AffineInequality.nonnegative(h.size) if args.nonneg else None
    run = mh_sample(x, noise, h, ineq, cfg)
    write_samples(args.output, h.nodes, run.draws)

    if len(run) >= MIN_DRAWS:
        diagnostics = mcmc_diagnostics(run).to_dict()
    else:
        diagnostics = {"acceptance_rate": run.acceptance_rate, "ess": run.ess, "degenerate": run.degenerate}
    diagnostics.update({"epsilon": args.epsilon, "scale": noise.scale, "n_chains": run.n_chains})
    diag_path = args.diagnostics or args.output.with_name("diagnostics.json")
    write_json(diag_path, diagnostics)
    print(f"  Acceptance rate: {run.acceptance_rate:.3f}")
    print(f"  ESS: {run.ess:.1f}")
    print(f"  Output: {args.output}")
    print(f"  Diagnostics: {diag_path}")
    return 0


def cmd_image(args: argparse.Namespace) -> int:
    x, h, noise = _hierarchy_release_setup(args)
    inv = bench_invariant(h, args.nonneg)
    draws = imaged_mechanism(x, noise, inv, args.seed, size=args.samples)
    write_samples(args.output, h.nodes, draws)
    print(f"  Output: {args.output}")
    return 0


def cmd_project(args: argparse.Namespace) -> int:
    if args.nonneg and args.method != "l2":
        print("Error: --nonneg needs --method l2", file=sys.stderr)
        return 1
    h = Hierarchy.from_csv(args.hierarchy)
    noisy = _ordered(h, args.counts)
    if args.method == "topdown":
        consistent = topdown(h, noisy)
    else:
        consistent = Projector(bench_invariant(h, args.nonneg)).apply(noisy)
    write_vector(args.output, h.nodes, consistent)
    print(f"  Output: {args.output}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    results = run_claims(args.claims, draws=args.draws, seed=args.seed)
    write_report(results, args.output)
    failed = [cid for cid, r in results.items() if r.passed is False]
    print(f"  Report: {args.output}")
    if failed:
        print(f"Error: claims failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.resume:
        config.resume = True
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
        config.threads = args.threads
    if args.quiet:
        config.verbose = False
    context = Pipeline.create_default(config).run(output_dir=args.out.parent, table_name=args.out.name)
    if context.failures:
        print(f"Warning: {len(context.failures)} cell(s) failed; see the reason column", file=sys.stderr)
        return EXIT_PARTIAL
    return 0


COMMANDS = {
    "perturb": cmd_perturb,
    "oracle": cmd_oracle,
    "condition": cmd_condition,
    "image": cmd_image,
    "project": cmd_project,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def main(argv: Optional[List[str]] = None) -> None:
    """Main entry point for the CLI."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        code = COMMANDS[args.command](args)

    except KeyboardInterrupt:
        print("\nInterrupted by user", file=sys.stderr)
        sys.exit(130)

    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        if args.debug:
            import traceback
            traceback.print_exc()
        sys.exit(1)

    if code:
        sys.exit(code)


if __name__ == "__main__":
    main()
