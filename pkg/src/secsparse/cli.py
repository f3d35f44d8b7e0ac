"""Command-line entry point: ``secsparse <subcommand> [options]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench
from . import knowledge as kn
from .runtime import ConfigurationError
from .sparse import ParseError, ingest_nnz_counts, write_triplets


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parties", type=int, default=3)
    p.add_argument("--threshold", type=int, default=1)
    p.add_argument("--out", type=Path, default=None, help="output CSV (default: stdout)")
    p.add_argument("--mode", choices=("naive", "optimized"), default="optimized")
    p.add_argument("--cost-only", action="store_true", help="run on a small field with identical ledgers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="secsparse", description="Secret-shared sparse products: cost sweeps and public-knowledge tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("matvec-sweep", help="dense vs sparse matrix-vector costs")
    _common(p)
    p.add_argument("--sizes", type=_ints, default=(256, 512, 1024))
    p.add_argument("--sparsities", type=_floats, default=(0.999, 0.9999))
    p.add_argument("--nnz-cap", type=int, default=1 << 14)

    p = sub.add_parser("matmat-sweep", help="dense vs sparse X^T X costs")
    _common(p)
    p.add_argument("--rows", type=int, default=100)
    p.add_argument("--sizes", type=_ints, default=(512, 1024, 2048))
    p.add_argument("--sparsities", type=_floats, default=(0.999,))
    p.add_argument("--nnz-cap", type=int, default=1 << 14)

    p = sub.add_parser("overhead", help="storage per padding technique")
    _common(p)
    p.add_argument("--counts", type=Path, nargs="*", default=[], help="per-row nnz count files")
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--gamma", type=float, default=None, help="add a synthetic power-law dataset")
    p.add_argument("--rows", type=int, default=10_000)

    p = sub.add_parser("dp-curves", help="DP tail bounds for several block sizes")
    _common(p)
    p.add_argument("--counts", type=Path, required=True)
    p.add_argument("--max-degree", type=int, required=True)
    p.add_argument("--epsilons", type=_floats, default=(0.01, 0.1, 1.0))
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--block-rows", type=_ints, default=(16, 64, 256))
    p.add_argument("--noise-scale", type=float, default=1.0)

    p = sub.add_parser("pop-curves", help="population-based tail bounds")
    _common(p)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--max-degree", type=int, required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--lambdas", type=_floats, default=(5.0, 10.0, 20.0))
    p.add_argument("--sample-size", type=int, default=None)

    p = sub.add_parser("generate", help="write a synthetic power-law matrix as triplets")
    _common(p)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--max-degree", type=int, default=None)

    p = sub.add_parser("quantile-template", help="MPC quantile template from owners' count files")
    _common(p)
    p.add_argument("counts", type=Path, nargs="+", help="one nnz count file per data owner")
    p.add_argument("--max-degree", type=int, required=True)
    p.add_argument("--template-out", type=Path, default=None)
    return parser


def _emit(rows, out) -> None:
    text = bench.write_csv(rows, out)
    if out is None:
        sys.stdout.write(text)


def _config(args, scenario: str) -> bench.ScenarioConfig:
    kwargs = dict(scenario=scenario, seed=args.seed, parties=args.parties, threshold=args.threshold, mode=args.mode, cost_only=args.cost_only)
    for name in ("sizes", "sparsities", "rows", "nnz_cap"):
        if hasattr(args, name):
            kwargs[name] = getattr(args, name)
    return bench.ScenarioConfig(**kwargs)


def run(args) -> int:
    cmd = args.command
    if cmd == "matvec-sweep":
        _emit(bench.run_matvec_sweep(_config(args, cmd)), args.out)
    elif cmd == "matmat-sweep":
        _emit(bench.run_matmat_sweep(_config(args, cmd)), args.out)
    elif cmd == "overhead":
        data = {path.stem: ingest_nnz_counts(path) for path in args.counts}
        if args.gamma is not None:
            params = kn.PowerLawParams(args.gamma, args.cols)
            data[f"powerlaw-{args.gamma}"] = kn.sample_degrees(params, args.rows, np.random.default_rng(args.seed)).tolist()
        if not data:
            raise ValueError("give --counts files and/or --gamma")
        _emit(bench.run_overhead_compare(data, args.cols), args.out)
    elif cmd == "dp-curves":
        counts = ingest_nnz_counts(args.counts)
        _emit(bench.run_dp_curves(counts, args.max_degree, args.epsilons, args.delta, args.block_rows, args.seed, args.noise_scale), args.out)
    elif cmd == "pop-curves":
        params = kn.PowerLawParams(args.gamma, args.max_degree)
        _emit(bench.run_popbound_curves(params, args.rows, args.lambdas, args.sample_size), args.out)
    elif cmd == "generate":
        params = kn.PowerLawParams(args.gamma, args.max_degree or args.cols)
        plain = kn.sample_powerlaw(params, args.rows, args.cols, np.random.default_rng(args.seed))
        if args.out is None:
            raise ValueError("generate needs --out")
        write_triplets(args.out, plain)
    elif cmd == "quantile-template":
        owners = [ingest_nnz_counts(p) for p in args.counts]
        template, rows, _ = bench.run_quantile_template(owners, args.max_degree, _config(args, cmd))
        if args.template_out is not None:
            template.to_json(args.template_out)
        _emit(rows, args.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except (ParseError, ConfigurationError, kn.TemplateFitError, ValueError, OSError) as exc:
        print(f"secsparse {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
