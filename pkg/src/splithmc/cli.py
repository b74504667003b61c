"""Command-line harness: Gaussian efficiency analysis, single-model
sampling, and the logistic/student-t benchmark suites.

Every command honours ``--seed`` for end-to-end reproduction.  Each chain
gets its own generator derived from the master seed and the cell indices
(block, scheme, repetition), so any single table cell can be re-run in
isolation and results do not depend on execution order.  Flags may also
be provided through a ``key = value`` config file; explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .diagnostics import EssSummary, summarize
from .gaussian import (
    Scheme,
    best_efficiency,
    default_dimension_grid,
    efficiency_curves,
    write_efficiency_curves,
)
from .models import (
    DatasetFormatError,
    StdGaussianModel,
    StudentTModel,
    ar1_precision,
    load_dataset,
    standardize_design,
)
from .report import BENCH_COLUMNS, format_block_table, render_bench_figure, render_efficiency_figures
from .samplers import ChainOutput, HmcConfig, NutsConfig, run_chain

COMMANDS = ("analyze-gaussian", "sample", "bench-logistic", "bench-student-t")

_FMT = "{:.12g}"


def _fmt(x) -> str:
    if isinstance(x, float):
        return _FMT.format(x)
    return str(x)


def _parse_schemes(spec: Optional[str], default: Sequence[Scheme]) -> List[Scheme]:
    if spec is None:
        return list(default)
    names = [part.strip() for part in spec.split(",") if part.strip()]
    if not names:
        raise SystemExit("--schemes given but empty")
    try:
        return [Scheme.from_name(name) for name in names]
    except ValueError as error:
        raise SystemExit(str(error)) from None


def _parse_dims(spec: str) -> List[int]:
    try:
        dims = [int(part) for part in spec.replace(",", " ").split()]
    except ValueError:
        raise SystemExit(f"cannot parse --dims {spec!r}") from None
    if not dims or any(d < 2 for d in dims):
        raise SystemExit("--dims needs integers >= 2")
    return dims


def _chain_rng(master_seed: int, block: int, scheme_index: int, repetition: int):
    """Generator for one cell, derived as SeedSequence([master, block,
    scheme, repetition]) so cells are independent and order-insensitive."""
    seq = np.random.SeedSequence([master_seed, block, scheme_index, repetition])
    return np.random.Generator(np.random.PCG64(seq))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splithmc",
        description="HMC/NUTS with pluggable splitting-scheme integrators",
    )
    parser.add_argument("--command", required=True, choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="key = value file of flag defaults")
    parser.add_argument(
        "--schemes",
        help="comma-separated subset of: "
        + ",".join(k.value for k in Scheme)
        + " (default: all four; sample: leapfrog)",
    )
    parser.add_argument("--iterations", type=int, default=5000,
                        help="retained post-burn-in draws (default 5000)")
    parser.add_argument("--burn-in", type=int, default=1000)
    parser.add_argument(
        "--iterations-include-burn-in",
        action="store_true",
        help="count burn-in inside --iterations instead of on top of it",
    )
    parser.add_argument("--reps", type=int, default=10, help="repetitions per cell (default 10)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--target-accept", type=float, default=0.8)
    parser.add_argument("--max-depth", type=int, default=10)
    parser.add_argument("--dims", default="2,10,100", help="student-t dimensions")
    parser.add_argument("--rho", type=float, default=0.95, help="AR(1) autocorrelation")
    parser.add_argument("--nu", type=float, default=5.0, help="student-t degrees of freedom")
    parser.add_argument("--data", nargs="*", type=Path, help="dataset CSV paths")
    parser.add_argument("--out", type=Path, default=Path("splithmc-out"))
    parser.add_argument("--raw-ess", action="store_true",
                        help="report ESS uncapped instead of capped at the draw count")
    parser.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    # analyze-gaussian grid
    parser.add_argument("--d-min-exp", type=int, default=1)
    parser.add_argument("--d-max-exp", type=int, default=6)
    parser.add_argument("--l-max", type=int, default=4096)
    # sample-only model/sampler choices
    parser.add_argument("--model", choices=("gaussian", "student-t", "logistic"),
                        default="gaussian")
    parser.add_argument("--dim", type=int, default=10, help="dimension for gaussian/student-t")
    parser.add_argument("--sampler", choices=("nuts", "hmc"), default="nuts")
    parser.add_argument("--eps", type=float, help="step size (hmc sampler)")
    parser.add_argument("--num-steps", type=int, help="steps per proposal (hmc sampler)")
    return parser


def _load_config_file(path: Path) -> List[str]:
    """Turn a key = value file into a flag list prepended to argv (so
    explicit flags override it)."""
    argv: List[str] = []
    for line_number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(f"{path}:{line_number}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "yes", "on"):
            argv.append(flag)
        elif value.lower() in ("false", "no", "off"):
            continue
        else:
            argv.extend([flag, *value.split()] if key == "data" else [flag, value])
    return argv


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", type=Path)
    known, _ = probe.parse_known_args(argv)
    if known.config is not None:
        argv = _load_config_file(known.config) + argv
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# analyze-gaussian
# ---------------------------------------------------------------------------


def cmd_analyze_gaussian(args, out_dir: Path) -> int:
    dims = default_dimension_grid(args.d_min_exp, args.d_max_exp)
    curves = efficiency_curves(dims, args.l_max)

    csv_path = out_dir / "efficiency_curves.csv"
    write_efficiency_curves(curves, csv_path)

    reference = curves[Scheme.LEAPFROG]
    lines = ["crossover dimensions (first grid d where efficiency exceeds leapfrog)"]
    for kind in Scheme:
        if kind is Scheme.LEAPFROG:
            continue
        crossover = None
        for d in dims:
            point = curves[kind].get(d)
            base = reference.get(d)
            if point is not None and base is not None and point.efficiency > base.efficiency:
                crossover = d
                break
        lines.append(f"  {kind.value:15s} {crossover if crossover is not None else 'none'}")
    table = "\n".join(lines)
    (out_dir / "crossover_table.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    print(f"wrote {csv_path}")

    if not args.no_figures:
        for path in render_efficiency_figures(curves, out_dir):
            print(f"wrote {path}")

    _write_metadata(
        out_dir / "analyze_gaussian_metadata.json",
        args,
        {"dims": dims, "l_max": args.l_max},
    )
    return 0


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------


def _sample_model(args):
    if args.model == "gaussian":
        return StdGaussianModel(args.dim), {"model": "gaussian", "dim": args.dim}
    if args.model == "student-t":
        precision = ar1_precision(args.dim, args.rho)
        return (
            StudentTModel(precision, args.nu),
            {"model": "student-t", "dim": args.dim, "rho": args.rho, "nu": args.nu},
        )
    if not args.data or len(args.data) != 1:
        raise SystemExit("--model logistic needs exactly one --data file")
    dataset = load_dataset(args.data[0])
    model = standardize_design(dataset)
    meta = {
        "model": "logistic",
        "dataset": dataset.name,
        "n": dataset.num_observations,
        "dim": dataset.dim,
    }
    return model, meta


def cmd_sample(args, out_dir: Path, clock) -> int:
    schemes = _parse_schemes(args.schemes, [Scheme.LEAPFROG])
    if len(schemes) != 1:
        raise SystemExit("sample runs one scheme at a time; pass a single --schemes value")
    scheme = schemes[0]
    model, model_meta = _sample_model(args)

    if args.sampler == "hmc":
        if args.eps is None or args.num_steps is None:
            raise SystemExit("hmc sampling needs --eps and --num-steps")
        config = HmcConfig(scheme=scheme, eps=args.eps, num_steps=args.num_steps, seed=args.seed)
    else:
        config = NutsConfig(
            scheme=scheme,
            target_accept=args.target_accept,
            max_tree_depth=args.max_depth,
            seed=args.seed,
        )

    rng = _chain_rng(args.seed, 0, list(Scheme).index(scheme), 0)
    chain = run_chain(
        model,
        config,
        args.iterations,
        args.burn_in,
        rng=rng,
        iterations_include_burn_in=args.iterations_include_burn_in,
        clock=clock,
    )
    summary = summarize(chain, cap_at_length=not args.raw_ess)

    samples_path = out_dir / "samples.csv"
    with open(samples_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"q{i + 1}" for i in range(model.dim)])
        for row in chain.samples:
            writer.writerow([_fmt(float(v)) for v in row])

    sidecar = {
        "command": "sample",
        "seed": args.seed,
        "scheme": scheme.value,
        "sampler": args.sampler,
        "iterations": args.iterations,
        "burn_in": args.burn_in,
        **model_meta,
        "adapted_eps": chain.adapted_eps,
        "gradient_count": chain.gradient_count,
        "wall_time": chain.wall_time,
        "divergence_count": chain.divergence_count,
        **_summary_dict(summary),
    }
    summary_path = out_dir / "sample_summary.json"
    summary_path.write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {samples_path}")
    print(f"wrote {summary_path}")
    return 0


def _summary_dict(summary: EssSummary) -> Dict:
    return {
        "min_ess": summary.min_ess,
        "median_ess": summary.median_ess,
        "max_ess": summary.max_ess,
        "min_ess_per_second": summary.min_ess_per_second,
        "median_ess_per_second": summary.median_ess_per_second,
        "min_ess_per_gradient": summary.min_ess_per_gradient,
        "undefined_coordinates": summary.undefined_coordinates,
    }


# ---------------------------------------------------------------------------
# benchmarks
# ---------------------------------------------------------------------------


@dataclass
class _CellStats:
    """Mean over repetitions of one (block, scheme) cell; rate columns are
    ratios of the means, matching how repeated runs are usually pooled."""

    scheme: Scheme
    cpu_time: float
    step_size: float
    min_ess: float
    med_ess: float
    max_ess: float
    min_ess_per_time: float
    med_ess_per_time: float
    min_ess_per_grad: float

    def as_row(self) -> Dict:
        return {
            "scheme": self.scheme.value,
            "cpu_time": self.cpu_time,
            "step_size": self.step_size,
            "min_ess": self.min_ess,
            "med_ess": self.med_ess,
            "max_ess": self.max_ess,
            "min_ess_per_time": self.min_ess_per_time,
            "med_ess_per_time": self.med_ess_per_time,
            "min_ess_per_grad": self.min_ess_per_grad,
        }


def _aggregate(scheme: Scheme, chains: List[ChainOutput], summaries: List[EssSummary]) -> _CellStats:
    mean = lambda xs: float(np.mean(xs))
    cpu = mean([c.wall_time for c in chains])
    grads = mean([c.gradient_count for c in chains])
    min_ess = mean([s.min_ess for s in summaries])
    med_ess = mean([s.median_ess for s in summaries])
    return _CellStats(
        scheme=scheme,
        cpu_time=cpu,
        step_size=mean([c.adapted_eps for c in chains]),
        min_ess=min_ess,
        med_ess=med_ess,
        max_ess=mean([s.max_ess for s in summaries]),
        min_ess_per_time=min_ess / cpu if cpu > 0 else float("nan"),
        med_ess_per_time=med_ess / cpu if cpu > 0 else float("nan"),
        min_ess_per_grad=min_ess / grads if grads > 0 else float("nan"),
    )


def _run_cell(
    model_factory: Callable[[], object],
    scheme: Scheme,
    args,
    block_index: int,
    clock,
) -> _CellStats:
    chains: List[ChainOutput] = []
    summaries: List[EssSummary] = []
    scheme_index = list(Scheme).index(scheme)
    for repetition in range(args.reps):
        model = model_factory()
        config = NutsConfig(
            scheme=scheme,
            target_accept=args.target_accept,
            max_tree_depth=args.max_depth,
        )
        rng = _chain_rng(args.seed, block_index, scheme_index, repetition)
        chain = run_chain(
            model,
            config,
            args.iterations,
            args.burn_in,
            rng=rng,
            iterations_include_burn_in=args.iterations_include_burn_in,
            clock=clock,
        )
        chains.append(chain)
        summaries.append(summarize(chain, cap_at_length=not args.raw_ess))
    return _aggregate(scheme, chains, summaries)


def _write_block_csv(path: Path, rows: List[Dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) if c != "scheme" else row[c] for c in BENCH_COLUMNS])


def _run_bench(
    args,
    out_dir: Path,
    blocks: List,
    stem: str,
    extra_metadata: Dict,
    clock,
) -> int:
    """Shared benchmark driver: blocks is a list of (title, file_token,
    model_factory)."""
    schemes = _parse_schemes(args.schemes, list(Scheme))
    tables: List[str] = []
    figure_blocks = []

    for block_index, (title, token, factory) in enumerate(blocks):
        rows = []
        for scheme in schemes:
            stats = _run_cell(factory, scheme, args, block_index, clock)
            rows.append(stats.as_row())
        csv_path = out_dir / f"{stem}_{token}.csv"
        _write_block_csv(csv_path, rows)
        tables.append(format_block_table(title, rows))
        figure_blocks.append((title, rows))
        print(f"wrote {csv_path}")

    text = "\n\n".join(tables) + "\n"
    text_path = out_dir / f"{stem}.txt"
    text_path.write_text(text, encoding="utf-8")
    print()
    print(text)

    if not args.no_figures and figure_blocks:
        path = render_bench_figure(figure_blocks, out_dir / f"{stem}.png", title=stem)
        print(f"wrote {path}")

    _write_metadata(out_dir / f"{stem}_metadata.json", args, extra_metadata)
    return 0


def cmd_bench_logistic(args, out_dir: Path, clock) -> int:
    if not args.data:
        raise SystemExit("bench-logistic needs at least one --data CSV")
    blocks = []
    failures = []
    for path in args.data:
        try:
            dataset = load_dataset(path)
            standardize_design(dataset)  # validate once up front
        except (OSError, DatasetFormatError, ValueError) as error:
            print(f"error: {error}", file=sys.stderr)
            failures.append(str(error))
            continue
        title = (
            f"dataset: {dataset.name} (n={dataset.num_observations}, d={dataset.dim})"
        )
        factory = (lambda ds: (lambda: standardize_design(ds)))(dataset)
        blocks.append((title, dataset.name, factory))
    if not blocks:
        print("error: no usable datasets", file=sys.stderr)
        return 1
    status = _run_bench(
        args,
        out_dir,
        blocks,
        "bench_logistic",
        {"datasets": [b[1] for b in blocks], "load_failures": failures},
        clock,
    )
    return 1 if failures else status


def cmd_bench_student_t(args, out_dir: Path, clock) -> int:
    dims = _parse_dims(args.dims)
    blocks = []
    for d in dims:
        title = f"student-t: d={d} (nu={args.nu:g}, rho={args.rho:g})"
        factory = (lambda dim: (lambda: StudentTModel(ar1_precision(dim, args.rho), args.nu)))(d)
        blocks.append((title, f"d{d}", factory))
    return _run_bench(
        args,
        out_dir,
        blocks,
        "bench_student_t",
        {"dims": dims, "nu": args.nu, "rho": args.rho},
        clock,
    )


def _write_metadata(path: Path, args, extra: Dict) -> None:
    payload = {
        "version": __version__,
        "command": args.command,
        "seed": args.seed,
        "iterations": args.iterations,
        "burn_in": args.burn_in,
        "iterations_include_burn_in": args.iterations_include_burn_in,
        "reps": args.reps,
        "target_accept": args.target_accept,
        "max_depth": args.max_depth,
        "schemes": [k.value for k in _parse_schemes(args.schemes, list(Scheme))],
        **extra,
    }
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def main(argv: Optional[Sequence[str]] = None, clock: Callable[[], float] = time.perf_counter) -> int:
    args = parse_args(argv)
    out_dir: Path = args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "analyze-gaussian":
            return cmd_analyze_gaussian(args, out_dir)
        if args.command == "sample":
            return cmd_sample(args, out_dir, clock)
        if args.command == "bench-logistic":
            return cmd_bench_logistic(args, out_dir, clock)
        return cmd_bench_student_t(args, out_dir, clock)
    except (DatasetFormatError, OSError) as error:
        print(f"error: {error}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
