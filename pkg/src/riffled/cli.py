"""Command-line front end: ``riffled <subcommand> [flags]``.

Tabular reports are CSV, models and structures JSON. Output goes to stdout
unless ``--out`` is given. Every random step is driven by ``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from . import config, dense, formats, fourier, riffle, structure, synth
from .dense import SampleSet


class CLIError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _rng(args) -> np.random.Generator:
    return np.random.default_rng(args.seed)


def _need(args, name: str) -> str:
    value = getattr(args, name)
    if value is None:
        flag = "in" if name == "in_path" else name.replace("_", "-")
        raise CLIError(f"--{flag} is required")
    return value


def _load_samples(path: str) -> SampleSet:
    return formats.load_rankings(path)


def _check_k(k: int | None, n: int) -> None:
    if k is not None and not 1 <= k <= n - 1:
        raise CLIError(f"--k must lie in 1..{n - 1} for n={n}")


def _learn(args, samples: SampleSet, objective: str | None = None) -> structure.LearnedHierarchy:
    _check_k(args.k, samples.n)
    mode = args.mode or ("thin" if args.k is not None else "general")
    return structure.learn_hierarchy(
        samples, mode=mode, k=args.k, leaf_cap=args.leaf_cap,
        objective=objective or args.objective, method=args.method, smoothing=args.smoothing,
    )


def cmd_learn_structure(args) -> None:
    samples = _load_samples(_need(args, "in_path"))
    if samples.total == 0:
        raise CLIError("cannot learn a structure from an empty sample file")
    learned = _learn(args, samples)
    doc = formats.structure_to_json(
        learned.tree, method=learned.method, mode=learned.mode, k=learned.k,
        objective=learned.objective, leaf_cap=learned.leaf_cap, describe=learned.describe(),
    )
    _emit(json.dumps(doc, indent=1) + "\n", args.out)


def cmd_fit_params(args) -> None:
    samples = _load_samples(_need(args, "in_path"))
    if samples.total == 0:
        raise CLIError("cannot fit parameters from an empty sample file")
    if args.structure:
        tree = formats.load_structure(args.structure)
        if len(tree.items) != samples.n:
            raise CLIError(f"structure covers {len(tree.items)} items but the data has n={samples.n}")
    else:
        tree = _learn(args, samples).tree
    model = riffle.fit_parameters(tree, samples, args.smoothing or 0.0)
    if args.family != "table":
        model = riffle.with_parametric_interleavings(model, args.family, args.components, _rng(args))
    _emit(json.dumps(formats.model_to_json(model), indent=1) + "\n", args.out)


def cmd_evaluate(args) -> None:
    model = formats.load_model(_need(args, "model"))
    test_path = args.test or args.in_path
    if test_path is None:
        raise CLIError("--test is required")
    samples = _load_samples(test_path)
    if samples.n != model.n:
        raise CLIError(f"model has n={model.n} but the test data has n={samples.n}")
    if samples.total == 0:
        raise CLIError("test file contains no rankings")
    ll = riffle.mean_log_likelihood(model, samples)
    _emit(_csv([("mean_log_likelihood", repr(ll)), ("samples", samples.total)], ("metric", "value")), args.out)


def cmd_sample(args) -> None:
    model = formats.load_model(_need(args, "model"))
    if args.count < 0:
        raise CLIError("--count must be nonnegative")
    samples = synth.draw_samples(model, args.count, _rng(args))
    _emit(formats.format_rankings(samples, counted=False), args.out)


def _marginal_rows(samples: SampleSet, k: int):
    n = samples.n
    tuples = list(itertools.permutations(range(n), k))
    counts: dict[tuple, int] = {}
    orders = np.argsort(samples.rankings, axis=1)
    for order, c in zip(orders, samples.counts):
        for ranks in tuples:
            key = (ranks, tuple(int(order[r]) for r in ranks))
            counts[key] = counts.get(key, 0) + int(c)
    for (ranks, items), c in sorted(counts.items()):
        yield [r + 1 for r in ranks] + [v + 1 for v in items] + [c]


def cmd_marginals(args) -> None:
    if args.order < 1:
        raise CLIError("--order must be at least 1")
    if args.model:
        model = formats.load_model(args.model)
        config.check_dense_n(model.n, "model marginals")
        if args.order > model.n:
            raise CLIError(f"--order must be at most n={model.n}")
        table = dense.kth_order_marginals(riffle.to_dense(model), args.order)
        rows = [
            [r + 1 for r in ranks] + [v + 1 for v in items] + [repr(float(table.values[a, b]))]
            for a, ranks in enumerate(table.tuples) for b, items in enumerate(table.tuples)
        ]
        header = [f"rank_{i + 1}" for i in range(args.order)] + [f"item_{i + 1}" for i in range(args.order)] + ["probability"]
        _emit(_csv(rows, header), args.out)
        return
    samples = _load_samples(_need(args, "in_path"))
    if args.order > samples.n:
        raise CLIError(f"--order must be at most n={samples.n}")
    if args.order == 1:
        mat = dense.sample_first_order_counts(samples)
        rows = [[r + 1] + [int(v) for v in mat[r]] for r in range(samples.n)]
        _emit(_csv(rows, ["rank"] + [f"item_{j + 1}" for j in range(samples.n)]), args.out)
        return
    k = args.order
    header = [f"rank_{i + 1}" for i in range(k)] + [f"item_{i + 1}" for i in range(k)] + ["count"]
    _emit(_csv(_marginal_rows(samples, k), header), args.out)


def cmd_fourier_check(args) -> None:
    n = args.n
    if not 2 <= n <= config.DEFAULT_MAX_FOURIER_N:
        raise CLIError(f"--n must lie in 2..{config.DEFAULT_MAX_FOURIER_N}")
    alpha = 0.5 if args.alpha is None else args.alpha
    if not 0 <= alpha <= 1:
        raise CLIError("--alpha must lie in [0, 1]")
    rows, worst = [], 0.0
    for p in range(0, n + 1):
        q = n - p
        fast = fourier.rifflehat(p, q, alpha, args.order)
        direct = fourier.fourier_transform(riffle.biased_riffle(p, q, alpha).to_dense(), args.order)
        dev = fast.max_abs_diff(direct)
        worst = max(worst, dev)
        rows.append((p, q, alpha, repr(dev)))
    rows.append(("all", "all", alpha, repr(worst)))
    _emit(_csv(rows, ("p", "q", "alpha", "max_deviation")), args.out)
    if worst >= args.tolerance:
        raise CLIError(f"max deviation {worst:.3g} exceeds tolerance {args.tolerance:g}")


def _parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CLIError(f"--sizes must be a comma-separated list of integers, got {text!r}") from None
    if not sizes or any(s < 1 for s in sizes):
        raise CLIError("--sizes needs at least one positive integer")
    return sizes


def cmd_bootstrap(args) -> None:
    samples = _load_samples(_need(args, "in_path"))
    if samples.total == 0:
        raise CLIError("cannot bootstrap an empty sample file")
    if args.bootstrap_B < 1:
        raise CLIError("--bootstrap-B must be at least 1")
    sizes = _parse_sizes(args.sizes) if args.sizes else [samples.total]
    _check_k(args.k, samples.n)
    objectives = [args.objective] if args.objective else ["cross", "balanced"]
    mode = args.mode or ("thin" if args.k is not None else "general")
    rows = []
    for obj in objectives:
        opts = dict(mode=mode, k=args.k, leaf_cap=args.leaf_cap, objective=obj, method=args.method, smoothing=args.smoothing)
        reference = formats.load_structure(args.structure) if args.structure else None
        report = structure.bootstrap_stability(samples, args.bootstrap_B, sizes, _rng(args), reference=reference, **opts)
        rows.extend((size, B, f"{name}:{obj}", repr(frac)) for size, B, name, frac in report.rows())
    _emit(_csv(rows, ("size", "B", "measure", "fraction")), args.out)


def cmd_synth(args) -> None:
    if args.n is None:
        raise CLIError("--n is required")
    if args.m < 0:
        raise CLIError("--m must be nonnegative")
    k = args.k if args.k is not None else 1
    _check_k(k, args.n)
    samples, model = synth.synth(args.structure_kind, args.n, args.m, args.seed, k=k, leaf_cap=args.leaf_cap,
                                 interleavings=args.interleavings)
    _emit(formats.format_rankings(samples, counted=False), args.out)
    if args.model_out:
        formats.save_model(model, args.model_out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riffled", description="Riffle independent models of rankings.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, learn=False):
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--seed", type=int, default=0)
        if learn:
            p.add_argument("--k", type=int, help="size of the A side (thin mode)")
            p.add_argument("--mode", choices=("thin", "general"))
            p.add_argument("--leaf-cap", type=int, default=2)
            p.add_argument("--objective", choices=("cross", "balanced"))
            p.add_argument("--method", choices=("exhaustive", "anchors"), default="exhaustive")
            p.add_argument("--smoothing", type=float, help="pseudocount per cell for MI estimates and fitted tables")

    p = sub.add_parser("learn-structure", help="learn a hierarchy from rankings (JSON)")
    p.add_argument("--in", dest="in_path", metavar="PATH", help="rankings file")
    common(p, learn=True)
    p.set_defaults(func=cmd_learn_structure)

    p = sub.add_parser("fit-params", help="fit model parameters for a structure (JSON)")
    p.add_argument("--in", dest="in_path", metavar="PATH", help="rankings file")
    p.add_argument("--structure", help="structure or model JSON; learned from the data if omitted")
    p.add_argument("--family", choices=("table", "biased", "mixture"), default="table")
    p.add_argument("--components", type=int, default=2)
    common(p, learn=True)
    p.set_defaults(func=cmd_fit_params)

    p = sub.add_parser("evaluate", help="mean log-likelihood of test rankings (CSV)")
    p.add_argument("--model")
    p.add_argument("--test")
    p.add_argument("--in", dest="in_path", metavar="PATH", help="alias for --test")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sample", help="draw rankings from a model")
    p.add_argument("--model")
    p.add_argument("--count", type=int, default=1000)
    common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("marginals", help="k-th order marginal counts (CSV)")
    p.add_argument("--in", dest="in_path", metavar="PATH", help="rankings file")
    p.add_argument("--model", help="report exact marginals of a model instead")
    p.add_argument("--order", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_marginals)

    p = sub.add_parser("fourier-check", help="closed-form riffle transform vs direct transform (CSV)")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--alpha", type=float)
    p.add_argument("--order", type=int)
    p.add_argument("--tolerance", type=float, default=1e-9)
    common(p)
    p.set_defaults(func=cmd_fourier_check)

    p = sub.add_parser("bootstrap", help="structure stability under resampling (CSV)")
    p.add_argument("--in", dest="in_path", metavar="PATH", help="rankings file")
    p.add_argument("--bootstrap-B", type=int, default=200)
    p.add_argument("--sizes", help="comma-separated resample sizes (default: the data size)")
    p.add_argument("--structure", help="reference structure; learned from all data if omitted")
    common(p, learn=True)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("synth", help="sample a random model of a given shape")
    p.add_argument("--structure", dest="structure_kind", choices=("thin", "balanced", "split"), default="thin")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--leaf-cap", type=int, default=2)
    p.add_argument("--interleavings", choices=("table", "biased"), default="table")
    p.add_argument("--model-out", help="write the ground-truth model JSON here")
    common(p)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (CLIError, ValueError, RuntimeError, OSError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"riffled {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
