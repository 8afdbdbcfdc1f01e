"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime error. Outputs are written
atomically, so a failed command leaves no partial files behind.
"""
from __future__ import annotations

import argparse
import json
import sys

from .errors import CrossClassError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _cmd_gen(a) -> int:
    from .synth import GenConfig, generate_stack
    from .volume import save_stack

    cfg = GenConfig.load(a.config) if a.config else GenConfig()
    gt, elev = generate_stack(cfg)
    save_stack(gt, a.gt)
    save_stack(elev, a.elev)
    print(f"wrote {a.gt} ({int(gt.data.max(initial=0))} objects) and {a.elev}, dims {cfg.dims.shape}")
    return EXIT_OK


def _cmd_seed(a) -> int:
    from .seeding import SeedConfig, seed_volume
    from .volume import ScalarStack, load_stack, save_stack

    elev = load_stack(a.elev)
    if not isinstance(elev, ScalarStack):
        raise CrossClassError(f"{a.elev} is not a scalar stack")
    sv = seed_volume(elev, SeedConfig(a.h, a.stop, a.min_area), workers=a.workers)
    save_stack(sv.labels, a.out)
    print(f"wrote {a.out}: {sv.global_n} seeds")
    return EXIT_OK


def _cmd_run(a) -> int:
    from .pipeline import PipelineConfig, run_pipeline

    cfg = PipelineConfig.load(a.config)
    if a.workers is not None:
        from dataclasses import replace

        cfg = replace(cfg, workers=a.workers)
    report = run_pipeline(cfg)
    print(json.dumps({**report.to_json(), "output": str(report.output)}))
    return EXIT_OK


def _cmd_eval(a) -> int:
    from .metrics import evaluate
    from .volume import load_stack

    pred, gt = load_stack(a.pred).data, load_stack(a.gt).data
    m = evaluate(pred, gt, ignore_background=not a.include_bg, seeded_only=a.seeded_only)
    keys = ("rand_error", "precision", "recall", "vi", "vi_split", "vi_merge")
    print("\t".join(f"{m[k]:.6f}" for k in keys))
    return EXIT_OK


def _cmd_cost(a) -> int:
    from .costmodel import CostConfig, cost_rows, object_density_map
    from .volume import load_stack

    for rho in a.rho:
        CostConfig(a.fov, a.l, rho)
    density = object_density_map(load_stack(a.labels), a.fov)
    for rho, single, c3, ratio, peak in cost_rows(density, a.l, a.rho, a.fov):
        print(f"{rho:g}\t{single}\t{c3}\t{ratio:.6f}\t{peak}")
    return EXIT_OK


def _cmd_codebook(a) -> int:
    from .encoding import build_codebook, min_digits

    k = a.k if a.k is not None else min_digits(max(a.n, 1), a.l)
    cb = build_codebook(a.n, a.l, k, a.seed)
    if a.out:
        cb.save(a.out)
        print(f"wrote {a.out}: N={cb.n_labels} l={cb.l} k={cb.k} min_hamming={cb.min_hamming()}")
    else:
        for m in range(1, cb.n_labels + 1):
            print(m, *cb.code(m))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crossclass", description="Cross-classification seed transfer and agglomeration.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic ground-truth and elevation pair")
    g.add_argument("--config", help="JSON generator config (defaults used when omitted)")
    g.add_argument("--gt", required=True, help="output label stack")
    g.add_argument("--elev", required=True, help="output elevation stack")
    g.set_defaults(func=_cmd_gen)

    s = sub.add_parser("seed", help="per-section seeding of an elevation stack")
    s.add_argument("--elev", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--h", type=float, default=0.05, help="minima depth")
    s.add_argument("--stop", type=float, default=0.5, help="flood stop level")
    s.add_argument("--min-area", type=int, default=4, dest="min_area")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=_cmd_seed)

    r = sub.add_parser("run", help="run the full pipeline from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--workers", type=int, help="override the config's worker count")
    r.set_defaults(func=_cmd_run)

    e = sub.add_parser("eval", help="adapted Rand error and VI of a segmentation")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--include-bg", action="store_true", help="also score gt background voxels")
    e.add_argument(
        "--seeded-only", action="store_true", help="score only voxels that the prediction labels"
    )
    e.set_defaults(func=_cmd_eval)

    c = sub.add_parser("cost", help="classifier-call cost model over a label stack")
    c.add_argument("--labels", required=True)
    c.add_argument("--fov", type=int, required=True)
    c.add_argument("--l", type=int, required=True)
    c.add_argument("--rho", type=_floats, required=True, help="comma-separated revisit ratios")
    c.set_defaults(func=_cmd_cost)

    b = sub.add_parser("codebook", help="build and print or save a random codebook")
    b.add_argument("--n", type=int, required=True, help="number of labels")
    b.add_argument("--l", type=int, default=4)
    b.add_argument("--k", type=int, help="digits (default: minimum for n)")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    b.set_defaults(func=_cmd_codebook)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if not e.code else EXIT_USAGE
    try:
        return args.func(args)
    except (CrossClassError, OSError, ValueError) as e:
        print(f"crossclass {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
