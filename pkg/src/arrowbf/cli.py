"""``arrowbf`` command-line tool.

Exit codes: 0 success, 1 configuration or input error, 2 runtime or
numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .experiment import (CHECK_TERMS, run_enhance, run_evaluate, run_localize, run_losscheck,
                         run_simulate)
from .wavio import write_json

logger = logging.getLogger("arrowbf")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # bad flags are configuration errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML or JSON experiment file")
    p.add_argument("--seed", type=int, help="base seed (non-negative)")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--alpha", type=float, action="append",
                   help="ARROW weight alpha; repeat to sweep")
    p.add_argument("--beta", type=float, action="append",
                   help="SI-SNR/ARROW weight beta; repeat to sweep")
    p.add_argument("--grid", choices=("coarse", "fine"), help="DOA search grid")
    p.add_argument("--workers", type=int, help="parallel scene workers")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="arrowbf",
        description="Beamforming experiments with the ARROW loss: simulate scenes, "
                    "optimize weights, localize and evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="synthesize scenes, sidecars and a manifest")
    _common(p)
    p.add_argument("--num-scenes", type=int, help="number of scenes")

    p = sub.add_parser("enhance", help="optimize weights for scenes")
    _common(p)
    p.add_argument("scenes", nargs="+", help="scene sidecars (.json) or a manifest")

    p = sub.add_parser("localize", help="DOA estimate from a weights file")
    _common(p)
    p.add_argument("weights", help="weights JSON written by `enhance`")
    p.add_argument("sidecar", help="scene sidecar JSON")

    p = sub.add_parser("evaluate", help="enhance, localize and score a manifest")
    _common(p)
    p.add_argument("manifest", help="manifest.json written by `simulate`")
    p.add_argument("--no-baseline", action="store_true", help="skip the beta = 1 baseline")

    p = sub.add_parser("losscheck", help="finite-difference check of the loss gradients")
    _common(p)
    p.add_argument("--num-scenes", type=int, default=20)
    p.add_argument("--directions", type=int, default=20)
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--inject-sign-flip", choices=CHECK_TERMS[:3],
                   help="negate one analytic gradient (negative control)")
    return parser


def _config(args):
    overrides = {
        "seed": args.seed,
        "alpha": args.alpha,
        "beta": args.beta,
        "grid": args.grid,
        "workers": args.workers,
        "num_scenes": getattr(args, "num_scenes", None) if args.command == "simulate" else None,
    }
    if getattr(args, "no_baseline", False):
        overrides["baseline"] = False
    return load_config(args.config, **overrides)


def _dispatch(args) -> int:
    out = Path(args.out)
    if args.command == "losscheck":
        cfg = _config(args)
        report = run_losscheck(cfg.seed, args.num_scenes, args.directions, args.step,
                               args.tolerance, args.inject_sign_flip)
        write_json(out / "losscheck.json", report)
        for term, err in report["max_relative_error"].items():
            status = "PASS" if err < args.tolerance else "FAIL"
            print(f"{status} {term:<17} max relative error {err:.3e}")
        return EXIT_OK if report["passed"] else EXIT_RUNTIME

    cfg = _config(args)
    if args.command == "simulate":
        manifest = run_simulate(cfg, out)
        print(f"wrote {manifest['num_scenes']} scenes and {out / 'manifest.json'}")
    elif args.command == "enhance":
        results = run_enhance(args.scenes, cfg, out)
        for r in results:
            print(f"{r['id']}: loss {r['initial_loss']:.4f} -> {r['best_loss']:.4f}; {r['weights']}")
    elif args.command == "localize":
        record = run_localize(args.weights, args.sidecar, cfg.grid, out)
        print(json.dumps({k: v for k, v in record.items() if k != "per_frame"}))
    elif args.command == "evaluate":
        report = run_evaluate(args.manifest, cfg, out)
        failed = sum(1 for r in report.records if r.get("error"))
        print(f"{len(report.records)} records ({failed} failed), "
              f"{len(report.aggregates)} cells; wrote {out / 'report.json'}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with np.errstate(all="ignore"):
            return _dispatch(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"arrowbf: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # numerical or other runtime failure
        logger.debug("failure", exc_info=True)
        print(f"arrowbf: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
