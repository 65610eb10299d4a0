"""``loadshield`` command line: build-models, score, redteam, synth.

Exit codes: 0 success, 2 usage/config error, 3 data-quality failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, PipelineConfig, load_config
from .pipeline import (EXIT_CONFIG, PipelineError, cmd_build_models, cmd_redteam, cmd_score,
                       cmd_synth)

log = logging.getLogger("loadshield")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loadshield", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"loadshield {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="TOML or JSON run configuration")
        sp.add_argument("--out", help="output directory (overrides output.out_dir)")
        sp.add_argument("--seed", type=int, help="override the run seed")
        sp.add_argument("--no-plots", action="store_true", help="skip matplotlib figures")
        return sp

    b = common(sub.add_parser("build-models", help="cluster businesses and persist baseline models"))
    b.add_argument("--k-max", type=int)
    b.add_argument("--linkage", choices=["single", "complete", "average", "ward"])
    s = common(sub.add_parser("score", help="score inbound profiles against persisted models"))
    s.add_argument("--models", help="directory of model JSON files")
    s.add_argument("--masks", action="store_true", help="export per-business violation masks")
    r = common(sub.add_parser("redteam", help="write bypass/RCSA fixtures in the readings schema"))
    r.add_argument("--models", help="directory of model JSON files")
    common(sub.add_parser("synth", help="write a synthetic readings/prices dataset"))
    return p


def _apply_overrides(cfg: PipelineConfig, args) -> PipelineConfig:
    if args.out:
        cfg.out_dir = str(Path(args.out).resolve())
    if args.seed is not None:
        cfg.seed = args.seed
    if args.no_plots:
        cfg.plots = False
    if getattr(args, "k_max", None) is not None:
        cfg.k_max = args.k_max
    if getattr(args, "linkage", None):
        cfg.linkage = args.linkage
    if getattr(args, "masks", False):
        cfg.export_masks = True
    cfg.__post_init__()
    return cfg


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("LOADSHIELD_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        models = Path(args.models).resolve() if getattr(args, "models", None) else None
        if args.command == "build-models":
            res = cmd_build_models(cfg)
            ks = {k: v["selected_k"] for k, v in res.manifest["counts"]["industries"].items()}
            print(f"built {len(res.models)} models; selected k per industry: {ks}")
        elif args.command == "score":
            res = cmd_score(cfg, models)
            print(f"scored {len(res.reports)} businesses, {len(res.errors)} errors -> "
                  f"{cfg.out / 'report' / 'scores.csv'}")
            if not res.reports and not res.errors:
                log.warning("empty inbound set; wrote an empty report")
            return res.exit_code
        elif args.command == "redteam":
            man = cmd_redteam(cfg, models)
            print(f"wrote {man['counts']['rows']} attack rows -> {cfg.out / 'fixtures' / 'attacks.csv'}")
        elif args.command == "synth":
            man = cmd_synth(cfg)
            for k, v in man["outputs"].items():
                print(f"{k}: {v['path']}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
