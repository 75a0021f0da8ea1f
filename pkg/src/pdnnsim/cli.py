"""Command-line entry point.

    pdnnsim dataset  --classes 2 --seed 7 --out-dir data/
    pdnnsim run      --config run.json --classes 4 --mode physical --out-dir runs/x
    pdnnsim plotdata --report runs/x/report.json
    pdnnsim budget   --config run.json

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .dataset import DatasetSpec, generate_dataset
from .errors import ConfigError, PdnnError, StageError
from .pipeline import RunConfig, run_pipeline, write_plot_data

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3

log = logging.getLogger("pdnnsim")


def _run_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="run configuration (JSON)")
    p.add_argument("--classes", type=int, choices=(2, 4))
    p.add_argument("--mode", choices=("ideal", "physical"))
    p.add_argument("--seed", type=int, help="master seed for every named seed")
    p.add_argument("--iterations", type=int, help="cross-validation iterations")
    p.add_argument("--fit-fraction", type=float, help="share of samples used to fit thresholds")
    p.add_argument("--out-dir", type=Path)
    return p


def build_parser() -> argparse.ArgumentParser:
    # argparse itself exits with 2 on bad usage, matching EXIT_CONFIG
    parser = argparse.ArgumentParser(prog="pdnnsim", description="Photonic deep neural network simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _run_options()

    ds = sub.add_parser("dataset", parents=[common], help="generate a synthetic letter dataset")
    ds.add_argument("--per-class", type=int, default=108)

    sub.add_parser("run", parents=[common], help="run the full pipeline and write the report")

    pd = sub.add_parser("plotdata", help="emit plot series and figures from a report")
    pd.add_argument("--report", type=Path, required=True)
    pd.add_argument("--out-dir", type=Path)

    sub.add_parser("budget", parents=[common], help="print the optical loss budget")
    return parser


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    return cfg.with_overrides(classes=args.classes, mode=args.mode, seed=args.seed,
                              iterations=args.iterations, fit_fraction=args.fit_fraction,
                              out_dir=args.out_dir)


def cmd_dataset(args) -> int:
    cfg = _config(args)
    seed = args.seed if args.seed is not None else cfg.named_seeds()["eval_dataset"]
    try:
        spec = DatasetSpec(cfg.classes, args.per_class, seed, cfg.dataset_spec("eval_dataset").noise)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = args.out_dir or Path(".")
    stem = f"letters_{spec.classes}class_seed{spec.seed}"
    try:
        out.mkdir(parents=True, exist_ok=True)
        ds = generate_dataset(spec)
        ds.save_csv(out / f"{stem}.csv")
        ds.save_manifest(out / f"{stem}_manifest.json")
    except OSError as exc:
        raise StageError("dataset", exc) from exc
    print(f"wrote {len(ds)} samples to {out / (stem + '.csv')}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    report = run_pipeline(cfg)
    out = cfg.resolve("out_dir")
    comp = report.data["mode_comparison"]
    ev = report.data["evaluation"]
    print(f"{cfg.classes}-class {cfg.mode}: mean accuracy {100 * ev['mean_accuracy']:.2f}% "
          f"over {ev['iterations']} iterations "
          f"(ideal {100 * comp['ideal']:.2f}%, physical {100 * comp['physical']:.2f}%)")
    print(f"report {out / 'report.json'}  hash {report.report_hash[:16]}")
    return EXIT_OK


def cmd_plotdata(args) -> int:
    if not args.report.is_file():
        raise ConfigError(f"report not found: {args.report}")
    out = args.out_dir or args.report.parent
    try:
        paths = write_plot_data(args.report, out)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed report {args.report}: {exc}") from None
    except OSError as exc:
        raise StageError("plotdata", exc) from exc
    for p in paths.values():
        print(p)
    return EXIT_OK


def cmd_budget(args) -> int:
    cfg = _config(args)
    former = cfg.image_former()
    d = former.budget.to_dict()
    d["photocurrent_per_pixel_a"] = float(cfg.device_params().photodiode.responsivity * former.gain.mean())
    print(json.dumps(d, indent=2))
    return EXIT_OK


COMMANDS = {"dataset": cmd_dataset, "run": cmd_run, "plotdata": cmd_plotdata, "budget": cmd_budget}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except PdnnError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
