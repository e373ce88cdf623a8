# hazsurf/cli.py
"""
Command line for hazsurf.

    hazsurf prepare --config run.json --input data.csv --out out/
    hazsurf fit     --config run.json --input out/binned.json --out out/
    hazsurf predict --model out/model.json --newdata new.csv --out out/
    hazsurf cif     --model recurrence=rec/model.json --model death=dth/model.json --out cif/
    hazsurf render  --grid out/hazard.csv --out out/

Settings layer as: defaults < --config JSON < environment (.env) < flags.
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

from .core.config import RunConfig
from .core.errors import ConfigError, HazSurfError
from .engine import HazardEngine
from .utils.helper import load_model, read_csv

logger = logging.getLogger(__name__)

# flag -> (dotted config path, argparse kwargs)
OVERRIDES: Dict[str, tuple] = {
    "--u-col": ("columns.u", {}),
    "--s-out-col": ("columns.s_out", {}),
    "--s-in-col": ("columns.s_in", {}),
    "--event-col": ("columns.event", {}),
    "--covariates": ("columns.covariates", {"nargs": "*"}),
    "--factors": ("columns.factors", {"nargs": "*"}),
    "--cause-col": ("columns.cause_column", {}),
    "--causes": ("columns.causes", {"nargs": "+"}),
    "--prediction-s-col": ("columns.prediction_s", {}),
    "--du": ("binning.du", {"type": float}),
    "--ds": ("binning.ds", {"type": float}),
    "--min-u": ("binning.min_u", {"type": float}),
    "--max-u": ("binning.max_u", {"type": float}),
    "--min-s": ("binning.min_s", {"type": float}),
    "--max-s": ("binning.max_s", {"type": float}),
    "--individual": ("binning.individual", {"choices": ["true", "false"]}),
    "--nseg-u": ("spline.nseg_u", {"type": int}),
    "--nseg-s": ("spline.nseg_s", {"type": int}),
    "--bdeg": ("spline.bdeg", {"type": int}),
    "--pord": ("spline.pord", {"type": int}),
    "--method": ("selection.method", {"choices": ["grid", "numeric"]}),
    "--criterion": ("selection.criterion", {"choices": ["aic", "bic"]}),
    "--start": ("selection.start", {"nargs": 2, "type": float, "metavar": ("LOG10_RHO_U", "LOG10_RHO_S")}),
    "--grid-u": ("selection.grid_u", {"nargs": "+", "type": float}),
    "--grid-s": ("selection.grid_s", {"nargs": "+", "type": float}),
    "--bic-sample-size": ("selection.bic_sample_size", {"choices": ["cells", "events"]}),
    "--concurrent": ("selection.concurrent", {"choices": ["true", "false"]}),
    "--surface-du": ("surface.du", {"type": float}),
    "--surface-ds": ("surface.ds", {"type": float}),
    "--t-max": ("surface.t_max", {"type": float}),
    "--cut-extrapolated": ("surface.cut_extrapolated", {"choices": ["true", "false"]}),
    "--slice-direction": ("surface.slice_direction", {"choices": ["u", "s"]}),
    "--slice-at": ("surface.slice_at", {"nargs": "+", "type": float}),
    "--n-reps": ("bootstrap.n_reps", {"type": int}),
    "--level": ("bootstrap.level", {"type": float}),
    "--palette": ("render.palette", {}),
    "--n-shades": ("render.n_shades", {"type": int}),
    "--contour-levels": ("render.contour_levels", {"type": int}),
    "--plane": ("render.plane", {"choices": ["us", "ts"]}),
    "--render-t-max": ("render.t_max", {"type": float}),
    "--render-cut-extrapolated": ("render.cut_extrapolated", {"choices": ["true", "false"]}),
    "--title": ("render.title", {}),
    "--xlab": ("render.xlab", {}),
    "--ylab": ("render.ylab", {}),
}


def _dest(flag: str) -> str:
    return "ov_" + flag.lstrip("-").replace("-", "_")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hazsurf", description="Hazard surfaces over two time scales")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--input", help="input CSV (or binned.json for fit)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    for flag, (_, kwargs) in OVERRIDES.items():
        common.add_argument(flag, dest=_dest(flag), default=None, **kwargs)

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", parents=[common], help="bin individual records")
    sub.add_parser("fit", parents=[common], help="fit the hazard model and write surfaces")
    p = sub.add_parser("predict", parents=[common], help="predict hazards for new rows")
    p.add_argument("--model", help="fitted model.json")
    p.add_argument("--newdata", help="CSV with u, s and covariate columns")
    c = sub.add_parser("cif", parents=[common], help="cumulative incidence from cause-specific models")
    c.add_argument("--model", action="append", default=[], metavar="CAUSE=PATH")
    r = sub.add_parser("render", parents=[common], help="render a grid file as SVG")
    r.add_argument("--grid", help="long-format grid CSV")
    r.add_argument("--svg", help="output SVG path (default: <out>/<grid>.svg)")
    return parser


def _parse_models(items: Sequence[str]) -> Dict[str, str]:
    models = {}
    for item in items:
        cause, sep, path = item.partition("=")
        if not sep or not cause or not path:
            raise ConfigError(f"--model expects CAUSE=PATH, got '{item}'")
        models[cause] = path
    return models


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_json(args.config) if args.config else RunConfig()
    config.apply_environment()

    overrides: Dict[str, Any] = {path: getattr(args, _dest(flag)) for flag, (path, _) in OVERRIDES.items()}
    overrides.update({
        "input_path": args.input,
        "output_dir": args.out,
        "seed": args.seed,
        "log_level": args.log_level,
    })
    if args.command == "predict":
        overrides["model_path"] = args.model
        overrides["newdata_path"] = args.newdata
    elif args.command == "render":
        overrides["grid_file"] = args.grid
    config.apply_overrides(overrides)
    if args.command == "cif" and args.model:
        config.models = _parse_models(args.model)
    return config.validate()


def _require(value: Optional[str], what: str) -> str:
    if not value:
        raise ConfigError(f"{what} is required")
    return value


def cmd_prepare(engine: HazardEngine, args: argparse.Namespace) -> int:
    binned = engine.prepare(engine.load_records())
    print(engine.write_prepare(binned), end="")
    return 0


def cmd_fit(engine: HazardEngine, args: argparse.Namespace) -> int:
    model = engine.fit(engine.load_binned_or_prepare())
    print(engine.write_fit(model, engine.surfaces(model)), end="")
    return 0


def cmd_predict(engine: HazardEngine, args: argparse.Namespace) -> int:
    config = engine.config
    model = load_model(_require(config.model_path, "--model"))
    newdata = read_csv(_require(config.newdata_path, "--newdata"))
    engine.write_predictions(engine.predict(model, newdata))
    return 0


def cmd_cif(engine: HazardEngine, args: argparse.Namespace) -> int:
    cif = engine.cif(engine.load_models(), seed=engine.config.seed)
    engine.write_cif(cif)
    return 0


def cmd_render(engine: HazardEngine, args: argparse.Namespace) -> int:
    path = engine.render(_require(engine.config.grid_file, "--grid"), args.svg)
    print(path)
    return 0


COMMANDS = {
    "prepare": cmd_prepare,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "cif": cmd_cif,
    "render": cmd_render,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
    except HazSurfError as e:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
        logger.error(str(e))
        return e.exit_code

    logging.basicConfig(level=(config.log_level or "INFO").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](HazardEngine(config), args)
    except HazSurfError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
