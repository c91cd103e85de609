"""``qgnn`` command line: gen-data, train, eval, expressibility.

Settings resolve as flag > config file > built-in default. The config file is
INI-style; keys in ``[DEFAULT]`` apply to every subcommand and a section named
after the subcommand (``[train]``, ...) overrides them. Keys are the long flag
names with dashes or underscores. ``QGNN_OUTPUT_DIR`` overrides the output
directory unless ``--out-dir`` is given.

Exit codes: 0 ok, 2 usage, 3 I/O, 4 parse or schema, 5 numerical failure.
"""

import argparse
import configparser
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__, kernels
from . import dataset as ds
from . import expressibility as expr
from . import training
from .losses import LossConfig
from .model import DEFAULT_ENGINE, ENGINES

log = logging.getLogger("qgnn")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_PARSE = 4
EXIT_NUMERICAL = 5

CONFIG_SCHEMA = 1
OUTPUT_ENV = "QGNN_OUTPUT_DIR"


class UsageError(Exception):
    pass


class ConfigError(Exception):
    pass


def _layer_range(text):
    """'1..8', '1-8', '2,3,5' or '4' -> list of ints >= 1."""
    text = str(text).strip()
    try:
        for sep in ("..", "-"):
            if sep in text:
                lo, hi = (int(t) for t in text.split(sep, 1))
                layers = list(range(lo, hi + 1))
                break
        else:
            layers = [int(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse layer range {text!r}") from None
    if not layers or min(layers) < 1:
        raise UsageError(f"layer range {text!r} is empty or contains values < 1")
    return layers


def _bool(text):
    if isinstance(text, bool):
        return text
    val = str(text).strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Option:
    name: str
    type: object
    default: object
    help: str


_ORACLE = ds.OracleConfig()

OPTIONS = {
    "gen-data": [
        Option("n", int, 1000, "raw samples to generate"),
        Option("factor", int, 10, "augmentation factor (copies per raw sample, original included)"),
        Option("seed", int, 0, "generation seed"),
        Option("augment-seed", int, 1, "augmentation seed"),
        Option("noise", float, _ORACLE.noise, "std of the Gaussian geometry perturbation"),
        Option("translation", float, _ORACLE.translation, "half-width of the uniform translation"),
        Option("rotation-max-deg", float, _ORACLE.rotation_max_deg, "max rigid rotation angle at generation"),
        Option("augment-max-deg", float, 180.0, "max rotation angle of augmented copies"),
        Option("r0", float, _ORACLE.r0, "equilibrium O-H bond length"),
        Option("theta0-deg", float, _ORACLE.theta0_deg, "equilibrium H-O-H angle in degrees"),
        Option("k-bond", float, _ORACLE.k_bond, "bond force constant"),
        Option("k-angle", float, _ORACLE.k_angle, "angle force constant"),
        Option("output", str, "dataset.jsonl", "dataset file (relative paths land in the output dir)"),
    ],
    "train": [
        Option("data", str, "dataset.jsonl", "dataset file"),
        Option("layers", int, 2, "circuit layers N"),
        Option("lr", float, 1e-3, "Adam learning rate"),
        Option("epochs", int, 500, "epoch cap"),
        Option("patience", int, 50, "early-stopping patience in epochs"),
        Option("batch-size", int, 128, "mini-batch size"),
        Option("gamma", float, 0.03125, "KLI weight"),
        Option("epsilon", float, 1e-8, "KLI quotient guard"),
        Option("clip-kli", _bool, True, "clip the batch KLI sum at zero"),
        Option("split-seed", int, 0, "train/val/test split seed"),
        Option("init-seed", int, 0, "parameter initialisation seed"),
        Option("shuffle-seed", int, 0, "mini-batch shuffling seed"),
        Option("engine", str, DEFAULT_ENGINE, "simulation engine: factored or dense"),
        Option("checkpoint", str, "checkpoint.json", "checkpoint file"),
        Option("loss-log", str, "loss_log.csv", "per-epoch loss CSV"),
    ],
    "eval": [
        Option("data", str, "dataset.jsonl", "dataset file"),
        Option("checkpoint", str, "checkpoint.json", "checkpoint file"),
        Option("layers", int, None, "expected layer count (rejects a mismatching checkpoint)"),
        Option("engine", str, DEFAULT_ENGINE, "simulation engine: factored or dense"),
        Option("report", str, "eval_report.csv", "metrics CSV"),
    ],
    "expressibility": [
        Option("layers", _layer_range, "1..8", "layer counts, e.g. 1..8 or 1,2,4"),
        Option("samples", int, 5000, "fidelity samples S per layer count"),
        Option("bins", int, 75, "histogram bins"),
        Option("seed", int, 0, "parameter sampling seed"),
        Option("engine", str, DEFAULT_ENGINE, "simulation engine: factored or dense"),
        Option("output", str, "expressibility.csv", "CSV output"),
    ],
}


def _key(name):
    return name.replace("-", "_")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--out-dir", help=f"output directory (env {OUTPUT_ENV}, default .)")
    common.add_argument("--threads", type=int, help="cap on kernel worker threads")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="qgnn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qgnn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, opts in OPTIONS.items():
        p = sub.add_parser(cmd, parents=[common])
        for opt in opts:
            # defaults stay None so explicit flags can be told apart
            p.add_argument(f"--{opt.name}", dest=_key(opt.name), default=None, help=opt.help)
    return parser


def _read_config(path, command):
    if path is None:
        return {}
    # no implicit default section: [DEFAULT] is read as an ordinary one so
    # its keys can be told apart from the subcommand's own
    cp = configparser.ConfigParser(default_section="\x00", interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    known = {_key(o.name) for o in OPTIONS[command]} | {"out_dir", "threads"}
    shared = dict(cp["DEFAULT"]) if cp.has_section("DEFAULT") else {}
    own = dict(cp[command]) if cp.has_section(command) else {}
    unknown = sorted({_key(k) for k in own} - known)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) in [{command}]: {', '.join(unknown)}")
    # shared keys that only another subcommand uses are ignored
    values = {_key(k): v for k, v in shared.items() if _key(k) in known}
    values.update({_key(k): v for k, v in own.items()})
    return values


def resolve(args):
    """Fully resolved settings dict for ``args.command``."""
    file_values = _read_config(args.config, args.command)

    cfg = {"command": args.command}
    for opt in OPTIONS[args.command]:
        key = _key(opt.name)
        raw = getattr(args, key)
        if raw is None:
            raw = file_values.get(key, opt.default)
        if raw is None:
            cfg[key] = None
            continue
        try:
            cfg[key] = opt.type(raw)
        except (TypeError, ValueError):
            raise UsageError(f"--{opt.name}: invalid value {raw!r}") from None

    out_dir = args.out_dir or os.environ.get(OUTPUT_ENV) or file_values.get("out_dir") or "."
    cfg["out_dir"] = str(out_dir)
    threads = args.threads if args.threads is not None else file_values.get("threads")
    cfg["threads"] = int(threads) if threads is not None else None
    if cfg["threads"] is not None and cfg["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    return cfg


def _out_path(cfg, name):
    p = Path(name)
    return p if p.is_absolute() else Path(cfg["out_dir"]) / p


def _in_path(cfg, name):
    """Input files: absolute, relative to cwd if present, else in the output dir."""
    p = Path(name)
    if p.is_absolute() or p.exists():
        return p
    return Path(cfg["out_dir"]) / p


def echo_config(cfg):
    doc = {
        "config_schema_version": CONFIG_SCHEMA,
        "qgnn_version": __version__,
        "kernel_backend": kernels.BACKEND_NAME,
        **cfg,
    }
    path = Path(cfg["out_dir"]) / f"{cfg['command']}_config.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _positive(cfg, *keys):
    for key in keys:
        if cfg[key] is not None and cfg[key] < 1:
            raise UsageError(f"--{key.replace('_', '-')} must be >= 1, got {cfg[key]}")


# --- subcommands ------------------------------------------------------------


def cmd_gen_data(cfg):
    _positive(cfg, "n", "factor")
    if cfg["noise"] < 0 or cfg["translation"] < 0:
        raise UsageError("noise and translation must be non-negative")
    oracle = ds.OracleConfig(
        r0=cfg["r0"],
        theta0_deg=cfg["theta0_deg"],
        k_bond=cfg["k_bond"],
        k_angle=cfg["k_angle"],
        noise=cfg["noise"],
        translation=cfg["translation"],
        rotation_max_deg=cfg["rotation_max_deg"],
    )
    raw = ds.generate_synthetic(cfg["n"], cfg["seed"], oracle)
    samples = ds.augment(raw, cfg["factor"], cfg["augment_seed"], cfg["augment_max_deg"])
    header = ds.DatasetHeader(
        seed=cfg["seed"],
        augment_seed=cfg["augment_seed"],
        factor=cfg["factor"],
        n_raw=cfg["n"],
        n_samples=len(samples),
        augment_max_angle_deg=cfg["augment_max_deg"],
        oracle=dict(vars(oracle)),
    )
    path = ds.write_dataset(_out_path(cfg, cfg["output"]), samples, header)
    print(f"wrote {len(samples)} samples to {path}")
    return EXIT_OK


def _load_splits(cfg, split_seed, scalers=None):
    samples, header = ds.read_dataset(_in_path(cfg, cfg["data"]))
    sp = ds.split(len(samples), split_seed)
    pick = lambda idx: [samples[i] for i in idx]  # noqa: E731
    train_ds, scalers = ds.preprocess(pick(sp.train), scalers)
    val_ds, _ = ds.preprocess(pick(sp.val), scalers)
    test_ds, _ = ds.preprocess(pick(sp.test), scalers)
    return header, sp, scalers, train_ds, val_ds, test_ds


def _engine(cfg):
    if cfg["engine"] not in ENGINES:
        raise UsageError(f"--engine must be one of {', '.join(ENGINES)}")
    return cfg["engine"]


LOSS_COLUMNS = ("epoch", "train_loss", "val_loss", "train_loss_x", "train_loss_y", "train_loss_z")


def write_loss_log(path, history):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOSS_COLUMNS)
        for row in history:
            writer.writerow([row["epoch"]] + [repr(float(row[c])) for c in LOSS_COLUMNS[1:]])
    return Path(path)


def cmd_train(cfg):
    _positive(cfg, "layers", "epochs", "patience", "batch_size")
    engine = _engine(cfg)
    header, sp, scalers, train_ds, val_ds, _ = _load_splits(cfg, cfg["split_seed"])
    loss_cfg = LossConfig(
        gamma=cfg["gamma"],
        epsilon=cfg["epsilon"],
        batch_size=cfg["batch_size"],
        clip_kli=cfg["clip_kli"],
    )
    tcfg = training.TrainConfig(
        n_layers=cfg["layers"],
        lr=cfg["lr"],
        epochs=cfg["epochs"],
        patience=cfg["patience"],
        loss=loss_cfg,
        init_seed=cfg["init_seed"],
        shuffle_seed=cfg["shuffle_seed"],
    )

    def progress(row):
        log.info("epoch %4d  train %.6f  val %.6f", row["epoch"], row["train_loss"], row["val_loss"])

    state, history = training.train(train_ds, val_ds, tcfg, engine=engine, on_epoch=progress)
    seeds = {
        "data": header.seed,
        "augment": header.augment_seed,
        "split": cfg["split_seed"],
        "init": cfg["init_seed"],
        "shuffle": cfg["shuffle_seed"],
    }
    ckpt = training.save_checkpoint(
        _out_path(cfg, cfg["checkpoint"]),
        state.best_params,
        scalers=scalers,
        config=tcfg,
        best_epoch=state.best_epoch,
        best_val=state.best_val,
        seeds=seeds,
        extra={
            "epochs_run": state.epoch,
            "dataset": {
                "n_samples": header.n_samples,
                "schema_version": header.schema_version,
                "split_sizes": list(sp.sizes()),
            },
        },
    )
    write_loss_log(_out_path(cfg, cfg["loss_log"]), history)
    rmse_e, rmse_f = training.evaluate_rmse(val_ds, state.best_params, engine=engine)
    print(f"checkpoint {ckpt} ({state.best_params.n_params} parameters, best epoch {state.best_epoch})")
    print(f"validation RMSE(E) {rmse_e:.4f}  RMSE(F) {rmse_f:.4f}")
    return EXIT_OK


REPORT_COLUMNS = ("model", "rmse_e_val", "rmse_f_val", "rmse_e_test", "rmse_f_test")


def format_report(rows):
    head = f"{'model':<16}{'RMSE(E) [val]':>15}{'RMSE(F) [val]':>15}{'RMSE(E) [test]':>16}{'RMSE(F) [test]':>16}"
    lines = [head]
    for r in rows:
        lines.append(
            f"{r['model']:<16}{r['rmse_e_val']:>15.4f}{r['rmse_f_val']:>15.4f}"
            f"{r['rmse_e_test']:>16.4f}{r['rmse_f_test']:>16.4f}"
        )
    return "\n".join(lines)


def cmd_eval(cfg):
    engine = _engine(cfg)
    doc = training.load_checkpoint(_in_path(cfg, cfg["checkpoint"]))
    params = doc["params"]
    if cfg["layers"] is not None and cfg["layers"] != params.n_layers:
        raise training.CheckpointError(
            f"checkpoint has {params.n_layers} layers but --layers {cfg['layers']} was requested"
        )
    if doc.get("scalers") is None:
        raise training.CheckpointError("checkpoint carries no scalers")
    scalers = ds.Scalers.from_dict(doc["scalers"])
    split_seed = int(doc.get("seeds", {}).get("split", 0))
    _, _, _, train_ds, val_ds, test_ds = _load_splits(cfg, split_seed, scalers)

    layout = doc["layout"]
    e_val, f_val = training.evaluate_rmse(val_ds, params, layout, engine)
    e_test, f_test = training.evaluate_rmse(test_ds, params, layout, engine)
    b_e_val, b_f_val = training.mean_predictor_rmse(train_ds, val_ds)
    b_e_test, b_f_test = training.mean_predictor_rmse(train_ds, test_ds)
    rows = [
        dict(zip(REPORT_COLUMNS, (f"QGNN N={params.n_layers}", e_val, f_val, e_test, f_test))),
        dict(zip(REPORT_COLUMNS, ("mean baseline", b_e_val, b_f_val, b_e_test, b_f_test))),
    ]
    print(format_report(rows))
    with _out_path(cfg, cfg["report"]).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in rows:
            writer.writerow([r["model"]] + [repr(float(r[c])) for c in REPORT_COLUMNS[1:]])
    return EXIT_OK


def cmd_expressibility(cfg):
    _positive(cfg, "samples", "bins")
    engine = _engine(cfg)
    rows = []
    for n in cfg["layers"]:
        row = expr.layer_sweep([n], cfg["samples"], cfg["bins"], cfg["seed"], engine)[0]
        log.info("layers %d  KL %.5f", n, row["kl_divergence"])
        rows.append(row)
    path = expr.write_sweep_csv(_out_path(cfg, cfg["output"]), rows)
    for r in rows:
        print(f"{r['n_layers']:>3}  {r['kl_divergence']:.5f}")
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "expressibility": cmd_expressibility,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve(args)
        if cfg["threads"]:
            kernels.set_threads(cfg["threads"])
        Path(cfg["out_dir"]).mkdir(parents=True, exist_ok=True)
        echo_config(cfg)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"qgnn: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ds.DatasetFormatError, training.CheckpointError) as exc:
        print(f"qgnn: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except training.NumericalError as exc:
        print(f"qgnn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        where = f" ({exc.filename})" if getattr(exc, "filename", None) else ""
        print(f"qgnn: I/O error{where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"qgnn: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
