"""
Command line interface.

Exit codes: 0 success, 1 usage error, 2 invalid data or configuration,
3 internal failure (including a failed gradient check).  Machine-readable
results go to stdout or to the files named by the flags; logging goes to
stderr.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys

from . import __version__
from .ablation import VARIANTS, ablation_run, cross_validate, format_report, write_report
from .config import (
    CliConfig, TrackerConfig, GffConfig, NetworkConfig, AggregatorConfig, TrainConfig, EvalConfig, LAYER_COUNTS,
    DEFAULT_THRESHOLDS, load_config,
)
from .exceptions import GffError, DataError, InternalError, UsageError
from .gff import assemble_gffs, write_gff_csv
from .ingest import read_video
from .synth import (
    DEFAULT_MIX, TEMPLATES, MixEntry, generate_dataset, generate_scenario, load_scenario, template_spec,
    write_dataset, load_dataset,
)
from .tinynet.gradcheck import gradient_check, DEFAULT_TOLERANCE
from .tinynet.params import MODEL_FORMAT, save_model, load_model
from .tinynet.training import train, predict_video, write_loss_history
from .tracker import build_tracks, track_report
from .util import get_envar_as_int


__all__ = ["run", "main"]


log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


JOBS_ENVAR = "GFFDETECT_JOBS"

# command line dest -> config section
_SECTION_FLAGS = {
    "tracker": ("alpha", "distance_threshold", "wma_window_fraction", "distance_metric"),
    "gff": ("frames_per_matrix", "face_slots", "group_stride", "pad_value", "use_geometry"),
    "network": ("kernel_sizes", "conv1_filters", "conv2_filters", "num_layers", "dense_units",
                "column_pool", "time_pool"),
    "aggregator": ("mode", "max_groups", "hidden_units"),
    "train": ("lr", "momentum", "batch_size", "label_smoothing", "epochs", "samples_per_epoch"),
    "eval": ("threshold", "test_fraction", "folds", "variants"),
}

_handler = None


class _Parser(argparse.ArgumentParser):
    """Parser raising `UsageError` instead of exiting on bad input."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text):
    try:
        values = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None
    return values


def _name_list(text):
    names = tuple(v.strip() for v in text.split(",") if v.strip())
    unknown = [n for n in names if n not in VARIANTS]
    if unknown or not names:
        raise argparse.ArgumentTypeError(f"unknown variants {unknown}; choose from {', '.join(VARIANTS)}")
    return names


def _mix(text):
    entries = []
    for item in text.split(","):
        try:
            template, label, weight = item.split(":")
            entries.append(MixEntry(template, int(label), float(weight)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected template:label:weight, got {item!r}") from None
        if template not in TEMPLATES:
            raise argparse.ArgumentTypeError(f"unknown template {template!r}")
    return tuple(entries)


def _fmt(value):
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return value


def _add_common_flags(parser):
    parser.add_argument("--config", help="YAML configuration file; flags override its values.")
    parser.add_argument("--jobs", type=int,
                        help=f"Worker threads (default: ${JOBS_ENVAR} or 1).")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log debug messages.")
    parser.add_argument("-q", "--quiet", action="store_true", help="Log warnings and errors only.")


def _add_seed_flag(parser):
    parser.add_argument("--seed", type=int, help="Random seed; required here unless the configuration sets one.")


def _add_tracker_flags(parser):
    group = parser.add_argument_group("tracking")
    group.add_argument("--alpha", type=float,
                       help=f"Weight of the newest embedding in the moving average (default: {TrackerConfig.alpha}).")
    group.add_argument("--distance-threshold", dest="distance_threshold", type=float,
                       help="Largest distance for joining a track (default: "
                            + ", ".join(f"{v} for {k}" for k, v in DEFAULT_THRESHOLDS.items()) + ").")
    group.add_argument("--window-fraction", dest="wma_window_fraction", type=float,
                       help="Moving-average window as a fraction of the video length "
                            f"(default: {TrackerConfig.wma_window_fraction}).")
    group.add_argument("--metric", dest="distance_metric", choices=("euclidean", "cosine"),
                       help=f"Embedding distance (default: {TrackerConfig.distance_metric}).")


def _add_gff_flags(parser):
    group = parser.add_argument_group("GFF matrices")
    group.add_argument("--frames", dest="frames_per_matrix", type=int,
                       help=f"Sampled frames per matrix (default: {GffConfig.frames_per_matrix}).")
    group.add_argument("--slots", dest="face_slots", type=int,
                       help=f"Faces per matrix (default: {GffConfig.face_slots}).")
    group.add_argument("--stride", dest="group_stride", type=int,
                       help="Step between face groups (default: the number of slots).")
    group.add_argument("--pad-value", dest="pad_value", type=float,
                       help=f"Fill value of padded slots (default: {GffConfig.pad_value}).")
    group.add_argument("--no-geometry", dest="use_geometry", action="store_const", const=False,
                       help="Force the geometry columns to the pad value.")


def _add_model_flags(parser):
    group = parser.add_argument_group("network")
    group.add_argument("--kernel-sizes", dest="kernel_sizes", type=_int_list,
                       help=f"Kernel sizes (default: {_fmt(NetworkConfig.kernel_sizes)}).")
    group.add_argument("--conv1-filters", dest="conv1_filters", type=int,
                       help=f"Filters per kernel size, first layer (default: {NetworkConfig.conv1_filters}).")
    group.add_argument("--conv2-filters", dest="conv2_filters", type=int,
                       help=f"Filters per kernel size, later layers (default: {NetworkConfig.conv2_filters}).")
    group.add_argument("--num-layers", dest="num_layers", type=int, choices=LAYER_COUNTS,
                       help=f"Convolution layers (default: {NetworkConfig.num_layers}).")
    group.add_argument("--dense-units", dest="dense_units", type=int,
                       help=f"Width of the dense layer (default: {NetworkConfig.dense_units}).")
    group.add_argument("--column-pool", dest="column_pool", choices=("avg", "max"),
                       help=f"Pooling over columns after the first layer (default: {NetworkConfig.column_pool}).")
    group.add_argument("--time-pool", dest="time_pool", choices=("avg", "max"),
                       help=f"Global pooling over time (default: {NetworkConfig.time_pool}).")
    group.add_argument("--aggregator", dest="mode", choices=("fc", "max"),
                       help=f"Video-level aggregation (default: {AggregatorConfig.mode}).")
    group.add_argument("--max-groups", dest="max_groups", type=int,
                       help=f"Group scores fed to the aggregator (default: {AggregatorConfig.max_groups}).")
    group.add_argument("--hidden-units", dest="hidden_units", type=int,
                       help=f"Hidden width of the aggregator (default: {AggregatorConfig.hidden_units}).")


def _add_train_flags(parser):
    group = parser.add_argument_group("training")
    group.add_argument("--lr", type=float, help=f"Learning rate (default: {TrainConfig.lr}).")
    group.add_argument("--momentum", type=float, help=f"Nesterov momentum (default: {TrainConfig.momentum}).")
    group.add_argument("--batch-size", dest="batch_size", type=int,
                       help=f"Mini-batch size (default: {TrainConfig.batch_size}).")
    group.add_argument("--label-smoothing", dest="label_smoothing", type=float,
                       help=f"Label smoothing (default: {TrainConfig.label_smoothing}).")
    group.add_argument("--epochs", type=int, help=f"Epochs (default: {TrainConfig.epochs}).")
    group.add_argument("--samples-per-epoch", dest="samples_per_epoch", type=int,
                       help=f"Videos drawn per epoch (default: {TrainConfig.samples_per_epoch}).")


def _add_threshold_flag(parser):
    parser.add_argument("--threshold", type=float,
                        help=f"Scores strictly above this are fake (default: {EvalConfig.threshold}).")


def _configure_cmdline_parser():
    parser = _Parser(
        prog="gffdetect",
        description="Multi-face video deepfake detection from geometric and fakeness features.",
    )
    parser.add_argument("--version", action="version",
                        version=f"gffdetect {__version__} (model format {MODEL_FORMAT})")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = commands.add_parser("synth", help="Generate a synthetic labelled benchmark.")
    _add_common_flags(p)
    _add_seed_flag(p)
    p.add_argument("--out", required=True, help="Output directory for the videos and manifest.csv.")
    p.add_argument("--n-videos", dest="n_videos", type=int, default=200, help="Number of videos (default: 200).")
    p.add_argument("--mix", type=_mix,
                   help="Comma separated template:label:weight entries (default: the four multi-face "
                        "templates, real and fake, in equal shares).")
    p.add_argument("--scenario", help="Generate one video from this JSON scenario file instead.")
    p.add_argument("--template", choices=sorted(TEMPLATES), help="Generate one video from this template instead.")
    p.add_argument("--label", type=int, choices=(0, 1), default=0, help="Label of --template (default: 0).")
    p.add_argument("--embedding-dim", dest="embedding_dim", type=int, default=32,
                   help="Embedding length (default: 32).")
    p.add_argument("--fakeness-channels", dest="fakeness_channels", type=int, default=1,
                   help="Fakeness values per face (default: 1).")
    p.set_defaults(func=_synth)

    p = commands.add_parser("track", help="Group the faces of a video into tracks.")
    _add_common_flags(p)
    p.add_argument("video", help="Observation file (JSON lines).")
    p.add_argument("--out", help="Write the JSON lines report here instead of stdout.")
    _add_tracker_flags(p)
    p.set_defaults(func=_track)

    p = commands.add_parser("gff", help="Dump the GFF matrices of a video as CSV.")
    _add_common_flags(p)
    p.add_argument("video", help="Observation file (JSON lines).")
    p.add_argument("--out", required=True, help="Output directory.")
    _add_tracker_flags(p)
    _add_gff_flags(p)
    p.set_defaults(func=_gff)

    p = commands.add_parser("train", help="Train a model on a manifest.")
    _add_common_flags(p)
    _add_seed_flag(p)
    p.add_argument("--data", required=True, help="manifest.csv of the training videos.")
    p.add_argument("--model", required=True, help="Output model file (.json or .asdf).")
    p.add_argument("--history", help="Write the epoch,mean_loss history to this CSV file.")
    p.add_argument("--resume", help="Continue training this model.")
    _add_tracker_flags(p)
    _add_gff_flags(p)
    _add_model_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=_train)

    p = commands.add_parser("predict", help="Score one video.")
    _add_common_flags(p)
    p.add_argument("--model", required=True, help="Model file.")
    p.add_argument("--video", required=True, help="Observation file (JSON lines).")
    _add_threshold_flag(p)
    p.set_defaults(func=_predict)

    p = commands.add_parser("eval", help="Compare pipeline variants on a manifest.")
    _add_common_flags(p)
    _add_seed_flag(p)
    p.add_argument("--data", required=True, help="manifest.csv of the labelled videos.")
    p.add_argument("--variants", type=_name_list,
                   help=f"Comma separated variants among {', '.join(VARIANTS)} "
                        f"(default: {_fmt(EvalConfig.variants)}).")
    p.add_argument("--folds", type=int,
                   help="k-fold cross validation with this many folds (default: one seeded split).")
    p.add_argument("--test-fraction", dest="test_fraction", type=float,
                   help=f"Held-out share of a single split (default: {EvalConfig.test_fraction}).")
    p.add_argument("--report", help="Write the metrics table to this CSV file.")
    _add_threshold_flag(p)
    _add_tracker_flags(p)
    _add_gff_flags(p)
    _add_model_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=_eval)

    p = commands.add_parser("gradcheck", help="Check analytic gradients against finite differences.")
    _add_common_flags(p)
    p.add_argument("--seed", type=int, required=True, help="Seed of the random instance.")
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE,
                   help=f"Largest accepted relative error (default: {DEFAULT_TOLERANCE}).")
    p.set_defaults(func=_gradcheck)
    return parser


def _configure_logging(args):
    global _handler
    logger = logging.getLogger("gffdetect")
    if _handler is not None:
        logger.removeHandler(_handler)
    _handler = logging.StreamHandler(sys.stderr)
    _handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logger.addHandler(_handler)
    if getattr(args, "verbose", False):
        logger.setLevel(logging.DEBUG)
    elif getattr(args, "quiet", False):
        logger.setLevel(logging.WARNING)
    else:
        logger.setLevel(logging.INFO)


def _merge_config(args):
    from_file = bool(getattr(args, "config", None))
    config = load_config(args.config) if from_file else CliConfig()
    for section, names in _SECTION_FLAGS.items():
        config = config.override(section, announce=from_file,
                                 **{name: getattr(args, name, None) for name in names})
    seed = getattr(args, "seed", None)
    if seed is not None:
        config = config.override(seed=seed).override("train", seed=seed)
    jobs = getattr(args, "jobs", None)
    if jobs is not None:
        config = config.override(jobs=jobs)
    return config


def _require_seed(config):
    if config.seed is None:
        raise UsageError("--seed is required (or set seed in the configuration file)")
    return config.seed


def _jobs(config):
    if config.jobs is not None:
        return config.jobs
    try:
        return get_envar_as_int(JOBS_ENVAR, 1)
    except ValueError as err:
        raise UsageError(str(err)) from None


def _synth(args, config):
    seed = _require_seed(config)
    if args.scenario:
        spec = dataclasses.replace(load_scenario(args.scenario), seed=seed)
        dataset = [(generate_scenario(spec), spec.derived_label)]
    elif args.template:
        spec = template_spec(args.template, args.label, seed, embedding_dim=args.embedding_dim,
                             fakeness_channels=args.fakeness_channels)
        dataset = [(generate_scenario(spec), args.label)]
    else:
        dataset = generate_dataset(args.n_videos, args.mix or DEFAULT_MIX, seed,
                                   embedding_dim=args.embedding_dim, fakeness_channels=args.fakeness_channels)
    print(write_dataset(dataset, args.out))


def _track(args, config):
    video = read_video(args.video)
    tracks = build_tracks(video, config.tracker)
    lines = "".join(json.dumps(entry, separators=(",", ":")) + "\n" for entry in track_report(video, tracks))
    if args.out:
        with open(args.out, "w") as fd:
            fd.write(lines)
    else:
        sys.stdout.write(lines)


def _gff(args, config):
    video = read_video(args.video)
    tracks = build_tracks(video, config.tracker)
    os.makedirs(args.out, exist_ok=True)
    for path in write_gff_csv(assemble_gffs(video, tracks, config.gff), args.out, video.video_id):
        print(path)


def _train(args, config):
    _require_seed(config)
    dataset = load_dataset(args.data)
    init = load_model(args.resume) if args.resume else None
    model, history = train(dataset, config.gff, config.tracker, config.train, config.network, config.aggregator,
                           jobs=_jobs(config), init=init)
    save_model(model, args.model, description=f"trained {len(history)} epochs on {len(dataset)} videos")
    if args.history:
        write_loss_history(history, args.history)


def _predict(args, config):
    model = load_model(args.model)
    prediction = predict_video(read_video(args.video), model, config.eval.threshold)
    print(json.dumps(prediction.to_dict(), separators=(",", ":")))


def _eval(args, config):
    _require_seed(config)
    dataset = load_dataset(args.data)
    if config.eval.folds:
        rows = cross_validate(dataset, config=config, k=config.eval.folds, jobs=_jobs(config))
    else:
        rows = ablation_run(dataset, config=config, jobs=_jobs(config))
    print(format_report(rows))
    if args.report:
        write_report(rows, args.report)


def _gradcheck(args, config):
    result = gradient_check(args.seed, args.tolerance)
    verdict = "PASS" if result.passed else "FAIL"
    print(f"max relative error {result.max_rel_error:.3e} over {result.n_parameters} parameters "
          f"({result.n_skipped} skipped at kinks): {verdict}")
    return 0 if result.passed else 3


def run(argv=None):
    """
    Run the command line with ``argv`` (default ``sys.argv[1:]``).

    Returns
    -------
    int
        Exit code.
    """
    parser = _configure_cmdline_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(err, file=sys.stderr)
        return 1
    except SystemExit as exc:
        # --help and --version
        return exc.code if isinstance(exc.code, int) else 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1

    _configure_logging(args)
    try:
        config = _merge_config(args)
        return args.func(args, config) or 0
    except UsageError as err:
        log.error(str(err))
        return 1
    except DataError as err:
        log.error(str(err))
        return 2
    except InternalError as err:
        log.error(str(err))
        return 3
    except GffError as err:
        log.error(str(err))
        return 3
    except (ValueError, OSError) as err:
        log.error(str(err))
        return 2
    finally:
        logging.getLogger("gffdetect").removeHandler(_handler)


def _from_cmdline():
    return run(sys.argv[1:])


def main():
    return _from_cmdline()
