"""
Ablation harness: train and evaluate pipeline variants on one dataset.

A variant rewrites the run configuration (e.g. dropping the geometry
columns) or, for the untrained baseline, scores videos directly.  Every
variant sees the same seeded train/test split or the same folds.
"""

import dataclasses
from dataclasses import dataclass
import logging

import numpy as np
from astropy.table import Table

from .config import CliConfig
from .exceptions import EmptyDataset, ConfigError, IoFailure
from .metrics import evaluate
from .tinynet.training import train, predict_video
from .util import derive_seed


__all__ = [
    "Variant",
    "VARIANTS",
    "AblationRow",
    "split_dataset",
    "fold_indices",
    "ablation_run",
    "cross_validate",
    "report_table",
    "write_report",
    "format_report",
]


log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


@dataclass(frozen=True)
class Variant:
    """
    A named pipeline variant.

    Attributes
    ----------
    name : str
    description : str
    changes : dict
        section -> field overrides applied to the run configuration.
    trained : bool
        `False` for baselines that score videos without a model.
    """
    name: str
    description: str
    changes: dict = dataclasses.field(default_factory=dict)
    trained: bool = True

    def configure(self, config):
        for section, fields in self.changes.items():
            config = config.override(section, **fields)
        return config


def mean_fakeness_score(video):
    """Mean of every fakeness value of every face; 0 for faceless videos."""
    if not video.observations:
        return 0.0
    return float(np.mean([obs.fakeness for obs in video.observations]))


VARIANTS = {
    v.name: v for v in (
        Variant("gff", "geometric and fakeness features"),
        Variant("fakeness_only", "geometry columns forced to the pad value",
                {"gff": {"use_geometry": False}}),
        Variant("modified_cnnblock", "one convolution layer, kernel sizes 1 to 4",
                {"network": {"num_layers": 1, "kernel_sizes": (1, 2, 3, 4)}}),
        Variant("three_layers", "three convolution layers", {"network": {"num_layers": 3}}),
        Variant("four_layers", "four convolution layers", {"network": {"num_layers": 4}}),
        Variant("max_aggregation", "video score is the largest group score",
                {"aggregator": {"mode": "max"}}),
        Variant("mean_fakeness", "untrained: mean fakeness of every face and frame", trained=False),
    )
}


@dataclass(frozen=True)
class AblationRow:
    variant: str
    report: object


def _variants(names):
    unknown = [n for n in names if n not in VARIANTS]
    if unknown:
        raise ConfigError(f"Unknown variants {unknown}; choose from {', '.join(VARIANTS)}")
    return [VARIANTS[n] for n in names]


def _permutation(n, seed):
    return np.random.default_rng(derive_seed(seed, n)).permutation(n)


def split_dataset(dataset, test_fraction=0.2, seed=0):
    """
    Seeded train/test split.

    Returns
    -------
    train, test : list
        At least one item each.
    """
    dataset = list(dataset)
    if len(dataset) < 2:
        raise EmptyDataset(f"A train/test split needs at least 2 videos, got {len(dataset)}")
    n_test = min(max(1, int(round(test_fraction * len(dataset)))), len(dataset) - 1)
    order = _permutation(len(dataset), seed).tolist()
    test = sorted(order[:n_test])
    train_ = sorted(order[n_test:])
    return [dataset[i] for i in train_], [dataset[i] for i in test]


def fold_indices(n, k, seed=0):
    """
    ``k`` disjoint index arrays covering ``range(n)``.
    """
    if k < 2 or n < k:
        raise EmptyDataset(f"{k}-fold cross validation needs at least {max(k, 2)} videos, got {n}")
    return [np.sort(part) for part in np.array_split(_permutation(n, seed), k)]


def _scores(variant, config, train_set, test_set, jobs):
    if not variant.trained:
        return [mean_fakeness_score(video) for video, _ in test_set]
    cfg = variant.configure(config)
    model, history = train(train_set, cfg.gff, cfg.tracker, cfg.train, cfg.network, cfg.aggregator, jobs=jobs)
    log.info(f"Variant {variant.name}: final training loss {history[-1]:.6f}")
    return [predict_video(video, model, cfg.eval.threshold).video_score for video, _ in test_set]


def ablation_run(dataset, variants=None, config=None, jobs=1):
    """
    Train every variant on the same seeded split and evaluate it on the
    held-out videos.

    Parameters
    ----------
    dataset : sequence of (VideoObservations, int)
    variants : sequence of str, optional
        Keys of `VARIANTS`; defaults to ``config.eval.variants``.
    config : CliConfig, optional
    jobs : int

    Returns
    -------
    list of AblationRow
        One per variant, in the given order.
    """
    config = config or CliConfig()
    variants = _variants(variants or config.eval.variants)
    train_set, test_set = split_dataset(dataset, config.eval.test_fraction, config.train.seed)
    labels = [label for _, label in test_set]
    log.info(f"Ablation on {len(train_set)} training and {len(test_set)} test videos")
    rows = []
    for variant in variants:
        scores = _scores(variant, config, train_set, test_set, jobs)
        rows.append(AblationRow(variant.name, evaluate(scores, labels, config.eval.threshold)))
    return rows


def cross_validate(dataset, variants=None, config=None, k=5, jobs=1):
    """
    k-fold version of `ablation_run`; test predictions of all folds are
    pooled before computing the metrics.
    """
    config = config or CliConfig()
    variants = _variants(variants or config.eval.variants)
    dataset = list(dataset)
    folds = fold_indices(len(dataset), k, config.train.seed)
    rows = []
    for variant in variants:
        scores, labels = [], []
        for f, test_idx in enumerate(folds):
            held = set(test_idx.tolist())
            train_set = [item for i, item in enumerate(dataset) if i not in held]
            test_set = [dataset[i] for i in test_idx.tolist()]
            log.debug(f"Variant {variant.name}, fold {f + 1}/{k}")
            scores.extend(_scores(variant, config, train_set, test_set, jobs))
            labels.extend(label for _, label in test_set)
        rows.append(AblationRow(variant.name, evaluate(scores, labels, config.eval.threshold)))
    return rows


def report_table(rows):
    """`~astropy.table.Table` with one row per variant."""
    table = Table(
        rows=[(r.variant, r.report.f_measure, r.report.accuracy, r.report.roc_auc, *r.report.confusion)
              for r in rows] or None,
        names=("variant", "f_measure", "accuracy", "roc_auc", "tp", "fp", "tn", "fn"),
        dtype=(str, float, float, float, int, int, int, int),
    )
    return table


def write_report(rows, path):
    try:
        report_table(rows).write(path, format="ascii.csv", overwrite=True)
    except OSError as err:
        raise IoFailure(f"Cannot write report {path}: {err}") from err
    return path


def format_report(rows):
    """Aligned text rendering for the terminal."""
    table = report_table(rows)
    for name in ("f_measure", "accuracy", "roc_auc"):
        table[name].info.format = ".4f"
    return "\n".join(table.pformat(max_lines=-1, max_width=-1))
