"""
Typed configuration for every stage of the pipeline.

Each concern has its own frozen dataclass whose defaults are the values
used by the reference architecture where one is known, and documented
choices elsewhere.  `CliConfig` bundles them and knows how to load
itself from a YAML file validated against ``config.schema.yaml``.
"""

import dataclasses
from dataclasses import dataclass, field
import logging

import yaml

from . import filetype
from .exceptions import ConfigError, IoFailure
from .validate import ValidationError, validate_tree, error_message


__all__ = [
    "TrackerConfig",
    "GffConfig",
    "NetworkConfig",
    "AggregatorConfig",
    "TrainConfig",
    "EvalConfig",
    "CliConfig",
    "load_config",
    "LAYER_COUNTS",
    "DEFAULT_THRESHOLDS",
]


log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


LAYER_COUNTS = (1, 2, 3, 4)

# Unit embeddings at Euclidean distance 1.1 are at cosine distance 1.1**2 / 2
DEFAULT_THRESHOLDS = {"euclidean": 1.1, "cosine": 0.6}


class _Section:
    """Mixin giving the config dataclasses dict conversion."""

    def to_dict(self):
        tree = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            tree[f.name] = value
        return tree

    @classmethod
    def from_dict(cls, tree):
        tree = dict(tree or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(tree) - known)
        if unknown:
            raise ConfigError(f"Unknown {cls.__name__} keys: {', '.join(unknown)}")
        for f in dataclasses.fields(cls):
            if f.name in tree and isinstance(tree[f.name], list):
                tree[f.name] = tuple(tree[f.name])
        return cls(**tree)

    def replace(self, **changes):
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class TrackerConfig(_Section):
    """
    Parameters of the frame-to-track grouping.

    Attributes
    ----------
    alpha : float
        Weight of the newest embedding in the moving average, in (0, 1].
    distance_threshold : float, optional
        Faces closer than this to a track's moving average join it;
        `None` takes the default of the metric, see `threshold`.
    wma_window_fraction : float
        Length of the moving-average window as a fraction of the video length.
    distance_metric : {"euclidean", "cosine"}
    """
    alpha: float = 0.3
    distance_threshold: float = None
    wma_window_fraction: float = 0.1
    distance_metric: str = "euclidean"

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"tracker.alpha must be in (0, 1], got {self.alpha}")
        if self.distance_threshold is not None and self.distance_threshold < 0:
            raise ConfigError(f"tracker.distance_threshold must be >= 0, got {self.distance_threshold}")
        if not 0 < self.wma_window_fraction <= 1:
            raise ConfigError(
                f"tracker.wma_window_fraction must be in (0, 1], got {self.wma_window_fraction}")
        if self.distance_metric not in ("euclidean", "cosine"):
            raise ConfigError(f"tracker.distance_metric must be euclidean or cosine, got {self.distance_metric}")

    @property
    def threshold(self):
        """
        Effective match threshold.

        Examples
        --------
        >>> TrackerConfig().threshold
        1.1
        >>> TrackerConfig(distance_metric="cosine").threshold
        0.6
        """
        if self.distance_threshold is None:
            return DEFAULT_THRESHOLDS[self.distance_metric]
        return self.distance_threshold

    def window(self, num_frames):
        """Number of past moving-average vectors used by an update."""
        return max(1, int(round(self.wma_window_fraction * num_frames)))


@dataclass(frozen=True)
class GffConfig(_Section):
    """
    Layout of the geometric-fakeness matrices.

    ``fakeness_channels`` of `None` means "as declared by the video".
    ``group_stride`` of `None` means disjoint groups (stride equal to
    ``face_slots``).  ``use_geometry=False`` forces every geometry column
    to ``pad_value``, the fakeness-only variant.
    """
    frames_per_matrix: int = 16
    face_slots: int = 5
    fakeness_channels: int = None
    pad_value: float = 0.0
    group_stride: int = None
    use_geometry: bool = True

    def __post_init__(self):
        if self.frames_per_matrix < 1:
            raise ConfigError("gff.frames_per_matrix must be >= 1")
        if self.face_slots < 1:
            raise ConfigError("gff.face_slots must be >= 1")
        if self.fakeness_channels is not None and self.fakeness_channels < 1:
            raise ConfigError("gff.fakeness_channels must be >= 1")
        if self.group_stride is not None and self.group_stride < 1:
            raise ConfigError("gff.group_stride must be >= 1")

    @property
    def stride(self):
        return self.face_slots if self.group_stride is None else self.group_stride

    def num_columns(self, fakeness_channels):
        return self.face_slots * (1 + fakeness_channels)


@dataclass(frozen=True)
class NetworkConfig(_Section):
    """
    Layer recipe of the convolutional block that scores one matrix.

    The first layer holds ``conv1_filters`` square 2D kernels for every
    size in ``kernel_sizes``, pooled over the column axis; each further
    layer, up to ``num_layers`` in all, holds ``conv2_filters`` 1D kernels
    per size over time.  The maps pooled over time feed a dense layer of
    ``dense_units`` and a sigmoid neuron.
    """
    kernel_sizes: tuple = (1, 2, 3, 4, 6, 8)
    conv1_filters: int = 32
    conv2_filters: int = 8
    num_layers: int = 2
    dense_units: int = 48
    column_pool: str = "avg"
    time_pool: str = "max"

    def __post_init__(self):
        if not self.kernel_sizes or any(int(k) < 1 for k in self.kernel_sizes):
            raise ConfigError(f"network.kernel_sizes must be positive, got {self.kernel_sizes}")
        if len(set(self.kernel_sizes)) != len(self.kernel_sizes):
            raise ConfigError(f"network.kernel_sizes must be distinct, got {self.kernel_sizes}")
        if self.num_layers not in LAYER_COUNTS:
            raise ConfigError(f"network.num_layers must be 1 to {LAYER_COUNTS[-1]}, got {self.num_layers}")
        if min(self.conv1_filters, self.conv2_filters, self.dense_units) < 1:
            raise ConfigError("network filter and unit counts must be >= 1")
        if self.column_pool not in ("avg", "max"):
            raise ConfigError(f"network.column_pool must be avg or max, got {self.column_pool}")
        if self.time_pool not in ("avg", "max"):
            raise ConfigError(f"network.time_pool must be avg or max, got {self.time_pool}")

    @property
    def feature_width(self):
        """Width of the vector entering the dense layer."""
        per_kernel = self.conv2_filters if self.num_layers > 1 else self.conv1_filters
        return per_kernel * len(self.kernel_sizes)


@dataclass(frozen=True)
class AggregatorConfig(_Section):
    """
    Video level aggregation of per-group scores.

    ``mode="fc"`` feeds the ``max_groups`` highest group scores (zero
    padded) to a two-layer network; ``mode="max"`` takes the largest one.
    """
    mode: str = "fc"
    max_groups: int = 4
    hidden_units: int = 16

    def __post_init__(self):
        if self.mode not in ("fc", "max"):
            raise ConfigError(f"aggregator.mode must be fc or max, got {self.mode}")
        if self.max_groups < 1 or self.hidden_units < 1:
            raise ConfigError("aggregator.max_groups and hidden_units must be >= 1")


@dataclass(frozen=True)
class TrainConfig(_Section):
    lr: float = 0.001
    momentum: float = 0.9
    batch_size: int = 12
    label_smoothing: float = 0.001
    epochs: int = 100
    samples_per_epoch: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"train.lr must be > 0, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"train.momentum must be in [0, 1), got {self.momentum}")
        if not 0 <= self.label_smoothing < 1:
            raise ConfigError(f"train.label_smoothing must be in [0, 1), got {self.label_smoothing}")
        if min(self.batch_size, self.epochs, self.samples_per_epoch) < 1:
            raise ConfigError("train.batch_size, epochs and samples_per_epoch must be >= 1")


@dataclass(frozen=True)
class EvalConfig(_Section):
    """
    ``folds`` of 0 selects a single seeded train/test split with
    ``test_fraction`` held out; ``folds >= 2`` selects k-fold cross validation.
    """
    threshold: float = 0.5
    test_fraction: float = 0.2
    folds: int = 0
    variants: tuple = ("gff", "fakeness_only", "modified_cnnblock")

    def __post_init__(self):
        if not 0 <= self.threshold <= 1:
            raise ConfigError(f"eval.threshold must be in [0, 1], got {self.threshold}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError(f"eval.test_fraction must be in (0, 1), got {self.test_fraction}")
        if self.folds == 1 or self.folds < 0:
            raise ConfigError(f"eval.folds must be 0 or >= 2, got {self.folds}")
        if not self.variants:
            raise ConfigError("eval.variants must not be empty")


_SECTIONS = {
    "tracker": TrackerConfig,
    "gff": GffConfig,
    "network": NetworkConfig,
    "aggregator": AggregatorConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
}


@dataclass(frozen=True)
class CliConfig:
    """
    Merged view of every section plus the run-wide seed and worker count.
    """
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    gff: GffConfig = field(default_factory=GffConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    aggregator: AggregatorConfig = field(default_factory=AggregatorConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = None
    jobs: int = None

    def __post_init__(self):
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")

    @classmethod
    def from_dict(cls, tree):
        """
        Build from a plain tree, validating it against the config schema.
        Unknown keys are rejected.
        """
        tree = dict(tree or {})
        try:
            validate_tree(tree, "config")
        except ValidationError as error:
            raise ConfigError(error_message(list(error.path) or "config", error)) from None
        kwargs = {name: section.from_dict(tree.get(name)) for name, section in _SECTIONS.items()}
        # train.seed follows the run seed unless the file pins it
        if tree.get("seed") is not None and "seed" not in (tree.get("train") or {}):
            kwargs["train"] = kwargs["train"].replace(seed=tree["seed"])
        return cls(seed=tree.get("seed"), jobs=tree.get("jobs"), **kwargs)

    def to_dict(self):
        tree = {name: getattr(self, name).to_dict() for name in _SECTIONS}
        if self.seed is not None:
            tree["seed"] = self.seed
        if self.jobs is not None:
            tree["jobs"] = self.jobs
        return tree

    def override(self, section=None, *, announce=False, **changes):
        """
        Return a copy with ``changes`` applied, either to the named
        section or, when ``section`` is `None`, to the top level.
        Changes whose value is `None` are ignored, so unset command line
        flags leave file values in place.  With ``announce`` every
        changed section value is logged as a WARNING.
        """
        changes = {k: v for k, v in changes.items() if v is not None}
        if not changes:
            return self
        if section is None:
            return dataclasses.replace(self, **changes)
        current = getattr(self, section)
        level = logging.WARNING if announce else logging.DEBUG
        for key, value in changes.items():
            if getattr(current, key) != value:
                log.log(level, f"{section}.{key}: {getattr(current, key)!r} overridden by {value!r}")
        return dataclasses.replace(self, **{section: current.replace(**changes)})


def load_config(path):
    """
    Read a YAML configuration file.

    Parameters
    ----------
    path : str or path-like

    Returns
    -------
    CliConfig
    """
    if filetype.check(path) != "yaml":
        raise ConfigError(f"Configuration files must be YAML: {path}")
    try:
        with open(path) as fd:
            tree = yaml.safe_load(fd)
    except OSError as err:
        raise IoFailure(f"Cannot read configuration {path}: {err}") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"Configuration {path} is not valid YAML: {err}") from err
    if tree is None:
        tree = {}
    if not isinstance(tree, dict):
        raise ConfigError(f"Configuration {path} must be a mapping")
    log.info(f"Loaded configuration from {path}")
    return CliConfig.from_dict(tree)
