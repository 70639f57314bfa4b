"""
Parameter containers and the model file format.

A model file is a JSON document::

    {"format": 1,
     "config": {"network": {...}, "aggregator": {...}, "gff": {...},
                "tracker": {...}, "fakeness_channels": D},
     "tensors": {name: [[dims], [values]]},
     "velocity": {name: [[dims], [values]]}}

Tensor names carry a ``cnn.`` or ``agg.`` prefix naming the block they
belong to.  Files ending in ``.asdf`` hold the same tree with the tensors
as arrays, plus a history entry.
"""

import dataclasses
from dataclasses import dataclass
import json
import logging
import math

import asdf
import numpy as np

from .. import filetype
from ..config import NetworkConfig, AggregatorConfig, GffConfig, TrackerConfig
from ..exceptions import ShapeMismatch, ModelFormatError, IoFailure, ConfigError
from ..util import create_history_entry, derive_seed
from ..validate import ValidationError, validate_tree, error_message


__all__ = [
    "MODEL_FORMAT",
    "CnnBlockParams",
    "AggregatorParams",
    "ModelParams",
    "cnnblock_shapes",
    "aggregator_shapes",
    "save_model",
    "load_model",
]


log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


MODEL_FORMAT = 1


def cnnblock_shapes(cfg):
    """
    Declared tensor shapes of a convolutional block.

    Returns
    -------
    dict
        name -> ``(shape, fan_in, fan_out)``; biases have no fans.
    """
    n_k = len(cfg.kernel_sizes)
    shapes = {}
    for k in cfg.kernel_sizes:
        F = cfg.conv1_filters
        shapes[f"conv1.k{k}.weight"] = ((F, k, k), k * k, F * k * k)
        shapes[f"conv1.k{k}.bias"] = ((F,), None, None)
    c_in = n_k * cfg.conv1_filters
    for layer in range(2, cfg.num_layers + 1):
        F = cfg.conv2_filters
        for k in cfg.kernel_sizes:
            shapes[f"conv{layer}.k{k}.weight"] = ((F, c_in, k), c_in * k, F * k)
            shapes[f"conv{layer}.k{k}.bias"] = ((F,), None, None)
        c_in = n_k * F
    U = cfg.dense_units
    shapes["dense.weight"] = ((U, cfg.feature_width), cfg.feature_width, U)
    shapes["dense.bias"] = ((U,), None, None)
    shapes["out.weight"] = ((U,), U, 1)
    shapes["out.bias"] = ((1,), None, None)
    return shapes


def aggregator_shapes(cfg):
    """Declared tensor shapes of the video aggregator; empty in max mode."""
    if cfg.mode == "max":
        return {}
    G, H = cfg.max_groups, cfg.hidden_units
    return {
        "hidden.weight": ((H, G), G, H),
        "hidden.bias": ((H,), None, None),
        "out.weight": ((H,), H, 1),
        "out.bias": ((1,), None, None),
    }


def _initialize(shapes, rng):
    tensors = {}
    for name, (shape, fan_in, fan_out) in shapes.items():
        if fan_in is None:
            tensors[name] = np.zeros(shape)
        else:
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            tensors[name] = rng.uniform(-limit, limit, size=shape)
    return tensors


def _check_shapes(tensors, shapes, owner):
    missing = sorted(set(shapes) - set(tensors))
    extra = sorted(set(tensors) - set(shapes))
    if missing or extra:
        raise ShapeMismatch(f"{owner} tensors differ from the recipe: missing {missing}, unexpected {extra}")
    for name, (shape, _, _) in shapes.items():
        if np.shape(tensors[name]) != shape:
            raise ShapeMismatch(f"{owner} tensor {name} has shape {np.shape(tensors[name])}, expected {shape}")


@dataclass(eq=False)
class CnnBlockParams:
    """
    Weights of the convolutional block scoring one GFF matrix.

    Attributes
    ----------
    config : NetworkConfig
    tensors : dict
        name -> float64 array, in recipe order (see `cnnblock_shapes`).
    """
    config: NetworkConfig
    tensors: dict

    def __post_init__(self):
        shapes = cnnblock_shapes(self.config)
        _check_shapes(self.tensors, shapes, "CNN block")
        self.tensors = {name: np.asarray(self.tensors[name], dtype=np.float64) for name in shapes}

    @classmethod
    def initialize(cls, config, rng):
        """Glorot-uniform weights, zero biases."""
        return cls(config, _initialize(cnnblock_shapes(config), rng))

    @classmethod
    def zeros(cls, config):
        return cls(config, {name: np.zeros(s) for name, (s, _, _) in cnnblock_shapes(config).items()})


@dataclass(eq=False)
class AggregatorParams:
    """
    Weights of the video-level aggregator.  In max mode there are none.
    """
    config: AggregatorConfig
    tensors: dict

    def __post_init__(self):
        shapes = aggregator_shapes(self.config)
        _check_shapes(self.tensors, shapes, "Aggregator")
        self.tensors = {name: np.asarray(self.tensors[name], dtype=np.float64) for name in shapes}

    @property
    def mode(self):
        return self.config.mode

    @classmethod
    def initialize(cls, config, rng):
        return cls(config, _initialize(aggregator_shapes(config), rng))

    @classmethod
    def zeros(cls, config):
        return cls(config, {name: np.zeros(s) for name, (s, _, _) in aggregator_shapes(config).items()})


@dataclass(eq=False)
class ModelParams:
    """
    A complete video classifier: both blocks, the configurations used to
    build their inputs, and the optimizer velocity.

    Attributes
    ----------
    cnnblock : CnnBlockParams
    aggregator : AggregatorParams
    gff_config : GffConfig
        With ``fakeness_channels`` resolved.
    tracker_config : TrackerConfig
    velocity : dict or None
        Flat name -> array, same layout as `flat`.
    """
    cnnblock: CnnBlockParams
    aggregator: AggregatorParams
    gff_config: GffConfig
    tracker_config: TrackerConfig
    velocity: dict = None

    def __post_init__(self):
        if self.gff_config.fakeness_channels is None:
            raise ConfigError("A model needs gff.fakeness_channels resolved")
        if self.velocity is not None:
            flat = self.flat()
            if set(self.velocity) != set(flat) or any(
                    np.shape(self.velocity[k]) != flat[k].shape for k in flat):
                raise ShapeMismatch("Velocity layout does not match the model tensors")
            self.velocity = {k: np.asarray(self.velocity[k], dtype=np.float64) for k in flat}

    @classmethod
    def initialize(cls, network=None, aggregator=None, gff=None, tracker=None,
                   fakeness_channels=1, seed=0):
        """
        Seeded initial model.

        Parameters
        ----------
        network : NetworkConfig, optional
        aggregator : AggregatorConfig, optional
        gff : GffConfig, optional
        tracker : TrackerConfig, optional
        fakeness_channels : int
            Used unless ``gff`` pins a value.
        seed : int
        """
        network = network or NetworkConfig()
        aggregator = aggregator or AggregatorConfig()
        gff = gff or GffConfig()
        if gff.fakeness_channels is None:
            gff = dataclasses.replace(gff, fakeness_channels=fakeness_channels)
        rng = np.random.default_rng(derive_seed(seed, 0))
        return cls(
            cnnblock=CnnBlockParams.initialize(network, rng),
            aggregator=AggregatorParams.initialize(aggregator, rng),
            gff_config=gff,
            tracker_config=tracker or TrackerConfig(),
        )

    @classmethod
    def zeros(cls, network=None, aggregator=None, gff=None, tracker=None, fakeness_channels=1):
        """Model with every weight and bias 0; scores everything 0.5."""
        gff = gff or GffConfig()
        if gff.fakeness_channels is None:
            gff = dataclasses.replace(gff, fakeness_channels=fakeness_channels)
        return cls(
            cnnblock=CnnBlockParams.zeros(network or NetworkConfig()),
            aggregator=AggregatorParams.zeros(aggregator or AggregatorConfig()),
            gff_config=gff,
            tracker_config=tracker or TrackerConfig(),
        )

    @property
    def fakeness_channels(self):
        return self.gff_config.fakeness_channels

    @property
    def input_shape(self):
        """``(L, N * (1 + D))`` of the GFF matrices this model scores."""
        cfg = self.gff_config
        return cfg.frames_per_matrix, cfg.num_columns(cfg.fakeness_channels)

    def flat(self):
        """All tensors under prefixed names, CNN block first."""
        tensors = {f"cnn.{k}": v for k, v in self.cnnblock.tensors.items()}
        tensors.update({f"agg.{k}": v for k, v in self.aggregator.tensors.items()})
        return tensors

    def with_flat(self, tensors, velocity=None):
        """Copy of the model holding ``tensors`` (named as in `flat`)."""
        cnn = {k[4:]: v for k, v in tensors.items() if k.startswith("cnn.")}
        agg = {k[4:]: v for k, v in tensors.items() if k.startswith("agg.")}
        if len(cnn) + len(agg) != len(tensors):
            raise ShapeMismatch("Tensor names must start with 'cnn.' or 'agg.'")
        return dataclasses.replace(
            self,
            cnnblock=CnnBlockParams(self.cnnblock.config, cnn),
            aggregator=AggregatorParams(self.aggregator.config, agg),
            velocity=velocity,
        )

    def parameter_count(self):
        """
        Number of scalar parameters.

        Examples
        --------
        >>> ModelParams.zeros().parameter_count()
        43762
        """
        return sum(v.size for v in self.flat().values())

    def config_tree(self):
        return {
            "network": self.cnnblock.config.to_dict(),
            "aggregator": self.aggregator.config.to_dict(),
            "gff": self.gff_config.to_dict(),
            "tracker": self.tracker_config.to_dict(),
            "fakeness_channels": self.fakeness_channels,
        }

    def to_tree(self):
        """The JSON model tree."""
        tree = {
            "format": MODEL_FORMAT,
            "config": self.config_tree(),
            "tensors": _encode(self.flat()),
        }
        if self.velocity is not None:
            tree["velocity"] = _encode(self.velocity)
        return tree

    @classmethod
    def from_tree(cls, tree):
        """
        Rebuild a model from its JSON tree.

        Raises
        ------
        ModelFormatError
            When the tree is not a valid model or its tensors do not match
            the recipe it declares.
        """
        try:
            validate_tree(tree, "model")
        except ValidationError as error:
            raise ModelFormatError(error_message(list(error.path) or "model", error)) from None
        config = tree["config"]
        try:
            gff = GffConfig.from_dict(config["gff"])
            if gff.fakeness_channels not in (None, config["fakeness_channels"]):
                raise ModelFormatError("gff.fakeness_channels disagrees with fakeness_channels")
            gff = dataclasses.replace(gff, fakeness_channels=config["fakeness_channels"])
            model = cls(
                cnnblock=CnnBlockParams(NetworkConfig.from_dict(config["network"]),
                                        _decode(tree["tensors"], "cnn.")),
                aggregator=AggregatorParams(AggregatorConfig.from_dict(config["aggregator"]),
                                            _decode(tree["tensors"], "agg.")),
                gff_config=gff,
                tracker_config=TrackerConfig.from_dict(config["tracker"]),
                velocity=_decode(tree["velocity"], "") if "velocity" in tree else None,
            )
        except (ShapeMismatch, ConfigError, TypeError) as err:
            raise ModelFormatError(f"Invalid model: {err}") from None
        stray = set(tree["tensors"]) - set(model.flat())
        if stray:
            raise ModelFormatError(f"Unexpected tensors {sorted(stray)}")
        expected = sum(math.prod(s) for s, _, _ in cnnblock_shapes(model.cnnblock.config).values())
        expected += sum(math.prod(s) for s, _, _ in aggregator_shapes(model.aggregator.config).values())
        if model.parameter_count() != expected:
            raise ModelFormatError(f"Model holds {model.parameter_count()} parameters, recipe declares {expected}")
        if not all(np.all(np.isfinite(v)) for v in model.flat().values()):
            raise ModelFormatError("Model tensors must be finite")
        return model


def _encode(tensors):
    return {name: [list(v.shape), v.ravel().tolist()] for name, v in tensors.items()}


def _decode(tree, prefix):
    tensors = {}
    for name, (shape, values) in tree.items():
        if not name.startswith(prefix):
            continue
        if math.prod(shape) != len(values):
            raise ModelFormatError(f"Tensor {name} declares shape {shape} but holds {len(values)} values")
        tensors[name[len(prefix):]] = np.array(values, dtype=np.float64).reshape(shape)
    return tensors


def save_model(model, path, description=None):
    """
    Write ``model`` as JSON or, for ``.asdf`` paths, as ASDF.

    The JSON encoding is deterministic: the same model always gives the
    same bytes.

    Returns
    -------
    str
        ``path``.
    """
    kind = filetype.check(path)
    if not all(np.all(np.isfinite(v)) for v in model.flat().values()):
        raise ModelFormatError("Refusing to save a model with non-finite tensors")
    try:
        if kind == "json":
            with open(path, "w") as fd:
                fd.write(json.dumps(model.to_tree(), separators=(",", ":")))
                fd.write("\n")
        elif kind == "asdf":
            from .. import __version__
            tree = {
                "format": MODEL_FORMAT,
                "config": model.config_tree(),
                "tensors": model.flat(),
            }
            if model.velocity is not None:
                tree["velocity"] = dict(model.velocity)
            af = asdf.AsdfFile(tree)
            software = {"name": "gffdetect", "author": "gffdetect developers", "version": __version__}
            af.tree["history"] = {"entries": [create_history_entry(description or "saved model", software)]}
            af.write_to(path)
        else:
            raise ModelFormatError(f"Model files must be .json or .asdf: {path}")
    except OSError as err:
        raise IoFailure(f"Cannot write model {path}: {err}") from err
    log.info(f"Model with {model.parameter_count()} parameters written to {path}")
    return path


def load_model(path):
    """
    Read a model written by `save_model`.

    Raises
    ------
    ModelFormatError
    IoFailure
    """
    kind = filetype.check(path)
    try:
        if kind == "json":
            with open(path) as fd:
                try:
                    tree = json.load(fd)
                except ValueError as err:
                    raise ModelFormatError(f"{path} is not JSON: {err}") from None
        elif kind == "asdf":
            with asdf.open(path) as af:
                tree = {
                    "format": af.tree.get("format"),
                    "config": af.tree.get("config"),
                    "tensors": _encode({k: np.array(v) for k, v in af.tree.get("tensors", {}).items()}),
                }
                if "velocity" in af.tree:
                    tree["velocity"] = _encode({k: np.array(v) for k, v in af.tree["velocity"].items()})
        else:
            raise ModelFormatError(f"Model files must be .json or .asdf: {path}")
    except FileNotFoundError as err:
        raise IoFailure(f"No such model file: {path}") from err
    except OSError as err:
        raise IoFailure(f"Cannot read model {path}: {err}") from err
    if not isinstance(tree, dict):
        raise ModelFormatError(f"{path} does not hold a model tree")
    return ModelParams.from_tree(tree)
