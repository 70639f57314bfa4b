"""
Training loop and video-level inference.
"""

from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
import dataclasses
import logging

import numpy as np
from astropy.table import Table

from ..config import GffConfig, TrackerConfig, TrainConfig
from ..exceptions import EmptyDataset, InvariantViolation, IoFailure
from ..gff import assemble_gffs, stack_gffs
from ..tracker import build_tracks
from ..util import derive_seed
from .network import model_forward, model_backward, bce_loss, bce_grad
from .optim import lookahead, sgd_nesterov_step
from .params import ModelParams


__all__ = [
    "VideoPrediction",
    "video_gff_stack",
    "prepare_samples",
    "train",
    "predict_video",
    "write_loss_history",
]


log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


@dataclass(frozen=True)
class VideoPrediction:
    """
    Verdict on one video.

    Attributes
    ----------
    video_id : str
    video_score : float
        Probability that the video is fake.
    group_scores : tuple of float
        Score of every GFF group, in assembly order.
    threshold : float
        The video is called fake when its score is strictly above this.
    """
    video_id: str
    video_score: float
    group_scores: tuple
    threshold: float = 0.5

    @property
    def verdict(self):
        """`True` for fake."""
        return self.video_score > self.threshold

    @property
    def label(self):
        return "fake" if self.verdict else "real"

    def to_dict(self):
        return {"video_id": self.video_id, "score": self.video_score, "verdict": self.label}


def video_gff_stack(video, gff_cfg, tracker_cfg):
    """``(G, L, C)`` GFF stack of a video."""
    tracks = build_tracks(video, tracker_cfg)
    return stack_gffs(assemble_gffs(video, tracks, gff_cfg))


@contextmanager
def _mapper(jobs):
    if jobs is None or jobs <= 1:
        yield map
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            yield pool.map


def prepare_samples(videos, gff_cfg, tracker_cfg, jobs=1):
    """
    GFF stacks of ``videos``, in input order.
    """
    with _mapper(jobs) as mapper:
        return list(mapper(lambda video: video_gff_stack(video, gff_cfg, tracker_cfg), videos))


def _epoch_order(rng, n, count):
    """``count`` sample indices made of consecutive shuffled passes."""
    passes = []
    total = 0
    while total < count:
        passes.append(rng.permutation(n))
        total += n
    return np.concatenate(passes)[:count]


def _sample_loss_and_grads(stack, label, model, eps):
    score, _, cache = model_forward(stack, model)
    return bce_loss(score, label, eps), model_backward(bce_grad(score, label, eps), cache)


def train(dataset, gff_cfg=None, tracker_cfg=None, train_cfg=None,
          network_cfg=None, aggregator_cfg=None, jobs=1, init=None):
    """
    Train the convolutional block and the aggregator jointly.

    Every epoch draws ``samples_per_epoch`` videos from consecutive
    seeded permutations of the dataset and cuts them into mini-batches;
    per-sample gradients are averaged in batch order, so the result does
    not depend on ``jobs``.

    Parameters
    ----------
    dataset : sequence of (VideoObservations, int)
    gff_cfg : GffConfig, optional
    tracker_cfg : TrackerConfig, optional
    train_cfg : TrainConfig, optional
    network_cfg : NetworkConfig, optional
    aggregator_cfg : AggregatorConfig, optional
    jobs : int
        Worker threads for feature assembly and per-sample gradients.
    init : ModelParams, optional
        Resume from this model and its velocity; its recipes and input
        configurations take precedence.

    Returns
    -------
    model : ModelParams
    history : list of float
        Mean training loss of every epoch.

    Raises
    ------
    EmptyDataset
    """
    dataset = list(dataset)
    if not dataset:
        raise EmptyDataset("Cannot train on an empty dataset")
    train_cfg = train_cfg or TrainConfig()
    labels = []
    for video, label in dataset:
        if label not in (0, 1) or isinstance(label, bool):
            raise InvariantViolation("label", reason=f"video {video.video_id} has training label {label!r}")
        labels.append(int(label))

    if init is None:
        gff_cfg = gff_cfg or GffConfig()
        if gff_cfg.fakeness_channels is None:
            gff_cfg = dataclasses.replace(gff_cfg, fakeness_channels=dataset[0][0].fakeness_channels)
        model = ModelParams.initialize(network_cfg, aggregator_cfg, gff_cfg, tracker_cfg or TrackerConfig(),
                                       seed=train_cfg.seed)
    else:
        model = init
        log.info("Resuming from an existing model, its recipes override the given configuration")

    samples = prepare_samples([video for video, _ in dataset], model.gff_config, model.tracker_config, jobs)
    log.info(f"Training on {len(samples)} videos, {model.parameter_count()} parameters")

    rng = np.random.default_rng(derive_seed(train_cfg.seed, 1))
    flat = model.flat()
    velocity = model.velocity
    lr, mu, eps = train_cfg.lr, train_cfg.momentum, train_cfg.label_smoothing
    history = []
    with _mapper(jobs) as mapper:
        for epoch in range(1, train_cfg.epochs + 1):
            order = _epoch_order(rng, len(samples), train_cfg.samples_per_epoch)
            losses = []
            for start in range(0, len(order), train_cfg.batch_size):
                batch = order[start:start + train_cfg.batch_size].tolist()
                ahead = model.with_flat(lookahead(flat, velocity, mu))
                results = list(mapper(
                    lambda i: _sample_loss_and_grads(samples[i], labels[i], ahead, eps), batch))
                grads = {name: np.zeros_like(value) for name, value in flat.items()}
                for loss, sample_grads in results:
                    losses.append(loss)
                    for name, g in sample_grads.items():
                        grads[name] += g
                grads = {name: g / len(batch) for name, g in grads.items()}
                flat, velocity = sgd_nesterov_step(flat, grads, velocity, lr, mu)
            history.append(float(np.mean(losses)))
            log.info(f"Epoch {epoch}/{train_cfg.epochs}: mean loss {history[-1]:.6f}")
    return model.with_flat(flat, velocity), history


def predict_video(video, model, threshold=0.5):
    """
    Run the whole pipeline on one video.

    Returns
    -------
    VideoPrediction
    """
    stack = video_gff_stack(video, model.gff_config, model.tracker_config)
    video_score, group_scores, _ = model_forward(stack, model)
    log.debug(f"{video.video_id}: group scores {group_scores} -> {video_score}")
    return VideoPrediction(video.video_id, video_score, tuple(group_scores), threshold)


def write_loss_history(history, path):
    """Write ``epoch,mean_loss`` rows."""
    table = Table([np.arange(1, len(history) + 1), np.asarray(history, dtype=np.float64)],
                  names=("epoch", "mean_loss"))
    try:
        table.write(path, format="ascii.csv", overwrite=True)
    except OSError as err:
        raise IoFailure(f"Cannot write loss history {path}: {err}") from err
    return path
