"""Project default for pytest"""
import pytest

from gffdetect.config import (
    CliConfig, GffConfig, NetworkConfig, AggregatorConfig, TrainConfig, EvalConfig, TrackerConfig,
)
from gffdetect.synth import generate_dataset, write_dataset


def pytest_addoption(parser):
    parser.addoption(
        "--slow",
        action="store_true",
        default=False,
        help="Run slow end-to-end training checks",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--slow"):
        return
    skip = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def patch_env_variables(monkeypatch):
    """
    Make sure the environment doesn't initially contain these so
    that test results are consistent.
    """
    for var in ["GFFDETECT_JOBS"]:
        monkeypatch.delenv(var, raising=False)


@pytest.fixture
def small_config():
    """A configuration small enough to train in a fraction of a second."""
    return CliConfig(
        tracker=TrackerConfig(),
        gff=GffConfig(frames_per_matrix=8, face_slots=2),
        network=NetworkConfig(kernel_sizes=(1, 2), conv1_filters=2, conv2_filters=2, dense_units=4),
        aggregator=AggregatorConfig(max_groups=3, hidden_units=3),
        train=TrainConfig(lr=0.05, batch_size=4, epochs=2, samples_per_epoch=8, seed=11),
        eval=EvalConfig(test_fraction=0.25),
        seed=11,
    )


@pytest.fixture(scope="session")
def small_dataset():
    return generate_dataset(8, seed=5)


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory, small_dataset):
    directory = tmp_path_factory.mktemp("synth")
    manifest = write_dataset(small_dataset, directory)
    return directory, manifest
