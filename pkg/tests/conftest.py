import hashlib
from pathlib import Path

import pytest

from seadet.dataset import load_manifest
from seadet.fixtures import generate_fixture


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("fixture")
    generate_fixture(root, seed=7)
    return root


@pytest.fixture(scope="session")
def fixture_dataset(fixture_dir):
    return load_manifest(fixture_dir / "manifest.json")


@pytest.fixture(scope="session")
def small_fixture_dir(tmp_path_factory) -> Path:
    """Same shape, smaller images: keeps paste-heavy tests fast."""
    root = tmp_path_factory.mktemp("fixture_small")
    generate_fixture(root, seed=11, image_size=(160, 120))
    return root


@pytest.fixture(scope="session")
def small_fixture_dataset(small_fixture_dir):
    return load_manifest(small_fixture_dir / "manifest.json")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
