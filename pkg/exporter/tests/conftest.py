"""Toy fixtures: a small hierarchy, 10 images, and two scripted checkpoints."""

import json
from pathlib import Path

import numpy as np
import pytest
import torch
from PIL import Image

# engine-side tree: root 0; internals 1, 2; leaves 3, 4 under 1 and 6, 7
# under 2 (node 5 deliberately unused so ids are not contiguous)
HIERARCHY = {"nodes": [
    {"id": 0, "name": "root", "parent": None},
    {"id": 1, "name": "left", "parent": 0},
    {"id": 2, "name": "right", "parent": 0},
    {"id": 3, "name": "l-a", "parent": 1},
    {"id": 4, "name": "l-b", "parent": 1},
    {"id": 6, "name": "r-a", "parent": 2},
    {"id": 7, "name": "r-b", "parent": 2},
]}
DEPTH1_CLASSES = [1, 2]
DEPTH2_CLASSES = [3, 4, 6, 7]
IMAGE_SIZE = 16

# (partition, label, count): 6 id test images + 4 ood test images
LAYOUT = [("id_test", 3, 2), ("id_test", 4, 1), ("id_test", 6, 2),
          ("id_test", 7, 1), ("ood_test", 1, 2), ("ood_test", 2, 2)]


def _make_checkpoint(path: Path, n_classes: int, seed: int) -> None:
    torch.manual_seed(seed)
    model = torch.nn.Sequential(
        torch.nn.Flatten(),
        torch.nn.Linear(3 * IMAGE_SIZE * IMAGE_SIZE, n_classes),
    )
    model.eval()
    torch.jit.script(model).save(str(path))


@pytest.fixture(scope="session")
def toy_workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    (root / "hierarchy.json").write_text(json.dumps(HIERARCHY, indent=1))

    rng = np.random.default_rng(42)
    dataset = root / "dataset"
    n = 0
    for partition, label, count in LAYOUT:
        directory = dataset / partition / str(label)
        directory.mkdir(parents=True)
        for i in range(count):
            pixels = rng.integers(0, 256, size=(IMAGE_SIZE, IMAGE_SIZE, 3),
                                  dtype=np.uint8)
            Image.fromarray(pixels).save(directory / f"img{n:02d}.png")
            n += 1
    assert n == 10

    _make_checkpoint(root / "d1.pt", len(DEPTH1_CLASSES), seed=1)
    _make_checkpoint(root / "d2.pt", len(DEPTH2_CLASSES), seed=2)

    manifest = {
        "dataset_root": "dataset",
        "output_dir": "out",
        "batch_size": 4,
        "image_size": [IMAGE_SIZE, IMAGE_SIZE],
        "depths": [
            {"depth": 1, "checkpoint": "d1.pt", "class_ids": DEPTH1_CLASSES},
            {"depth": 2, "checkpoint": "d2.pt", "class_ids": DEPTH2_CLASSES},
        ],
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return root
