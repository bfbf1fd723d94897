"""Shared fixtures: tiny image writers and a synthetic ORL-layout dataset.

The synthetic dataset mimics the public face benchmarks' shape (40 classes,
10 poses each, 112x92 8-bit PGM) without shipping any face data: every
class shares a common smooth "mean face" field plus a class-specific
perturbation, and each pose translates, rescales, relights, and noises it.
Set HFFD_ORL_DIR to run the dataset-level tests against a real dataset
with the same directory layout instead.
"""

import os
from pathlib import Path

import numpy as np
import pytest


def write_pgm(path, array, comment=None):
    """Write a uint8 matrix as binary PGM (P5, maxval 255)."""
    arr = np.asarray(array, dtype=np.uint8)
    header = f"P5\n{'# ' + comment + chr(10) if comment else ''}{arr.shape[1]} {arr.shape[0]}\n255\n"
    Path(path).write_bytes(header.encode("ascii") + arr.tobytes())


def _gaussian_field(yy, xx, params):
    out = np.zeros_like(yy)
    for cy, cx, sy, sx, amp in params:
        out += amp * np.exp(-(((yy - cy) / sy) ** 2 + ((xx - cx) / sx) ** 2) / 2.0)
    return out


def make_synthetic_face_dataset(root, n_classes=40, n_poses=10, height=112,
                                width=92, seed=7, identity_strength=0.5,
                                shift_px=1.5, gain_jitter=0.015, noise=0.02):
    """Generate a deterministic multi-pose face-like dataset of PGM files.

    Pose variation (sub-pixel translation, mild lighting gain, sensor
    noise) is calibrated to ORL-like gentleness: same-class poses stay
    largely redundant at the default fusion threshold while the noise
    still separates the matchers. Classes sit in zero-padded
    subdirectories so lexicographic order matches numeric order.
    """
    rng = np.random.default_rng(seed)
    root = Path(root)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)

    def random_blobs(n, amp_scale):
        return [(rng.uniform(0.2, 0.8) * height, rng.uniform(0.2, 0.8) * width,
                 rng.uniform(0.08, 0.3) * height, rng.uniform(0.08, 0.3) * width,
                 rng.uniform(-1.0, 1.0) * amp_scale) for _ in range(n)]

    mean_face = random_blobs(8, 1.0)
    for c in range(n_classes):
        cls_dir = root / f"s{c + 1:03d}"
        cls_dir.mkdir(parents=True)
        identity = random_blobs(6, identity_strength)
        for p in range(n_poses):
            dy, dx = rng.uniform(-shift_px, shift_px, 2)
            gain = rng.uniform(1.0 - gain_jitter, 1.0 + gain_jitter)
            field = _gaussian_field(yy + dy, xx + dx, mean_face)
            field += _gaussian_field(yy + dy, xx + dx, identity)
            img = gain * (0.5 + 0.22 * field) + rng.normal(0.0, noise, (height, width))
            write_pgm(cls_dir / f"p{p + 1:02d}.pgm",
                      np.clip(img, 0.0, 1.0) * 255.0)
    return root


@pytest.fixture(scope="session")
def face_dataset_root(tmp_path_factory):
    """ORL-layout dataset for protocol-level tests; real data if provided."""
    env_root = os.environ.get("HFFD_ORL_DIR")
    if env_root:
        return Path(env_root)
    root = tmp_path_factory.mktemp("synthfaces") / "faces"
    return make_synthetic_face_dataset(root)


@pytest.fixture(scope="session")
def toy_constant_root(tmp_path_factory):
    """Two classes of constant-intensity images (0.2 vs 0.8), four poses each."""
    root = tmp_path_factory.mktemp("toyconst") / "toy"
    for name, level in (("bright", 204), ("dark", 51)):
        cls = root / name
        cls.mkdir(parents=True)
        for p in range(4):
            write_pgm(cls / f"img{p}.pgm", np.full((16, 16), level, dtype=np.uint8))
    return root
