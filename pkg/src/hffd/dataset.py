"""Directory-structured face dataset loading.

Datasets are laid out as `<root>/<class_dir>/<image files>` with one
subdirectory per subject. Images are binary PGM (P5, maxval 255) or 8-bit
PNG (grayscale or RGB) and are normalized to a square grayscale matrix in
[0, 1], 128x128 by default.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".pgm", ".png")
CANONICAL_SIZE = 128

LUMA_R, LUMA_G, LUMA_B = 0.299, 0.587, 0.114  # ITU-R BT.601


class DatasetError(Exception):
    """Fatal problem with a dataset directory or split request."""


class ImageLoadError(Exception):
    """Per-file load failure; carries the offending path."""

    def __init__(self, path, reason: str):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"{path}: {reason}")


@dataclass(frozen=True)
class FaceImage:
    """Normalized grayscale face image with provenance."""

    pixels: np.ndarray  # square float64 matrix, values in [0, 1]
    class_id: int
    pose_index: int
    source_path: str

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 2:
            raise ValueError(f"pixels must be a 2D matrix, got shape {p.shape}")
        if p.size and (p.min() < 0.0 or p.max() > 1.0):
            raise ValueError("pixel values must lie in [0, 1]")


@dataclass(frozen=True)
class DatasetIndex:
    """Deterministic listing of a dataset: dense class ids, sorted paths."""

    name: str
    classes: tuple  # ((class_id, (path, ...)), ...)
    skipped: tuple = ()  # subdirectories without usable images

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def n_images(self) -> int:
        return sum(len(paths) for _, paths in self.classes)

    def class_dir_name(self, class_id: int) -> str:
        return Path(self.classes[class_id][1][0]).parent.name


def scan_dataset(root) -> DatasetIndex:
    """Index a dataset directory.

    Class ids are assigned 0..L-1 in lexicographic subdirectory order;
    images within a class are sorted by filename, which defines the pose
    order. Subdirectories without any PGM/PNG file are skipped with a
    warning.

    Raises:
        DatasetError: root missing, or no usable classes found.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root missing: {root}")

    classes = []
    skipped = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        files = sorted(
            f for f in sub.iterdir()
            if f.is_file() and f.suffix.lower() in IMAGE_SUFFIXES
        )
        if not files:
            log.warning("skipping %s: no image files", sub)
            skipped.append(sub.name)
            continue
        classes.append((len(classes), tuple(files)))

    if not classes:
        raise DatasetError(f"no classes under {root}")
    return DatasetIndex(name=root.name, classes=tuple(classes), skipped=tuple(skipped))


def split_first_k(index: DatasetIndex, k: int):
    """Split each class into its first k images (training) and the rest (testing).

    Raises:
        DatasetError: k < 1, or some class has too few images to leave a
            non-empty test remainder.
    """
    if k < 1:
        raise DatasetError(f"k must be >= 1, got {k}")
    train, test = [], []
    for class_id, paths in index.classes:
        if len(paths) <= k:
            name = Path(paths[0]).parent.name
            raise DatasetError(
                f"class {class_id} ({name}) has {len(paths)} images; "
                f"need more than k={k} so the test set is non-empty"
            )
        train.append((class_id, paths[:k]))
        test.append((class_id, paths[k:]))
    return (
        DatasetIndex(name=f"{index.name}[train{k}]", classes=tuple(train)),
        DatasetIndex(name=f"{index.name}[test{k}]", classes=tuple(test)),
    )


def load_image(path, size: int = CANONICAL_SIZE, class_id: int = 0,
               pose_index: int = 0) -> FaceImage:
    """Load a PGM/PNG file as a normalized `size` x `size` FaceImage.

    RGB inputs are reduced to luminance (0.299 R + 0.587 G + 0.114 B)
    before scaling into [0, 1]; non-square or off-size inputs are resized
    with corner-aligned bilinear interpolation.

    Raises:
        ImageLoadError: unreadable file, unsupported format, corrupt header.
    """
    path = Path(path)
    try:
        with path.open("rb") as f:
            head = f.read(2)
    except OSError as e:
        raise ImageLoadError(path, f"cannot read: {e}") from e

    if head == b"P5":
        gray = _read_pgm(path).astype(np.float64)
    elif head == b"\x89P":
        gray = _png_to_gray(path)
    else:
        raise ImageLoadError(path, "unsupported format (expect P5 PGM or PNG)")

    gray /= 255.0
    pixels = _resize_bilinear(gray, size, size)
    return FaceImage(pixels=pixels, class_id=class_id, pose_index=pose_index,
                     source_path=str(path))


def load_class_images(index: DatasetIndex, class_id: int,
                      size: int = CANONICAL_SIZE):
    """Load all images of one indexed class, in pose order."""
    paths = dict(index.classes)[class_id]
    return [
        load_image(p, size=size, class_id=class_id, pose_index=i)
        for i, p in enumerate(paths)
    ]


def _read_pgm(path: Path) -> np.ndarray:
    """Parse a binary PGM (P5, maxval 255) into a uint8 (H, W) array."""
    data = path.read_bytes()

    pos = 0

    def next_token():
        nonlocal pos
        while pos < len(data):
            ch = data[pos:pos + 1]
            if ch == b"#":  # comment to end of line
                while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageLoadError(path, "truncated PGM header")
        return data[start:pos]

    if next_token() != b"P5":
        raise ImageLoadError(path, "not a binary PGM (P5)")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as e:
        raise ImageLoadError(path, f"corrupt PGM header: {e}") from e
    if width < 1 or height < 1:
        raise ImageLoadError(path, f"bad PGM dimensions {width}x{height}")
    if maxval != 255:
        raise ImageLoadError(path, f"unsupported PGM maxval {maxval} (expect 255)")

    pos += 1  # exactly one whitespace byte separates header and raster
    raster = data[pos:pos + width * height]
    if len(raster) != width * height:
        raise ImageLoadError(path, "truncated PGM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def _png_to_gray(path: Path) -> np.ndarray:
    """Decode an 8-bit gray or RGB PNG into a float64 (H, W) array on [0, 255]."""
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode not in ("L", "RGB"):
                raise ImageLoadError(
                    path, f"unsupported PNG mode {mode!r} (expect 8-bit L or RGB)")
            arr = np.asarray(im, dtype=np.float64)
    except UnidentifiedImageError as e:
        raise ImageLoadError(path, "corrupt PNG") from e
    if arr.ndim == 2:
        return arr
    return LUMA_R * arr[:, :, 0] + LUMA_G * arr[:, :, 1] + LUMA_B * arr[:, :, 2]


def _resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize.

    Output corners sample input corners exactly; interpolation uses the
    lerp form a + f*(b - a) so constant inputs are preserved bit-exactly.
    """
    in_h, in_w = img.shape
    if (in_h, in_w) == (out_h, out_w):
        return img.copy()

    def grid(n_in, n_out):
        if n_out == 1 or n_in == 1:
            return np.zeros(n_out), np.zeros(n_out, dtype=np.intp)
        coords = np.linspace(0.0, n_in - 1.0, n_out)
        base = np.minimum(coords.astype(np.intp), n_in - 2)
        return coords - base, base

    fr, r0 = grid(in_h, out_h)
    fc, c0 = grid(in_w, out_w)
    r1 = np.minimum(r0 + 1, in_h - 1)
    c1 = np.minimum(c0 + 1, in_w - 1)

    tl = img[np.ix_(r0, c0)]
    tr = img[np.ix_(r0, c1)]
    bl = img[np.ix_(r1, c0)]
    br = img[np.ix_(r1, c1)]
    top = tl + fc[None, :] * (tr - tl)
    bot = bl + fc[None, :] * (br - bl)
    return top + fr[:, None] * (bot - top)
