"""Hybrid face feature descriptors.

A per-pose frequency feature is the concatenation of the first `k_coeff`
zigzag-ordered DCT coefficients of each of the four Haar sub-bands
(ll | lh | hl | hh). A descriptor fuses one base pose with up to
`n_p - 1` auxiliary poses into a fixed slot layout

    [ base | mask_1 * aux_1 | ... | mask_{n_p-1} * aux_{n_p-1} ]

where each mask zeroes auxiliary coefficients that are redundant with the
base (approximately equal at the same index). Unused slots stay zero with
all-zero masks, so every descriptor in a gallery has the same dimension
``n_p * n_f``.
"""

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import FaceImage
from .transforms import dct2, dwt_haar_2d, zigzag_take

DEFAULT_K_COEFF = 60  # 4 * 60 = 240 coefficients per slot
DEFAULT_N_POSES = 5
DEFAULT_TAU_REL = 0.05
REDUNDANCY_EPS_ABS = 1e-6

GALLERY_MAGIC = b"HFFD"
GALLERY_VERSION = 1


@dataclass(frozen=True)
class FreqFeature:
    """Frequency feature vector of one face pose."""

    values: np.ndarray  # length 4 * k_coeff
    class_id: int = 0
    pose_index: int = 0

    def __len__(self):
        return self.values.shape[0]


@dataclass
class Hffd:
    """Fused multi-pose descriptor with its redundancy masks.

    `slots` has length n_p * n_f; `masks` is a (n_p - 1, n_f) uint8 matrix
    aligned with auxiliary slots 1..n_p-1 (1 = kept, 0 = removed/unused).
    """

    slots: np.ndarray
    masks: np.ndarray
    class_id: int
    n_p: int
    n_f: int

    def __post_init__(self):
        if self.slots.shape != (self.n_p * self.n_f,):
            raise ValueError(
                f"slots must have length n_p*n_f={self.n_p * self.n_f}, "
                f"got {self.slots.shape}")
        if self.masks.shape != (self.n_p - 1, self.n_f):
            raise ValueError(
                f"masks must be ({self.n_p - 1}, {self.n_f}), got {self.masks.shape}")

    def slot(self, i: int) -> np.ndarray:
        return self.slots[i * self.n_f:(i + 1) * self.n_f]

    @property
    def base(self) -> np.ndarray:
        return self.slot(0)


def extract_freq_features(image: FaceImage, k_coeff: int = DEFAULT_K_COEFF) -> FreqFeature:
    """Extract the per-pose frequency feature of a normalized face image.

    Pipeline: Haar decomposition, DCT of each sub-band, first k_coeff
    zigzag coefficients of each, concatenated ll | lh | hl | hh.
    """
    bands = dwt_haar_2d(image.pixels)
    parts = [
        zigzag_take(dct2(band), k_coeff)
        for band in (bands.ll, bands.lh, bands.hl, bands.hh)
    ]
    values = np.concatenate(parts)
    if not np.all(np.isfinite(values)):
        raise ValueError(f"non-finite feature values from {image.source_path}")
    return FreqFeature(values=values, class_id=image.class_id,
                       pose_index=image.pose_index)


def redundancy_mask(f_i: FreqFeature, f_b: FreqFeature,
                    tau_rel: float = DEFAULT_TAU_REL) -> np.ndarray:
    """Mark which coefficients of `f_i` are non-redundant with the base `f_b`.

    Bit j is 0 (redundant, to be removed) when the two coefficients agree
    within a relative tolerance of the base magnitude:

        |f_i[j] - f_b[j]| <= tau_rel * max(|f_b[j]|, 1e-6)

    and 1 (kept) otherwise.
    """
    vi, vb = f_i.values, f_b.values
    if vi.shape != vb.shape:
        raise ValueError(f"feature lengths differ: {vi.shape} vs {vb.shape}")
    if tau_rel < 0:
        raise ValueError(f"tau_rel must be >= 0, got {tau_rel}")
    thresh = tau_rel * np.maximum(np.abs(vb), REDUNDANCY_EPS_ABS)
    return (np.abs(vi - vb) > thresh).astype(np.uint8)


def fuse_hffd(base: FreqFeature, aux: Sequence[FreqFeature], n_p: int = DEFAULT_N_POSES,
              tau_rel: float = DEFAULT_TAU_REL) -> Hffd:
    """Fuse a base pose with auxiliary poses into one fixed-layout descriptor.

    Slot 0 carries the base feature verbatim; slot i carries aux_i with its
    redundant coefficients zeroed; slots beyond the supplied poses stay
    zero with all-zero masks.
    """
    if len(aux) > n_p - 1:
        raise ValueError(f"{len(aux)} auxiliary poses exceed n_p-1={n_p - 1} slots")
    n_f = len(base)
    slots = np.zeros(n_p * n_f, dtype=np.float64)
    masks = np.zeros((n_p - 1, n_f), dtype=np.uint8)
    slots[:n_f] = base.values
    for i, f in enumerate(aux):
        if len(f) != n_f:
            raise ValueError(f"feature lengths differ: {len(f)} vs {n_f}")
        if f.class_id != base.class_id:
            raise ValueError(
                f"class mismatch: aux pose {f.pose_index} has class {f.class_id}, "
                f"base has {base.class_id}")
        m = redundancy_mask(f, base, tau_rel)
        masks[i] = m
        slots[(i + 1) * n_f:(i + 2) * n_f] = np.where(m == 1, f.values, 0.0)
    return Hffd(slots=slots, masks=masks, class_id=base.class_id, n_p=n_p, n_f=n_f)


def probe_hffd(feature: FreqFeature, n_p: int = DEFAULT_N_POSES) -> Hffd:
    """Single-slot descriptor for a probe image (no auxiliary poses)."""
    return fuse_hffd(feature, (), n_p=n_p, tau_rel=0.0)


def enroll_class(train_images: Sequence[FaceImage], n_p: int = DEFAULT_N_POSES,
                 k_coeff: int = DEFAULT_K_COEFF,
                 tau_rel: float = DEFAULT_TAU_REL) -> list:
    """Build the per-class descriptor samples from its training images.

    Sample r takes image r as the base pose and the remaining images, in
    pose order, as auxiliaries; rotating the base over all t images yields
    t descriptors per class, giving the within-class variation the LDA
    training stage needs.
    """
    t = len(train_images)
    if t == 0:
        raise ValueError("cannot enroll a class with no training images")
    if t > n_p:
        raise ValueError(f"{t} training images exceed n_p={n_p} descriptor slots")
    class_ids = {im.class_id for im in train_images}
    if len(class_ids) != 1:
        raise ValueError(f"training images span several classes: {sorted(class_ids)}")

    features = [extract_freq_features(im, k_coeff) for im in train_images]
    samples = []
    for r in range(t):
        aux = [features[j] for j in range(t) if j != r]
        samples.append(fuse_hffd(features[r], aux, n_p=n_p, tau_rel=tau_rel))
    return samples


# ---------------------------------------------------------------------------
# Gallery serialization ("HFFD" format, all integers little-endian)
#
#   magic "HFFD" | version u16 | L u32 | n_p u32 | n_f u32
#   per class (ascending class id):
#     class_id u32 | sample_count u32
#     per sample: slots as n_p*n_f float64 LE, then the (n_p-1)*n_f mask
#     bits packed little-endian-first into ceil(bits/8) bytes.

_HEADER = struct.Struct("<4sHIII")
_CLASS_HEADER = struct.Struct("<II")


def gallery_to_bytes(hffds: Sequence[Hffd]) -> bytes:
    """Serialize descriptors grouped by class id."""
    if not hffds:
        raise ValueError("cannot serialize an empty gallery")
    n_p, n_f = hffds[0].n_p, hffds[0].n_f
    by_class = {}
    for h in hffds:
        if (h.n_p, h.n_f) != (n_p, n_f):
            raise ValueError(
                f"mixed descriptor layouts: ({h.n_p}, {h.n_f}) vs ({n_p}, {n_f})")
        by_class.setdefault(h.class_id, []).append(h)

    out = [_HEADER.pack(GALLERY_MAGIC, GALLERY_VERSION, len(by_class), n_p, n_f)]
    for class_id in sorted(by_class):
        samples = by_class[class_id]
        out.append(_CLASS_HEADER.pack(class_id, len(samples)))
        for h in samples:
            out.append(h.slots.astype("<f8").tobytes())
            out.append(np.packbits(h.masks.ravel(), bitorder="little").tobytes())
    return b"".join(out)


def gallery_from_bytes(blob: bytes) -> list:
    """Inverse of `gallery_to_bytes`; returns descriptors in file order."""
    if len(blob) < _HEADER.size:
        raise ValueError("truncated gallery data")
    magic, version, n_classes, n_p, n_f = _HEADER.unpack_from(blob, 0)
    if magic != GALLERY_MAGIC:
        raise ValueError(f"bad gallery magic {magic!r}")
    if version != GALLERY_VERSION:
        raise ValueError(f"unsupported gallery version {version}")

    offset = _HEADER.size
    slot_bytes = n_p * n_f * 8
    mask_bytes = ((n_p - 1) * n_f + 7) // 8
    hffds = []
    for _ in range(n_classes):
        if offset + _CLASS_HEADER.size > len(blob):
            raise ValueError("truncated gallery data")
        class_id, count = _CLASS_HEADER.unpack_from(blob, offset)
        offset += _CLASS_HEADER.size
        for _ in range(count):
            if offset + slot_bytes + mask_bytes > len(blob):
                raise ValueError("truncated gallery data")
            slots = np.frombuffer(blob, dtype="<f8", count=n_p * n_f,
                                  offset=offset).astype(np.float64)
            offset += slot_bytes
            packed = np.frombuffer(blob, dtype=np.uint8, count=mask_bytes,
                                   offset=offset)
            offset += mask_bytes
            bits = np.unpackbits(packed, bitorder="little")[: (n_p - 1) * n_f]
            hffds.append(Hffd(slots=slots, masks=bits.reshape(n_p - 1, n_f),
                              class_id=class_id, n_p=n_p, n_f=n_f))
    if offset != len(blob):
        raise ValueError("trailing bytes after gallery data")
    return hffds


def save_gallery(path, hffds: Sequence[Hffd]) -> int:
    """Write a gallery file; returns the byte count."""
    blob = gallery_to_bytes(hffds)
    with open(path, "wb") as f:
        f.write(blob)
    return len(blob)


def load_gallery(path) -> list:
    with open(path, "rb") as f:
        return gallery_from_bytes(f.read())
