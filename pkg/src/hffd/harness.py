"""Experiment harness: split, enroll, train, classify, report.

Reproduces the evaluation protocol behind the recognition-rate, timing,
and storage figures: the first k images of every class are enrolled (and,
for the LDA matchers, used to fit the projection); every remaining image
is classified individually as a single-slot probe descriptor.
"""

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import dataset as ds
from . import descriptor as dsc
from . import lda
from . import matcher as mt

MATCHER_DIRECT = "direct"
MATCHER_HFFD_LDA = "hffd_lda"
MATCHER_LDA_RAW = "lda_raw_baseline"
MATCHERS = (MATCHER_DIRECT, MATCHER_HFFD_LDA, MATCHER_LDA_RAW)

MAX_FAILURE_FRACTION = 0.10

CSV_COLUMNS = ("dataset", "matcher", "k_train", "k_coeff", "n_p", "tau_rel",
               "tau_m", "m", "rate", "train_time_s", "mean_query_time_s",
               "gallery_bytes")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_root: str
    k_train: int = 3
    k_coeff: int = dsc.DEFAULT_K_COEFF
    n_p: int = dsc.DEFAULT_N_POSES
    tau_rel: float = dsc.DEFAULT_TAU_REL
    tau_m: Optional[float] = None  # None = per-index auto threshold
    matcher: str = MATCHER_HFFD_LDA
    m_requested: Optional[int] = None
    epsilon_rel: float = lda.DEFAULT_EPSILON_REL
    prior: str = lda.PRIOR_OVER_N
    image_size: int = ds.CANONICAL_SIZE
    output: Optional[str] = None
    seed: Optional[int] = None  # reserved; splits are deterministic

    def __post_init__(self):
        if self.k_train < 1:
            raise ValueError(f"k_train must be >= 1, got {self.k_train}")
        if self.matcher not in MATCHERS:
            raise ValueError(f"unknown matcher {self.matcher!r}; pick from {MATCHERS}")
        if self.prior not in (lda.PRIOR_OVER_N, lda.PRIOR_OVER_L):
            raise ValueError(f"unknown prior rule {self.prior!r}")
        for name in ("tau_rel", "epsilon_rel"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.tau_m is not None and self.tau_m < 0:
            raise ValueError("tau_m must be >= 0")


@dataclass
class EvalReport:
    config: ExperimentConfig
    dataset: str
    recognition_rate: float
    correct: int
    total: int
    per_class: dict  # class_id -> (correct, total)
    confusion: dict  # (true, predicted) -> count
    train_time_s: float
    mean_query_time_s: float
    gallery_bytes: int
    m: Optional[int]  # retained LDA dimension, None for the direct matcher
    skipped_files: tuple = ()


def run_experiment(config: ExperimentConfig) -> EvalReport:
    """Run one evaluation protocol end to end."""
    index = ds.scan_dataset(config.dataset_root)
    train_idx, test_idx = ds.split_first_k(index, config.k_train)
    _audit_disjoint(train_idx, test_idx)

    train_images, test_images, failures = _load_split(config, train_idx, test_idx)

    t0 = time.perf_counter()
    gallery, model, gallery_bytes = _train(config, train_images)
    train_time = time.perf_counter() - t0

    tau_m = config.tau_m
    if config.matcher == MATCHER_DIRECT and tau_m is None:
        tau_m = mt.default_match_threshold(gallery)

    probe_n_p = 1 if config.matcher == MATCHER_LDA_RAW else config.n_p
    correct = 0
    per_class = {class_id: [0, 0] for class_id, _ in index.classes}
    confusion = {}
    query_times = []
    for image in test_images:
        t0 = time.perf_counter()
        feature = dsc.extract_freq_features(image, config.k_coeff)
        probe = dsc.probe_hffd(feature, n_p=probe_n_p)
        if config.matcher == MATCHER_DIRECT:
            predicted = mt.classify_direct(probe, gallery, tau_m)
        else:
            predicted, _ = mt.classify_lda(probe, model, gallery)
        query_times.append(time.perf_counter() - t0)

        truth = image.class_id
        per_class[truth][1] += 1
        if predicted == truth:
            per_class[truth][0] += 1
            correct += 1
        confusion[(truth, predicted)] = confusion.get((truth, predicted), 0) + 1

    total = len(test_images)
    return EvalReport(
        config=config,
        dataset=index.name,
        recognition_rate=correct / total if total else 0.0,
        correct=correct,
        total=total,
        per_class={c: tuple(v) for c, v in per_class.items()},
        confusion=confusion,
        train_time_s=train_time,
        mean_query_time_s=float(np.mean(query_times)) if query_times else 0.0,
        gallery_bytes=gallery_bytes,
        m=model.m if model is not None else None,
        skipped_files=tuple(failures),
    )


def _audit_disjoint(train_idx, test_idx):
    """The protocol forbids training images in the test set."""
    for (cid_a, train_paths), (cid_b, test_paths) in zip(train_idx.classes,
                                                         test_idx.classes):
        assert cid_a == cid_b
        overlap = set(train_paths) & set(test_paths)
        if overlap:
            raise RuntimeError(f"class {cid_a}: train/test overlap {sorted(overlap)}")


def _load_split(config, train_idx, test_idx):
    """Load both splits, tolerating per-file failures up to a budget."""
    failures = []

    def load_all(idx):
        loaded = []
        for class_id, paths in idx.classes:
            images = []
            for pose, path in enumerate(paths):
                try:
                    images.append(ds.load_image(path, size=config.image_size,
                                                class_id=class_id, pose_index=pose))
                except ds.ImageLoadError as e:
                    failures.append(str(e))
            loaded.append((class_id, images))
        return loaded

    train = load_all(train_idx)
    test_by_class = load_all(test_idx)

    n_files = train_idx.n_images + test_idx.n_images
    if len(failures) > MAX_FAILURE_FRACTION * n_files:
        raise RuntimeError(
            f"{len(failures)} of {n_files} files failed to load "
            f"(budget {MAX_FAILURE_FRACTION:.0%}): {failures[:3]}...")
    for class_id, images in train:
        if not images:
            raise RuntimeError(f"class {class_id}: no usable training images")

    test = [im for _, images in test_by_class for im in images]
    return train, test, failures


def _train(config, train_images):
    """Enroll every class and, for the LDA matchers, fit the projection.

    Returns (gallery entries, model or None, canonical gallery byte size).
    The canonical serialized gallery stores one descriptor per class (the
    first-base sample); rotation samples live in memory for scatter
    estimation and matching.
    """
    samples = []
    for class_id, images in train_images:
        if config.matcher == MATCHER_LDA_RAW:
            for im in images:
                feature = dsc.extract_freq_features(im, config.k_coeff)
                samples.append(dsc.probe_hffd(feature, n_p=1))
        else:
            samples.extend(dsc.enroll_class(images, n_p=config.n_p,
                                            k_coeff=config.k_coeff,
                                            tau_rel=config.tau_rel))

    model = None
    if config.matcher in (MATCHER_HFFD_LDA, MATCHER_LDA_RAW):
        x = np.stack([h.slots for h in samples])
        labels = [h.class_id for h in samples]
        scatter = lda.scatter_matrices(x, labels, prior=config.prior)
        model = lda.fit_lda(scatter, m_requested=config.m_requested,
                            epsilon_rel=config.epsilon_rel)

    gallery = mt.build_gallery(samples, model)

    primaries = {}
    for h in samples:
        primaries.setdefault(h.class_id, h)
    gallery_bytes = len(dsc.gallery_to_bytes(list(primaries.values())))
    return gallery, model, gallery_bytes


# ---------------------------------------------------------------------------
# Report rendering


def _summary_row(report: EvalReport) -> dict:
    cfg = report.config
    return {
        "dataset": report.dataset,
        "matcher": cfg.matcher,
        "k_train": cfg.k_train,
        "k_coeff": cfg.k_coeff,
        "n_p": cfg.n_p,
        "tau_rel": cfg.tau_rel,
        "tau_m": "auto" if cfg.tau_m is None else cfg.tau_m,
        "m": "" if report.m is None else report.m,
        "rate": f"{report.recognition_rate:.4f}",
        "train_time_s": f"{report.train_time_s:.6f}",
        "mean_query_time_s": f"{report.mean_query_time_s:.6f}",
        "gallery_bytes": report.gallery_bytes,
    }


def render_report(report: EvalReport, fmt: str = "csv") -> str:
    """Render a report deterministically (timing fields excepted).

    csv: one header line plus one summary row with the fixed column order.
    json-lines: a summary record, one record per class, and one per
    non-empty confusion pair, each on its own line.
    """
    row = _summary_row(report)
    if fmt == "csv":
        header = ",".join(CSV_COLUMNS)
        values = ",".join(str(row[c]) for c in CSV_COLUMNS)
        return f"{header}\n{values}\n"
    if fmt in ("jsonl", "json-lines"):
        lines = [json.dumps({"record": "summary", **row}, sort_keys=True)]
        for class_id in sorted(report.per_class):
            good, seen = report.per_class[class_id]
            lines.append(json.dumps({"record": "class", "class_id": class_id,
                                     "correct": good, "total": seen},
                                    sort_keys=True))
        for (truth, predicted) in sorted(report.confusion):
            lines.append(json.dumps({
                "record": "confusion", "true": truth, "predicted": predicted,
                "count": report.confusion[(truth, predicted)]}, sort_keys=True))
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def emit_report(report: EvalReport, path, fmt: str = "csv") -> Path:
    """Write the rendered report to a file."""
    path = Path(path)
    path.write_text(render_report(report, fmt))
    return path
