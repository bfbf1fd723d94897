"""Command-line interface.

Subcommands:
    extract   enroll training images into a descriptor gallery file
    train     fit an LDA model from a gallery file
    query     classify a single image against a gallery (and model)
    evaluate  run a full split/enroll/train/classify protocol and report

Any flag may also come from a `key = value` config file (`#` comments);
explicit command-line flags win over file values.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import descriptor as dsc
from . import harness
from . import lda
from . import matcher as mt


def parse_config_file(path) -> dict:
    """Read `key = value` lines; keys are normalized to underscore form."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip().lower().replace("-", "_")] = value.strip()
    return values


def _coerce(value: str, typ):
    if typ is bool:
        lowered = value.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {value!r}")
    return typ(value)


def _resolve(args, spec):
    """Layer defaults < config file < explicit flags into one dict."""
    file_values = parse_config_file(args.config) if getattr(args, "config", None) else {}
    resolved = {}
    for name, typ, default in spec:
        value = getattr(args, name, None)
        if value is None and name in file_values:
            value = _coerce(file_values[name], typ)
        if value is None:
            value = default
        resolved[name] = value
    return resolved


_COMMON = [
    ("k_train", int, 3),
    ("k_coeff", int, dsc.DEFAULT_K_COEFF),
    ("n_p", int, dsc.DEFAULT_N_POSES),
    ("tau_rel", float, dsc.DEFAULT_TAU_REL),
    ("image_size", int, ds.CANONICAL_SIZE),
]


def _add_common(parser):
    parser.add_argument("--config", help="key = value config file supplying any flag")
    parser.add_argument("--k-train", dest="k_train", type=int,
                        help="training images per class (default 3)")
    parser.add_argument("--k-coeff", dest="k_coeff", type=int,
                        help="zigzag DCT coefficients per sub-band (default 60)")
    parser.add_argument("--n-p", dest="n_p", type=int,
                        help="descriptor pose slots (default 5)")
    parser.add_argument("--tau-rel", dest="tau_rel", type=float,
                        help="relative redundancy threshold (default 0.05)")
    parser.add_argument("--image-size", dest="image_size", type=int,
                        help="canonical square image size (default 128)")


def _cmd_extract(args) -> int:
    cfg = _resolve(args, _COMMON + [("rotations", bool, False)])
    index = ds.scan_dataset(args.dataset)

    hffds = []
    for class_id, paths in index.classes:
        if len(paths) < cfg["k_train"]:
            name = Path(paths[0]).parent.name
            raise ds.DatasetError(
                f"class {class_id} ({name}) has {len(paths)} images, "
                f"need k_train={cfg['k_train']}")
        images = [ds.load_image(p, size=cfg["image_size"], class_id=class_id,
                                pose_index=i)
                  for i, p in enumerate(paths[:cfg["k_train"]])]
        samples = dsc.enroll_class(images, n_p=cfg["n_p"], k_coeff=cfg["k_coeff"],
                                   tau_rel=cfg["tau_rel"])
        hffds.extend(samples if cfg["rotations"] else samples[:1])

    n_bytes = dsc.save_gallery(args.out, hffds)
    print(f"wrote {len(hffds)} descriptors ({index.n_classes} classes, "
          f"{n_bytes} bytes) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _resolve(args, [("m", int, None), ("epsilon_rel", float,
                                             lda.DEFAULT_EPSILON_REL),
                          ("prior", str, lda.PRIOR_OVER_N)])
    hffds = dsc.load_gallery(args.gallery)
    x = np.stack([h.slots for h in hffds])
    labels = [h.class_id for h in hffds]
    scatter = lda.scatter_matrices(x, labels, prior=cfg["prior"])
    model = lda.fit_lda(scatter, m_requested=cfg["m"], epsilon_rel=cfg["epsilon_rel"])
    n_bytes = lda.save_model(args.out, model)
    print(f"fitted m={model.m} of n={model.n} (epsilon={model.epsilon:.3e}, "
          f"{n_bytes} bytes) to {args.out}")
    return 0


def _cmd_query(args) -> int:
    cfg = _resolve(args, [("tau_m", float, None),
                          ("image_size", int, ds.CANONICAL_SIZE)])
    hffds = dsc.load_gallery(args.gallery)
    n_p, n_f = hffds[0].n_p, hffds[0].n_f
    if n_f % 4:
        raise ValueError(f"gallery n_f={n_f} is not divisible by four sub-bands")

    image = ds.load_image(args.image, size=cfg["image_size"])
    feature = dsc.extract_freq_features(image, k_coeff=n_f // 4)
    probe = dsc.probe_hffd(feature, n_p=n_p)

    if args.model:
        model = lda.load_model(args.model)
        if model.n != n_p * n_f:
            raise ValueError(
                f"model dimension n={model.n} does not match gallery "
                f"n_p*n_f={n_p * n_f}")
        gallery = mt.build_gallery(hffds, model)
        class_id, distance = mt.classify_lda(probe, model, gallery)
        print(f"class {class_id} distance {distance:.6f}")
    else:
        gallery = mt.build_gallery(hffds)
        tau_m = cfg["tau_m"]
        if tau_m is None:
            tau_m = mt.default_match_threshold(gallery)
        class_id = mt.classify_direct(probe, gallery, tau_m)
        best = [s for s in mt.best_scores_per_class(probe, gallery, tau_m)
                if s.class_id == class_id][0]
        print(f"class {class_id} matched_points {best.matched_points} "
              f"sum_distance {best.sum_distance:.6f}")
    return 0


def _cmd_evaluate(args) -> int:
    spec = _COMMON + [
        ("tau_m", float, None),
        ("matcher", str, harness.MATCHER_HFFD_LDA),
        ("m", int, None),
        ("epsilon_rel", float, lda.DEFAULT_EPSILON_REL),
        ("prior", str, lda.PRIOR_OVER_N),
        ("out", str, "report.csv"),
        ("format", str, "csv"),
    ]
    cfg = _resolve(args, spec)
    config = harness.ExperimentConfig(
        dataset_root=args.dataset, k_train=cfg["k_train"], k_coeff=cfg["k_coeff"],
        n_p=cfg["n_p"], tau_rel=cfg["tau_rel"], tau_m=cfg["tau_m"],
        matcher=cfg["matcher"], m_requested=cfg["m"],
        epsilon_rel=cfg["epsilon_rel"], prior=cfg["prior"],
        image_size=cfg["image_size"], output=cfg["out"])
    report = harness.run_experiment(config)
    harness.emit_report(report, cfg["out"], fmt=cfg["format"])
    print(f"{report.dataset}: matcher={config.matcher} rate="
          f"{report.recognition_rate:.4f} ({report.correct}/{report.total}) "
          f"train {report.train_time_s:.3f}s query {report.mean_query_time_s:.6f}s "
          f"-> {cfg['out']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hffd",
        description="Multi-pose face recognition with hybrid frequency descriptors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="enroll training images into a gallery file")
    p.add_argument("--dataset", required=True, help="dataset root directory")
    p.add_argument("--out", required=True, help="output gallery file")
    p.add_argument("--rotations", action="store_const", const=True, default=None,
                   help="store every base-rotation sample, not just one per class")
    _add_common(p)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("train", help="fit an LDA model from a gallery file")
    p.add_argument("--gallery", required=True, help="input gallery file")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--m", type=int, help="retained dimensions (default: classes-1)")
    p.add_argument("--epsilon-rel", dest="epsilon_rel", type=float,
                   help="ridge scale for the within-class scatter (default 1e-6)")
    p.add_argument("--prior", choices=(lda.PRIOR_OVER_N, lda.PRIOR_OVER_L),
                   help="class prior weighting in the between-class scatter")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("query", help="classify one image against a gallery")
    p.add_argument("--image", required=True, help="probe image (PGM/PNG)")
    p.add_argument("--gallery", required=True, help="gallery file")
    p.add_argument("--model", help="LDA model file (omit for direct matching)")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--tau-m", dest="tau_m", type=float,
                   help="matching threshold (default: auto per-index)")
    p.add_argument("--image-size", dest="image_size", type=int)
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("evaluate", help="run a full evaluation protocol")
    p.add_argument("--dataset", required=True, help="dataset root directory")
    p.add_argument("--matcher", choices=harness.MATCHERS)
    p.add_argument("--tau-m", dest="tau_m", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--epsilon-rel", dest="epsilon_rel", type=float)
    p.add_argument("--prior", choices=(lda.PRIOR_OVER_N, lda.PRIOR_OVER_L))
    p.add_argument("--out", help="report path (default report.csv)")
    p.add_argument("--format", choices=("csv", "jsonl", "json-lines"))
    _add_common(p)
    p.set_defaults(func=_cmd_evaluate)
    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (ds.DatasetError, ds.ImageLoadError, ValueError, RuntimeError,
            OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
