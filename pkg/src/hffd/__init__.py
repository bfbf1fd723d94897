"""Multi-pose face recognition with hybrid wavelet/DCT feature descriptors."""

from .dataset import (DatasetError, DatasetIndex, FaceImage, ImageLoadError,
                      load_image, scan_dataset, split_first_k)
from .descriptor import (FreqFeature, Hffd, enroll_class, extract_freq_features,
                         fuse_hffd, load_gallery, probe_hffd, redundancy_mask,
                         save_gallery)
from .harness import (EvalReport, ExperimentConfig, emit_report, render_report,
                      run_experiment)
from .lda import (LdaModel, ScatterPair, fit_lda, load_model, project,
                  save_model, scatter_matrices)
from .matcher import (GalleryEntry, MatchScore, build_gallery, classify_direct,
                      classify_lda, default_match_threshold, direct_match_score)
from .transforms import (SubBandSet, dct2, dwt_haar_2d, idct2, idwt_haar_2d,
                         zigzag_order, zigzag_take)

__version__ = "0.1.0"
