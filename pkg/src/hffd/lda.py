"""Fisher linear discriminant training on descriptor vectors.

The projection maximizes |W' S_b W| / |W' S_w W|. The within-class scatter
is ridge-regularized (descriptors routinely outnumber training samples per
dimension) and the generalized eigenproblem is solved by whitening:
factor S_w + eps*I = C C', solve the symmetric problem for C^-1 S_b C^-',
and map the eigenvectors back through C^-'.
"""

import struct
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import dpstrf

DEFAULT_EPSILON_REL = 1e-6
PRIOR_OVER_N = "over_N"  # P_k = N_k / N (default; makes S_w + S_b the total scatter)
PRIOR_OVER_L = "over_L"  # P_k = N_k / L (literal weighting variant)
RANK_TOL_REL = 1e-10

MODEL_MAGIC = b"HLDA"
MODEL_VERSION = 1


@dataclass(frozen=True)
class ScatterPair:
    """Between/within-class scatter matrices and the statistics behind them."""

    s_b: np.ndarray  # (n, n)
    s_w: np.ndarray  # (n, n)
    mu_overall: np.ndarray  # (n,)
    class_means: np.ndarray  # (L, n), rows follow class_labels
    class_counts: np.ndarray  # (L,)
    class_labels: np.ndarray  # (L,), ascending
    total_count: int
    class_count: int


@dataclass(frozen=True)
class LdaModel:
    """Fitted projection: columns of `w` ordered by descending eigenvalue."""

    w: np.ndarray  # (n, m)
    m: int
    eigenvalues: np.ndarray  # (m,), descending
    epsilon: float
    class_labels: tuple

    @property
    def n(self) -> int:
        return self.w.shape[0]


def scatter_matrices(samples: np.ndarray, labels: Sequence[int],
                     prior: str = PRIOR_OVER_N) -> ScatterPair:
    """Compute the between-class and within-class scatter of labeled samples.

        S_b = sum_k P_k (mu_k - mu_a)(mu_k - mu_a)'
        S_w = (1/N) sum_k sum_i (d_i^k - mu_k)(d_i^k - mu_k)'

    with P_k = N_k/N by default, or N_k/L under the ``over_L`` prior rule.
    Accumulation runs over classes in ascending label order.

    Args:
        samples: (N, n) matrix, one descriptor per row.
        labels: class id per row; at least two distinct classes.
    """
    x = np.asarray(samples, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2:
        raise ValueError(f"samples must be a (N, n) matrix, got shape {x.shape}")
    if y.shape != (x.shape[0],):
        raise ValueError(f"expected {x.shape[0]} labels, got {y.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain non-finite values")
    if prior not in (PRIOR_OVER_N, PRIOR_OVER_L):
        raise ValueError(f"unknown prior rule {prior!r}")

    class_labels = np.unique(y)
    n_total, dim = x.shape
    n_classes = class_labels.shape[0]
    if n_classes < 2:
        raise ValueError("need at least two classes for discriminant analysis")

    mu_overall = x.mean(axis=0)
    means = np.empty((n_classes, dim))
    counts = np.empty(n_classes, dtype=np.int64)
    class_index = np.searchsorted(class_labels, y)
    for i, label in enumerate(class_labels):
        xk = x[y == label]
        counts[i] = xk.shape[0]
        means[i] = xk.mean(axis=0)

    # single GEMM per scatter: center every row by its class mean, and weight
    # the mean deviations by sqrt(P_k)
    centered = x - means[class_index]
    s_w = centered.T @ centered / n_total
    priors = counts / (n_total if prior == PRIOR_OVER_N else n_classes)
    delta = (means - mu_overall) * np.sqrt(priors)[:, None]
    s_b = delta.T @ delta

    # matmul accumulation leaves ulp-level asymmetry; the contract is symmetric
    s_w = (s_w + s_w.T) / 2.0
    s_b = (s_b + s_b.T) / 2.0
    return ScatterPair(s_b=s_b, s_w=s_w, mu_overall=mu_overall, class_means=means,
                       class_counts=counts, class_labels=class_labels,
                       total_count=n_total, class_count=n_classes)


def fit_lda(scatter: ScatterPair, m_requested: Optional[int] = None,
            epsilon_rel: float = DEFAULT_EPSILON_REL) -> LdaModel:
    """Solve the regularized Fisher eigenproblem S_b w = lambda (S_w + eps I) w.

    eps = epsilon_rel * trace(S_w) / n (epsilon_rel itself when the trace is
    zero). Retains m = min(m_requested or L-1, #eigenvalues above
    1e-10 * lambda_max) leading eigenvectors; each column's sign is fixed so
    its largest-magnitude entry is positive.
    """
    s_b, s_w = scatter.s_b, scatter.s_w
    n = s_w.shape[0]
    if not (np.all(np.isfinite(s_b)) and np.all(np.isfinite(s_w))):
        raise ValueError("scatter matrices contain non-finite entries")
    if m_requested is not None and m_requested < 1:
        raise ValueError(f"m_requested must be >= 1, got {m_requested}")

    trace = float(np.trace(s_w))
    epsilon = epsilon_rel * trace / n if trace > 0.0 else epsilon_rel
    s_w_reg = s_w + epsilon * np.eye(n)
    chol = np.linalg.cholesky(s_w_reg)

    # S_b is PSD with rank at most L-1 << n, so factor it as B B' by pivoted
    # Cholesky and diagonalize the whitened product through the small
    # Gram matrix: the nonzero spectrum of (C^-1 B)(C^-1 B)' = C^-1 S_b C^-'
    # equals that of G = (C^-1 B)'(C^-1 B), and u_i = Z v_i / sqrt(lambda_i)
    # recovers the orthonormal eigenvectors of the whitened problem.
    factor, piv, rank_b, info = dpstrf(s_b, lower=1)
    if info < 0:
        raise ValueError(f"between-class scatter factorization failed (info={info})")
    b_factor = np.zeros((n, rank_b))
    b_factor[piv - 1] = np.tril(factor)[:, :rank_b]

    z = solve_triangular(chol, b_factor, lower=True)
    gram = z.T @ z
    eigvals, v = np.linalg.eigh((gram + gram.T) / 2.0)
    eigvals = eigvals[::-1]
    v = v[:, ::-1]

    lam_max = eigvals[0] if eigvals.size else 0.0
    rank = int(np.sum(eigvals > RANK_TOL_REL * lam_max)) if lam_max > 0 else 0
    m_cap = m_requested if m_requested is not None else scatter.class_count - 1
    m = min(m_cap, rank)

    u = z @ (v[:, :m] / np.sqrt(eigvals[:m]))
    w = solve_triangular(chol.T, u, lower=False)
    for j in range(m):
        col = w[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            w[:, j] = -col

    return LdaModel(w=w, m=m, eigenvalues=eigvals[:m].copy(), epsilon=epsilon,
                    class_labels=tuple(int(c) for c in scatter.class_labels))


def project(model: LdaModel, d: np.ndarray) -> np.ndarray:
    """Project one descriptor vector into the discriminant space (W' d)."""
    v = np.asarray(d, dtype=np.float64)
    if v.shape != (model.n,):
        raise ValueError(f"expected a vector of length {model.n}, got shape {v.shape}")
    return model.w.T @ v


def project_rows(model: LdaModel, x: np.ndarray) -> np.ndarray:
    """Project a (N, n) sample matrix; returns (N, m)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n:
        raise ValueError(f"expected a (N, {model.n}) matrix, got shape {x.shape}")
    return x @ model.w


# ---------------------------------------------------------------------------
# Model serialization ("HLDA" format, all integers little-endian)
#
#   magic "HLDA" | version u16 | n u32 | m u32 | epsilon f64
#   W as n*m float64 LE (column-major), eigenvalues as m float64 LE,
#   then u32 label count and one u32 per class label.

_MODEL_HEADER = struct.Struct("<4sHIId")


def model_to_bytes(model: LdaModel) -> bytes:
    out = [_MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, model.n, model.m,
                              model.epsilon)]
    out.append(model.w.astype("<f8").tobytes(order="F"))
    out.append(model.eigenvalues.astype("<f8").tobytes())
    out.append(struct.pack("<I", len(model.class_labels)))
    out.append(struct.pack(f"<{len(model.class_labels)}I", *model.class_labels))
    return b"".join(out)


def model_from_bytes(blob: bytes) -> LdaModel:
    if len(blob) < _MODEL_HEADER.size:
        raise ValueError("truncated model data")
    magic, version, n, m, epsilon = _MODEL_HEADER.unpack_from(blob, 0)
    if magic != MODEL_MAGIC:
        raise ValueError(f"bad model magic {magic!r}")
    if version != MODEL_VERSION:
        raise ValueError(f"unsupported model version {version}")
    offset = _MODEL_HEADER.size

    need = (n * m + m) * 8 + 4
    if offset + need > len(blob):
        raise ValueError("truncated model data")
    w = np.frombuffer(blob, dtype="<f8", count=n * m, offset=offset)
    w = w.reshape((n, m), order="F").astype(np.float64)
    offset += n * m * 8
    eigenvalues = np.frombuffer(blob, dtype="<f8", count=m,
                                offset=offset).astype(np.float64)
    offset += m * 8
    (label_count,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if offset + 4 * label_count > len(blob):
        raise ValueError("truncated model data")
    labels = struct.unpack_from(f"<{label_count}I", blob, offset)
    offset += 4 * label_count
    if offset != len(blob):
        raise ValueError("trailing bytes after model data")
    return LdaModel(w=w, m=m, eigenvalues=eigenvalues, epsilon=epsilon,
                    class_labels=tuple(labels))


def save_model(path, model: LdaModel) -> int:
    blob = model_to_bytes(model)
    with open(path, "wb") as f:
        f.write(blob)
    return len(blob)


def load_model(path) -> LdaModel:
    with open(path, "rb") as f:
        return model_from_bytes(f.read())
