"""Dataset ingestion, synthetic instances and the barycentric L1 transform."""
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .linalg import ColumnMatrix, as_vector


class LibsvmFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    """Samples as rows of ``X`` with one target per sample."""

    X: ColumnMatrix
    y: np.ndarray

    def __post_init__(self):
        if self.y.size != self.X.n_rows:
            raise ValueError(f"{self.y.size} targets for {self.X.n_rows} samples")

    @property
    def n_samples(self):
        return self.X.n_rows

    @property
    def n_features(self):
        return self.X.n_cols


def read_libsvm(path, expected_dim=None):
    """Parse ``<label> <index>:<value> ...`` lines with 1-based, strictly
    increasing indices."""
    labels, rows, cols, vals = [], [], [], []
    n_rows = 0
    max_index = 0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                labels.append(float(parts[0]))
            except ValueError:
                raise LibsvmFormatError(f"line {lineno}: bad label {parts[0]!r}") from None
            prev = 0
            for tok in parts[1:]:
                idx_s, sep, val_s = tok.partition(":")
                try:
                    if not sep:
                        raise ValueError
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise LibsvmFormatError(f"line {lineno}: malformed entry {tok!r}") from None
                if idx <= prev:
                    raise LibsvmFormatError(
                        f"line {lineno}: indices must be >= 1 and strictly increasing "
                        f"(got {idx} after {prev})")
                if not np.isfinite(val):
                    raise LibsvmFormatError(f"line {lineno}: non-finite value {val_s!r}")
                prev = idx
                rows.append(n_rows)
                cols.append(idx - 1)
                vals.append(val)
            max_index = max(max_index, prev)
            n_rows += 1
    if n_rows == 0:
        raise LibsvmFormatError(f"{path}: no samples")
    dim = max_index if expected_dim is None else int(expected_dim)
    if dim < max_index:
        raise LibsvmFormatError(
            f"feature index {max_index} exceeds expected dimension {expected_dim}")
    X = sparse.csc_matrix((vals, (rows, cols)), shape=(n_rows, max(dim, 1)))
    return LabeledDataset(ColumnMatrix(X), np.asarray(labels, dtype=np.float64))


def write_libsvm(path, X, y):
    """Write samples (rows of ``X``) in libsvm format, skipping zeros."""
    M = X if isinstance(X, ColumnMatrix) else ColumnMatrix(X)
    csr = sparse.csr_matrix(M.data)
    csr.sort_indices()
    y = as_vector(y, "y")
    with open(path, "w") as fh:
        for i in range(csr.shape[0]):
            lo, hi = csr.indptr[i], csr.indptr[i + 1]
            items = [f"{j + 1}:{float(v)!r}" for j, v in zip(csr.indices[lo:hi], csr.data[lo:hi])
                     if v != 0]
            lab = int(y[i]) if float(y[i]).is_integer() else repr(float(y[i]))
            fh.write(" ".join([str(lab)] + items) + "\n")


@dataclass(frozen=True)
class SyntheticSpec:
    d: int = 300
    n: int = 60
    support: int = 7
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.d < 1 or self.n < 1:
            raise ValueError("d and n must be positive")
        if not 0 <= self.support <= self.n:
            raise ValueError(f"support must lie in [0, n], got {self.support}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


def rng(seed):
    """The package's counter-based generator."""
    return np.random.Generator(np.random.Philox(int(seed)))


def synth_regression(spec):
    """Gaussian ``A``, a ``+-1`` sparse ground truth and ``b = A x + noise``."""
    g = rng(spec.seed)
    A = g.standard_normal((spec.d, spec.n))
    x = np.zeros(spec.n)
    pos = g.choice(spec.n, size=spec.support, replace=False)
    x[np.sort(pos)] = g.choice([-1.0, 1.0], size=spec.support)
    b = A @ x
    if spec.noise_sigma > 0:
        b = b + spec.noise_sigma * g.standard_normal(spec.d)
    return LabeledDataset(ColumnMatrix(A), b), x


def to_barycentric(A, x_l1, r):
    """Return ``(r [A, -A], weights)`` with weights on the unit simplex.

    Slack ``1 - ||x||_1 / r`` is split evenly over all ``2n`` copies, so the
    two copies of a variable receive equal shares and cancel.
    """
    A = A if isinstance(A, ColumnMatrix) else ColumnMatrix(A)
    x = as_vector(x_l1, "x")
    if x.size != A.n_cols:
        raise ValueError(f"x has length {x.size}, matrix has {A.n_cols} columns")
    if not r > 0:
        raise ValueError("radius must be positive")
    norm1 = float(np.sum(np.abs(x)))
    if norm1 > r * (1 + 1e-9):
        raise ValueError(f"||x||_1 = {norm1:.6g} exceeds the radius {r}")
    lam = np.concatenate([np.maximum(x, 0.0), np.maximum(-x, 0.0)]) / r
    slack = max(1.0 - lam.sum(), 0.0)
    if slack > 0:
        lam += slack / lam.size
    return A.hstack_neg().scaled(r), lam


def from_barycentric(lam, r):
    lam = as_vector(lam, "weights")
    if lam.size % 2:
        raise ValueError("barycentric weights need an even length")
    n = lam.size // 2
    return r * (lam[:n] - lam[n:])
