"""Column-oriented matrix kernels.

Every screening rule touches whole columns ``a_i`` of the data matrix, so the
matrix is stored column-major (dense, Fortran order) or as compressed sparse
columns, and per-column norms are cached after the first request.
"""
import numpy as np
from scipy import sparse


class DimensionError(ValueError):
    """Raised when operand shapes do not agree."""


def as_vector(values, name="vector"):
    """Return ``values`` as a finite 1-D float64 array (no copy when possible)."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        v = v.reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


class ColumnMatrix:
    """Immutable d x n matrix with fast column access.

    Parameters
    ----------
    data : array-like or scipy sparse matrix
        The matrix ``A``. Sparse input is converted to CSC with sorted
        indices; dense input is copied to Fortran order.
    """

    __slots__ = ("_data", "_sparse", "_col_norms", "_col_sq")

    def __init__(self, data):
        if isinstance(data, ColumnMatrix):
            data = data._data
        if sparse.issparse(data):
            mat = sparse.csc_matrix(data, dtype=np.float64, copy=True)
            mat.sum_duplicates()
            mat.sort_indices()
            if not np.all(np.isfinite(mat.data)):
                raise ValueError("matrix contains non-finite entries")
            self._sparse = True
        else:
            mat = np.array(data, dtype=np.float64, order="F", copy=True)
            if mat.ndim == 1:
                mat = mat.reshape(-1, 1, order="F")
            if mat.ndim != 2:
                raise DimensionError(f"expected a 2-D matrix, got ndim={mat.ndim}")
            if not np.all(np.isfinite(mat)):
                raise ValueError("matrix contains non-finite entries")
            mat.setflags(write=False)
            self._sparse = False
        if mat.shape[0] < 1 or mat.shape[1] < 1:
            raise DimensionError(f"matrix must be at least 1x1, got {mat.shape}")
        self._data = mat
        self._col_norms = None
        self._col_sq = None

    @classmethod
    def from_columns(cls, columns):
        """Build from a sequence of equal-length column vectors."""
        cols = [as_vector(c, "column") for c in columns]
        return cls(np.column_stack(cols))

    @property
    def shape(self):
        return self._data.shape

    @property
    def n_rows(self):
        return self._data.shape[0]

    @property
    def n_cols(self):
        return self._data.shape[1]

    @property
    def is_sparse(self):
        return self._sparse

    @property
    def data(self):
        """The underlying ndarray or CSC matrix (treat as read-only)."""
        return self._data

    def toarray(self):
        if self._sparse:
            return self._data.toarray()
        return np.array(self._data)

    def __repr__(self):
        kind = "sparse" if self._sparse else "dense"
        return f"ColumnMatrix({self.n_rows}x{self.n_cols}, {kind})"

    # -- kernels -----------------------------------------------------------

    def matvec(self, x):
        """Return ``A @ x``; zero entries of ``x`` are skipped."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_cols,):
            raise DimensionError(
                f"mat_vec: x has length {x.size}, matrix has {self.n_cols} columns")
        nz = np.flatnonzero(x)
        if nz.size == 0:
            return np.zeros(self.n_rows)
        if nz.size * 4 < self.n_cols:
            if self._sparse:
                return np.asarray(self._data[:, nz] @ x[nz]).ravel()
            return self._data[:, nz] @ x[nz]
        return np.asarray(self._data @ x).ravel()

    def rmatvec(self, v):
        """Return ``A.T @ v``, i.e. the vector of inner products ``a_i^T v``."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n_rows,):
            raise DimensionError(
                f"mat_t_vec: v has length {v.size}, matrix has {self.n_rows} rows")
        return np.asarray(self._data.T @ v).ravel()

    def column(self, i):
        """Dense copy of column ``i``."""
        if self._sparse:
            return self._data[:, [i]].toarray().ravel()
        return np.array(self._data[:, i])

    def col_sq_norms(self):
        if self._col_sq is None:
            if self._sparse:
                sq = np.asarray(self._data.multiply(self._data).sum(axis=0)).ravel()
            else:
                sq = np.einsum("ij,ij->j", self._data, self._data)
            sq.setflags(write=False)
            self._col_sq = sq
        return self._col_sq

    def col_norms(self):
        """Cached Euclidean norm of every column."""
        if self._col_norms is None:
            nrm = np.sqrt(self.col_sq_norms())
            nrm.setflags(write=False)
            self._col_norms = nrm
        return self._col_norms

    def columns(self, idx):
        """New ColumnMatrix holding the columns ``idx`` (in that order).

        Cached norms are carried over.
        """
        idx = np.asarray(idx, dtype=np.intp)
        sub = ColumnMatrix.__new__(ColumnMatrix)
        data = self._data[:, idx]
        if not self._sparse:
            data = np.asfortranarray(data)
            data.setflags(write=False)
        sub._data = data
        sub._sparse = self._sparse
        sub._col_sq = None if self._col_sq is None else self._col_sq[idx]
        sub._col_norms = None if self._col_norms is None else self._col_norms[idx]
        return sub

    def group_frobenius(self, group):
        """Frobenius norm of the column block selected by ``group``.

        ``group`` is a ``range``/slice-like sequence of column indices.
        """
        idx = np.asarray(list(group) if isinstance(group, range) else group,
                         dtype=np.intp)
        if idx.size == 0:
            raise ValueError("group_frobenius: empty group")
        if idx.min() < 0 or idx.max() >= self.n_cols:
            raise IndexError(
                f"group indices must lie in [0, {self.n_cols}), got "
                f"[{idx.min()}, {idx.max()}]")
        return float(np.sqrt(np.sum(self.col_sq_norms()[idx])))

    def hstack_neg(self):
        """Return ``[A | -A]`` (the barycentric doubling of an L1 problem)."""
        if self._sparse:
            out = ColumnMatrix(sparse.hstack([self._data, -self._data], format="csc"))
        else:
            out = ColumnMatrix(np.hstack([self._data, -self._data]))
        if self._col_sq is not None:
            out._col_sq = np.concatenate([self._col_sq, self._col_sq])
        return out

    def scaled(self, factor):
        """Return ``factor * A``."""
        return ColumnMatrix(self._data * float(factor))


def mat_vec(A, x):
    return A.matvec(x)


def mat_t_vec(A, v):
    return A.rmatvec(v)


def group_frobenius(A, group):
    return A.group_frobenius(group)


def hstack_neg(A):
    return A.hstack_neg()
