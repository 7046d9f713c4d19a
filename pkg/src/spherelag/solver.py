"""Linear algebra: bordered (saddle) solves, CSC products, GMRES, eigen bounds."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

PIVOT_RTOL = 1e-14


class SingularSystemError(np.linalg.LinAlgError):
    """Factorization met a pivot below 1e-14 * ||M||."""


class NonUnisolventError(np.linalg.LinAlgError):
    """Point configuration cannot determine the polynomial part (singular Gram)."""


class GmresNotConvergedError(RuntimeError):
    """GMRES hit maxit; carries the best iterate and its report."""

    def __init__(self, x, report):
        super().__init__(
            f"no convergence in {report.iterations} iterations "
            f"(relative residual {report.final_relres:.3e})"
        )
        self.x = x
        self.report = report


# ---- dense saddle systems ---- #

@dataclass
class SaddleSystem:
    """Bordered collocation matrix [[K, Phi], [Phi^T, 0]] of size (n+p)^2."""

    n: int
    p: int
    matrix: np.ndarray
    _lu: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        size = self.n + self.p
        if m.shape != (size, size):
            raise ValueError(f"matrix shape {m.shape} does not match n+p = {size}")
        self.matrix = m


def _factor(system):
    if system._lu is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # scipy warns on exact zero pivots
            lu, piv = scipy.linalg.lu_factor(system.matrix, check_finite=False)
        scale = np.abs(system.matrix).sum(axis=1).max()  # inf-norm
        if np.abs(np.diag(lu)).min() <= PIVOT_RTOL * scale:
            raise SingularSystemError(
                f"saddle system of size {system.n}+{system.p} is numerically singular"
            )
        system._lu = (lu, piv)
    return system._lu


def factor_solve(system, rhs):
    """Solve the bordered system for one or many right-hand sides.

    rhs has length n+p (trailing p entries zero for plain interpolation data);
    columns are independent problems. Returns (a, c) = (kernel coefficients,
    polynomial coefficients). The factorization is computed once and cached.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape[0] != system.n + system.p:
        raise ValueError(
            f"rhs length {rhs.shape[0]} does not match system size {system.n + system.p}"
        )
    sol = scipy.linalg.lu_solve(_factor(system), rhs, check_finite=False)
    return sol[: system.n], sol[system.n :]


# ---- compressed sparse column matrices ---- #

@dataclass
class SparseMatrix:
    """CSC storage: rows strictly increasing within each column, no stored zeros."""

    shape: tuple
    colptr: np.ndarray
    rowidx: np.ndarray
    values: np.ndarray
    _colidx: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        nrows, ncols = self.shape
        self.colptr = np.asarray(self.colptr, dtype=np.int64)
        self.rowidx = np.asarray(self.rowidx, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.colptr.shape != (ncols + 1,) or self.colptr[0] != 0:
            raise ValueError("colptr must have length ncols+1 and start at 0")
        if np.any(np.diff(self.colptr) < 0) or self.colptr[-1] != self.rowidx.size:
            raise ValueError("colptr must be non-decreasing and end at nnz")
        if self.rowidx.size != self.values.size:
            raise ValueError("rowidx and values length mismatch")
        if self.rowidx.size and (self.rowidx.min() < 0 or self.rowidx.max() >= nrows):
            raise ValueError("row index out of range")
        # strictly increasing rows within each column
        if self.rowidx.size > 1:
            interior = np.ones(self.rowidx.size, dtype=bool)
            starts = self.colptr[1:-1]
            interior[starts[starts < self.rowidx.size]] = False  # new column may restart
            if np.any(np.diff(self.rowidx)[interior[1:]] <= 0):
                raise ValueError("row indices must strictly increase within a column")
        if np.any(self.values == 0.0):
            raise ValueError("explicit zeros must not be stored")

    @property
    def nnz(self):
        return int(self.values.size)

    @classmethod
    def from_columns(cls, nrows, columns):
        """Build from per-column (row_indices, values) pairs; sorts and drops zeros."""
        colptr = [0]
        all_rows, all_vals = [], []
        for rows, vals in columns:
            rows = np.asarray(rows, dtype=np.int64)
            vals = np.asarray(vals, dtype=np.float64)
            order = np.argsort(rows, kind="stable")
            rows, vals = rows[order], vals[order]
            if np.any(np.diff(rows) == 0):
                raise ValueError("duplicate row index within a column")
            keep = vals != 0.0
            all_rows.append(rows[keep])
            all_vals.append(vals[keep])
            colptr.append(colptr[-1] + int(keep.sum()))
        return cls(
            (nrows, len(colptr) - 1),
            np.array(colptr, dtype=np.int64),
            np.concatenate(all_rows) if all_rows else np.empty(0, dtype=np.int64),
            np.concatenate(all_vals) if all_vals else np.empty(0),
        )

    def column(self, j):
        """(row_indices, values) view of column j."""
        lo, hi = self.colptr[j], self.colptr[j + 1]
        return self.rowidx[lo:hi], self.values[lo:hi]

    def to_dense(self):
        out = np.zeros(self.shape)
        ncols = self.shape[1]
        for j in range(ncols):
            rows, vals = self.column(j)
            out[rows, j] = vals
        return out


def spmv(matrix, v):
    """Exact CSC matrix-vector product."""
    v = np.asarray(v, dtype=np.float64)
    nrows, ncols = matrix.shape
    if v.shape != (ncols,):
        raise ValueError(f"vector length {v.shape} does not match {ncols} columns")
    if matrix._colidx is None:
        matrix._colidx = np.repeat(
            np.arange(ncols, dtype=np.int64), np.diff(matrix.colptr)
        )
    contrib = matrix.values * v[matrix._colidx]
    return np.bincount(matrix.rowidx, weights=contrib, minlength=nrows)


# ---- GMRES ---- #

@dataclass
class GmresReport:
    """Iteration trace of one GMRES run (Euclidean relative residuals)."""

    iterations: int
    converged: bool
    final_relres: float
    residual_history: list
    final_check: float | None = None


def gmres(apply_a, rhs, *, x0=None, tol=1e-8, maxit=200, apply_p=None):
    """Full (non-restarted) GMRES with modified Gram-Schmidt and Givens rotations.

    Solves A x = rhs where apply_a implements v -> A v. If apply_p is given it
    acts as a right preconditioner: the Krylov iteration runs on A P and the
    returned x = x0 + P y satisfies the same residual bound. Convergence is
    ||rhs - A x||_2 / ||rhs||_2 <= tol; an exact Krylov breakdown counts as
    convergence. Raises GmresNotConvergedError (carrying the best iterate)
    when maxit is exhausted.
    """
    b = np.asarray(rhs, dtype=np.float64)
    n = b.size
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), GmresReport(0, True, 0.0, [0.0])

    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64)
    op = (lambda v: apply_a(apply_p(v))) if apply_p is not None else apply_a

    r0 = b - apply_a(x0)
    beta = float(np.linalg.norm(r0))
    history = [beta / bnorm]
    if history[0] <= tol:
        return x0.copy(), GmresReport(0, True, history[0], history)

    maxit = int(maxit)
    Q = np.empty((maxit + 1, n))
    Q[0] = r0 / beta
    H = np.zeros((maxit + 1, maxit))
    cs = np.zeros(maxit)
    sn = np.zeros(maxit)
    g = np.zeros(maxit + 1)
    g[0] = beta

    def assemble(k):
        y = scipy.linalg.solve_triangular(H[:k, :k], g[:k], check_finite=False)
        w = Q[:k].T @ y
        return x0 + (apply_p(w) if apply_p is not None else w)

    converged = False
    k = 0
    for j in range(maxit):
        # copy: the operator may hand back its argument (e.g. the identity),
        # and orthogonalization must not write through into Q
        w = np.array(op(Q[j]), dtype=np.float64)
        for i in range(j + 1):
            H[i, j] = Q[i] @ w
            w -= H[i, j] * Q[i]
        H[j + 1, j] = np.linalg.norm(w)
        col_scale = max(1.0, float(np.abs(H[: j + 2, j]).max()))
        breakdown = H[j + 1, j] <= 1e-14 * col_scale
        if not breakdown:
            Q[j + 1] = w / H[j + 1, j]

        for i in range(j):  # apply accumulated rotations to the new column
            hi, hj = H[i, j], H[i + 1, j]
            H[i, j] = cs[i] * hi + sn[i] * hj
            H[i + 1, j] = -sn[i] * hi + cs[i] * hj
        rad = np.hypot(H[j, j], H[j + 1, j])
        cs[j], sn[j] = (1.0, 0.0) if rad == 0.0 else (H[j, j] / rad, H[j + 1, j] / rad)
        H[j, j] = rad
        H[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]

        k = j + 1
        history.append(abs(g[j + 1]) / bnorm)
        if history[-1] <= tol or breakdown:
            converged = True
            break

    x = assemble(k)
    report = GmresReport(k, converged, history[-1], history)
    if not converged:
        raise GmresNotConvergedError(x, report)
    return x, report


# ---- small symmetric eigenproblems ---- #

def sym_eig_minmax(matrix):
    """(lambda_min, lambda_max) of a symmetric matrix."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    w = np.linalg.eigvalsh(0.5 * (m + m.T))
    return float(w[0]), float(w[-1])
