"""Local Lagrange bases and the preconditioned interpolation solve.

Instead of truncating the full basis, each local function chi_xi solves a small
bordered system on the footprint Upsilon(xi) of nearest neighbors with a
cardinal right-hand side. Stacking the footprint solutions column-wise gives a
sparse N x N coefficient matrix A and a dense m^2 x N polynomial block C; the
map v -> K (A v) + Phi (C v) is then close enough to the identity that plain
GMRES on the right-preconditioned system converges in a handful of iterations,
essentially independent of N.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geom import NodeSet, ensure_stats
from .kernel import (
    KernelSpec,
    evaluate_expansion,
    harmonic_basis_for,
    kernel_matrix,
    kernel_values,
)
from .solver import (
    SaddleSystem,
    SingularSystemError,
    SparseMatrix,
    factor_solve,
    gmres,
    spmv,
)
from .neighbors import ball, build_index, knn, knn_all

# Refuse node sets beyond this size outright.
MAX_NODES = 200_000

# Largest N for which the dense kernel matrix is materialized (once) instead of
# recomputed row-block by row-block inside every matvec. 12000^2 doubles is
# about 1.1 GB, a safe fit here; beyond that the matrix never exists in full.
MATERIALIZE_LIMIT = 12_000


class StencilFailureError(RuntimeError):
    """Some footprints gave singular local systems; lists the center indices."""

    def __init__(self, centers):
        self.centers = list(centers)
        preview = ", ".join(str(c) for c in self.centers[:8])
        more = "..." if len(self.centers) > 8 else ""
        super().__init__(
            f"{len(self.centers)} local systems were singular (centers {preview}{more})"
        )


def default_footprint(n_nodes, m=2):
    """Practical footprint size 7 * ceil(log10(N)^2), floored at m^2 + 1.

    Gives 84, 119, 140, 154, 175, 196 for N = 2562, 10242, 23042, 40962,
    92162, 163842.
    """
    n_nodes = int(n_nodes)
    grown = 7 * math.ceil(math.log10(n_nodes) ** 2) if n_nodes > 1 else 1
    return min(n_nodes, max(m * m + 1, grown))


@dataclass(frozen=True)
class FootprintRule:
    """How big the neighborhood of each center is.

    count mode: n(N) = min(N, max(m^2 + 1, round(M * log(N)^2))) with natural
    log, unless fixed_n pins the size directly. radius mode: r(h) = M*h*log(1/h)
    and the footprint is a geodesic ball.
    """

    mode: str = "count"
    M: float = 7.0 / math.log(10.0) ** 2
    fixed_n: int | None = None

    def __post_init__(self):
        if self.mode not in ("count", "radius"):
            raise ValueError(f"unknown footprint mode {self.mode!r}")

    def stencil_count(self, n_nodes, m):
        if self.mode != "count":
            raise ValueError("stencil_count applies to count mode only")
        if self.fixed_n is not None:
            target = int(self.fixed_n)
        else:
            target = round(self.M * math.log(n_nodes) ** 2) if n_nodes > 1 else 1
        return min(n_nodes, max(m * m + 1, target))

    def stencil_radius(self, h):
        if self.mode != "radius":
            raise ValueError("stencil_radius applies to radius mode only")
        if not 0.0 < h < 1.0:
            raise ValueError("radius mode needs a fill distance in (0, 1)")
        return self.M * h * math.log(1.0 / h)


@dataclass
class LocalBasis:
    """Sparse local Lagrange basis: column xi of A_sparse lives on Upsilon(xi)."""

    nodes: NodeSet
    spec: KernelSpec
    A_sparse: SparseMatrix
    C: np.ndarray
    footprint: FootprintRule
    per_center_n: np.ndarray


def _solve_stencil(spec, basis, pts, stencil):
    """Cardinal solve on one footprint; the center is the first stencil entry."""
    sub = pts[stencil]
    n_loc = stencil.size
    p = spec.poly_dim
    M = np.zeros((n_loc + p, n_loc + p))
    M[:n_loc, :n_loc] = kernel_matrix(spec, sub)
    phi = basis.eval(sub)
    M[:n_loc, n_loc:] = phi
    M[n_loc:, :n_loc] = phi.T
    rhs = np.zeros(n_loc + p)
    rhs[0] = 1.0
    a, c = factor_solve(SaddleSystem(n=n_loc, p=p, matrix=M), rhs)
    return a, c


def build_local_basis(nodes, spec, footprint=None, *, grow_on_failure=False, threads=1):
    """Solve every footprint system and assemble the sparse basis.

    footprint defaults to the practical count rule (fixed_n = default_footprint).
    With grow_on_failure a singular footprint is retried once at doubled size
    (count) or doubled radius; remaining failures abort with StencilFailureError
    listing all affected centers.
    """
    n = len(nodes)
    if n > MAX_NODES:
        raise ValueError(f"N = {n} exceeds the safety cap {MAX_NODES}")
    if footprint is None:
        footprint = FootprintRule(fixed_n=default_footprint(n, spec.m))
    pts = nodes.points
    basis = harmonic_basis_for(spec)
    index = build_index(nodes)

    if footprint.mode == "count":
        n_sten = footprint.stencil_count(n, spec.m)
        stencils = knn_all(index, n_sten)
        rows_of = lambda i: stencils[i]
        grow = lambda i: knn(index, i, min(n, 2 * n_sten))
    else:
        stats = ensure_stats(nodes)
        r = footprint.stencil_radius(stats.h)
        rows_of = lambda i: ball(index, pts[i], r)
        grow = lambda i: ball(index, pts[i], 2 * r)

    def run(i):
        stencil = np.asarray(rows_of(i), dtype=np.int64)
        try:
            a, c = _solve_stencil(spec, basis, pts, stencil)
        except SingularSystemError:
            if not grow_on_failure:
                return i, None, None, None
            stencil = np.asarray(grow(i), dtype=np.int64)
            try:
                a, c = _solve_stencil(spec, basis, pts, stencil)
            except SingularSystemError:
                return i, None, None, None
        order = np.argsort(stencil)
        return i, stencil[order], a[order], c

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(n), chunksize=64))
    else:
        results = [run(i) for i in range(n)]

    failed = [r[0] for r in results if r[1] is None]
    if failed:
        raise StencilFailureError(failed)

    columns = [(rows, vals) for _, rows, vals, _ in results]
    C = np.column_stack([c for _, _, _, c in results])
    per_center_n = np.array([rows.size for _, rows, _, _ in results], dtype=np.int64)
    return LocalBasis(
        nodes=nodes,
        spec=spec,
        A_sparse=SparseMatrix.from_columns(n, columns),
        C=C,
        footprint=footprint,
        per_center_n=per_center_n,
    )


def eval_local_function(basis, center_idx, points):
    """Values of the local Lagrange function chi_xi at arbitrary points."""
    rows, vals = basis.A_sparse.column(center_idx)
    return evaluate_expansion(
        basis.spec, basis.nodes.points[rows], vals, basis.C[:, center_idx], points
    )


@dataclass
class QuasiInterpolant:
    """Q f = sum_xi f(xi) chi_xi, collapsed to one kernel expansion.

    The collapse sum_xi f_xi chi_xi = sum_zeta (A f)_zeta k(., zeta) + poly part
    is algebraically exact, so evaluation is always the full summation.
    """

    basis: LocalBasis
    kernel_weights: np.ndarray
    poly_weights: np.ndarray

    def __call__(self, points, block_size=4096):
        return evaluate_expansion(
            self.basis.spec,
            self.basis.nodes.points,
            self.kernel_weights,
            self.poly_weights,
            points,
            block_size=block_size,
        )


def quasi_interpolate(basis, f_values, exact=True):
    """Quasi-interpolant of node data; needs no linear solve."""
    if not exact:
        raise ValueError("only exact full summation is supported")
    f = np.asarray(f_values, dtype=np.float64)
    if f.shape != (len(basis.nodes),):
        raise ValueError("data length does not match the node set")
    return QuasiInterpolant(
        basis=basis,
        kernel_weights=spmv(basis.A_sparse, f),
        poly_weights=basis.C @ f,
    )


class KernelMatvec:
    """v -> K v for the full kernel matrix, materialized only when N is small.

    Above `materialize_limit` the product is accumulated over row blocks with
    kernel entries recomputed on the fly, so memory stays at one block.
    """

    def __init__(self, spec, points, materialize_limit=MATERIALIZE_LIMIT):
        self.spec = spec
        self.points = np.asarray(points, dtype=np.float64)
        n = self.points.shape[0]
        self.matrix = kernel_matrix(spec, self.points) if n <= materialize_limit else None
        # about 1.5e7 kernel entries per block keeps the working set near 120 MB
        self.block_rows = max(1, int(1.5e7 / max(n, 1)))

    def __call__(self, v):
        v = np.asarray(v, dtype=np.float64)
        if self.matrix is not None:
            return self.matrix @ v
        pts = self.points
        n = pts.shape[0]
        out = np.empty(n)
        for lo in range(0, n, self.block_rows):
            t = pts[lo : lo + self.block_rows] @ pts.T
            np.clip(t, -1.0, 1.0, out=t)
            out[lo : lo + self.block_rows] = kernel_values(self.spec, t) @ v
        return out


def interpolate_preconditioned(
    nodes,
    spec,
    basis,
    f_values,
    *,
    tol=1e-6,
    maxit=200,
    x0="data",
    materialize_limit=MATERIALIZE_LIMIT,
):
    """Solve the interpolation system with the local basis as right preconditioner.

    GMRES runs on the composed operator v -> K (A_sparse v) + Phi (C v) with the
    function values as initial guess (x0="data", the useful default since the
    local basis is nearly cardinal) or zero (x0="zero"). The returned (a, c) are
    recovered through the basis, a = A_sparse v, c = C v, and the report carries
    the relative sup-norm residual of the recovered interpolant as final_check.
    """
    f = np.asarray(f_values, dtype=np.float64)
    n = len(nodes)
    if f.shape != (n,):
        raise ValueError("data length does not match the node set")
    if basis.nodes is not nodes and len(basis.nodes) != n:
        raise ValueError("basis was built for a different node set")
    if x0 not in ("data", "zero"):
        raise ValueError("x0 must be 'data' or 'zero'")

    kmv = KernelMatvec(spec, nodes.points, materialize_limit=materialize_limit)
    phi = harmonic_basis_for(spec).eval(nodes.points)
    A_s, C = basis.A_sparse, basis.C

    def op(v):
        return kmv(spmv(A_s, v)) + phi @ (C @ v)

    start = f if x0 == "data" else None
    v, report = gmres(op, f, x0=start, tol=tol, maxit=maxit)
    a = spmv(A_s, v)
    c = C @ v
    resid = kmv(a) + phi @ c - f
    report.final_check = float(np.abs(resid).max() / np.abs(f).max())
    return a, c, report


# ---- basis file round trip ---- #

def save_basis(path, basis, fmt="npz"):
    """Persist a LocalBasis; 'npz' (compact) or 'csv' (documented text triplets)."""
    A, rule = basis.A_sparse, basis.footprint
    if fmt == "npz":
        np.savez(
            path,
            colptr=A.colptr,
            rowidx=A.rowidx,
            values=A.values,
            C=basis.C,
            per_center_n=basis.per_center_n,
            m=np.array([basis.spec.m]),
            n_nodes=np.array([len(basis.nodes)]),
            mode=np.array([rule.mode]),
            M=np.array([rule.M]),
            fixed_n=np.array([-1 if rule.fixed_n is None else rule.fixed_n]),
        )
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("# spherelag local basis, format csv\n")
            fh.write(
                f"# N={len(basis.nodes)} m={basis.spec.m} mode={rule.mode} "
                f"M={rule.M!r} fixed_n={'' if rule.fixed_n is None else rule.fixed_n}\n"
            )
            fh.write("kind,col,idx,value\n")
            writer = csv.writer(fh)
            for j in range(A.shape[1]):
                rows, vals = A.column(j)
                for r, v in zip(rows, vals):
                    writer.writerow(["k", j, r, repr(float(v))])
                for k, v in enumerate(basis.C[:, j]):
                    writer.writerow(["p", j, k, repr(float(v))])
    else:
        raise ValueError(f"unknown basis format {fmt!r}")


def load_basis(path, nodes, spec):
    """Inverse of save_basis; validates set size and kernel order."""
    text = str(path).endswith(".csv")
    if not text:
        with np.load(path, allow_pickle=False) as data:
            if int(data["n_nodes"][0]) != len(nodes):
                raise ValueError("basis was saved for a different node count")
            if int(data["m"][0]) != spec.m:
                raise ValueError("basis was saved for a different kernel order")
            fixed = int(data["fixed_n"][0])
            rule = FootprintRule(
                mode=str(data["mode"][0]),
                M=float(data["M"][0]),
                fixed_n=None if fixed < 0 else fixed,
            )
            A = SparseMatrix(
                (len(nodes), len(nodes)), data["colptr"], data["rowidx"], data["values"]
            )
            return LocalBasis(
                nodes=nodes,
                spec=spec,
                A_sparse=A,
                C=np.array(data["C"]),
                footprint=rule,
                per_center_n=np.array(data["per_center_n"]),
            )

    n = len(nodes)
    meta = {}
    data_rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        key, _, val = tok.partition("=")
                        meta[key] = val
                continue
            if line.startswith("kind,"):
                continue
            data_rows.append(line)
    # metadata first: a mismatched node set must fail cleanly, not via a
    # column index landing outside the allocation below
    if meta.get("N") is not None and int(meta["N"]) != n:
        raise ValueError("basis was saved for a different node count")
    if meta.get("m") is not None and int(meta["m"]) != spec.m:
        raise ValueError("basis was saved for a different kernel order")
    columns = [([], []) for _ in range(n)]
    C = np.zeros((spec.poly_dim, n))
    for line in data_rows:
        kind, col, idx, value = line.split(",")
        col, idx = int(col), int(idx)
        if kind == "k":
            columns[col][0].append(idx)
            columns[col][1].append(float(value))
        elif kind == "p":
            C[idx, col] = float(value)
        else:
            raise ValueError(f"unknown record kind {kind!r}")
    default_m = 7.0 / math.log(10.0) ** 2
    rule = FootprintRule(
        mode=meta.get("mode", "count"),
        M=float(meta.get("M", default_m)),
        fixed_n=int(meta["fixed_n"]) if meta.get("fixed_n") else None,
    )
    A = SparseMatrix.from_columns(n, columns)
    per_center = np.diff(A.colptr)
    return LocalBasis(
        nodes=nodes, spec=spec, A_sparse=A, C=C, footprint=rule, per_center_n=per_center
    )
