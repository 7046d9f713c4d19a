"""Surface-spline kernels on the sphere and real spherical harmonics.

The order-m kernel is k_m(x, a) = (-1)^m (1 - x.a)^(m-1) log(1 - x.a) for
m >= 2. It is conditionally positive definite with respect to the spherical
harmonics of degree at most m-1, a space of dimension m^2, so interpolation
couples a kernel block with a harmonic side constraint in a bordered system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .solver import SaddleSystem

# 1 - x.a below this is treated as a coincident pair; the kernel limit is 0.
SURFACE_CUTOFF = 1e-14


@dataclass(frozen=True)
class KernelSpec:
    """Kernel order m >= 2; poly_dim = m^2 constrained harmonics; sup norm of k_m."""

    m: int
    poly_dim: int = field(init=False)
    sup_norm: float = field(init=False)

    def __post_init__(self):
        if not isinstance(self.m, int) or self.m < 2:
            raise ValueError(f"kernel order must be an integer >= 2, got {self.m}")
        object.__setattr__(self, "poly_dim", self.m * self.m)
        object.__setattr__(self, "sup_norm", _kernel_sup_norm(self.m))


def _kernel_sup_norm(m):
    # max of |s^(m-1) log s| over s = 1 - t in (0, 2]. The endpoint s = 2
    # dominates the interior extremum 1/(e (m-1)) for every m >= 2; the scan
    # guards the claim rather than trusting it.
    s = np.linspace(1e-8, 2.0, 200_001)
    interior = float(np.abs(s ** (m - 1) * np.log(s)).max())
    return max(interior, 2.0 ** (m - 1) * math.log(2.0))


def kernel_values(spec, t):
    """k_m as a function of the dot product t = x.a, elementwise."""
    t = np.asarray(t, dtype=np.float64)
    s = np.maximum(1.0 - t, 0.0)
    near = s < SURFACE_CUTOFF
    s_safe = np.where(near, 1.0, s)
    sign = 1.0 if spec.m % 2 == 0 else -1.0
    vals = sign * s_safe ** (spec.m - 1) * np.log(s_safe)
    return np.where(near, 0.0, vals)


def eval_kernel(spec, a, b):
    """k_m(a, b) for unit vectors, broadcasting over leading axes."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    t = np.clip(np.einsum("...i,...i->...", a, b), -1.0, 1.0)
    return kernel_values(spec, t)


def kernel_matrix(spec, pts_a, pts_b=None):
    """Kernel block k_m(pts_a[i], pts_b[j]); exactly symmetric when pts_b is None."""
    pts_a = np.asarray(pts_a, dtype=np.float64)
    if pts_b is None:
        t = pts_a @ pts_a.T
        t = 0.5 * (t + t.T)  # force bitwise symmetry before the nonlinearity
    else:
        t = pts_a @ np.asarray(pts_b, dtype=np.float64).T
    np.clip(t, -1.0, 1.0, out=t)
    return kernel_values(spec, t)


# ---- real spherical harmonics ---- #

@dataclass(frozen=True)
class HarmonicBasis:
    """Real orthonormal spherical harmonics through degree L, (L+1)^2 functions.

    Degree-major ordering; within degree l: order 0, then (cos, sin) pairs for
    orders 1..l. No Condon-Shortley phase, so the degree-1 triple is
    sqrt(3/4pi) * (z, x, y).
    """

    degree_max: int

    def __post_init__(self):
        if self.degree_max < 0:
            raise ValueError("degree_max must be >= 0")

    @property
    def n_funcs(self):
        return (self.degree_max + 1) ** 2

    def orders(self):
        """(l, m) labels in column order; m < 0 tags the sine component."""
        out = []
        for ell in range(self.degree_max + 1):
            out.append((ell, 0))
            for mm in range(1, ell + 1):
                out.append((ell, mm))
                out.append((ell, -mm))
        return out

    def eval(self, points):
        """Basis values at unit vectors; (..., 3) -> (..., (L+1)^2)."""
        pts = np.asarray(points, dtype=np.float64)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        s = np.hypot(x, y)
        phi = np.arctan2(y, x)
        L = self.degree_max

        # associated Legendre P_l^m(cos theta) by upward recurrence, no CS phase
        P = {(0, 0): np.ones_like(z)}
        for mm in range(1, L + 1):
            P[mm, mm] = (2 * mm - 1) * s * P[mm - 1, mm - 1]
        for mm in range(L):
            P[mm + 1, mm] = (2 * mm + 1) * z * P[mm, mm]
        for mm in range(L + 1):
            for ell in range(mm + 2, L + 1):
                P[ell, mm] = (
                    (2 * ell - 1) * z * P[ell - 1, mm] - (ell - 1 + mm) * P[ell - 2, mm]
                ) / (ell - mm)

        cols = []
        for ell in range(L + 1):
            cols.append(math.sqrt((2 * ell + 1) / (4.0 * math.pi)) * P[ell, 0])
            for mm in range(1, ell + 1):
                norm = math.sqrt(
                    (2 * ell + 1)
                    / (2.0 * math.pi)
                    * math.factorial(ell - mm)
                    / math.factorial(ell + mm)
                )
                cols.append(norm * P[ell, mm] * np.cos(mm * phi))
                cols.append(norm * P[ell, mm] * np.sin(mm * phi))
        out = np.stack(cols, axis=-1)
        return out[0] if single else out


def harmonic_basis_for(spec):
    """The constraint space of k_m: harmonics through degree m-1."""
    return HarmonicBasis(spec.m - 1)


# ---- system assembly and expansion evaluation ---- #

def assemble_saddle(spec, nodes, subset=None):
    """Bordered matrix [[K, Phi], [Phi^T, 0]] over a node set or an index subset."""
    pts = nodes.points if hasattr(nodes, "points") else np.asarray(nodes, dtype=np.float64)
    if subset is not None:
        pts = pts[np.asarray(subset, dtype=np.int64)]
    n = pts.shape[0]
    p = spec.poly_dim
    K = kernel_matrix(spec, pts)
    Phi = harmonic_basis_for(spec).eval(pts)
    M = np.zeros((n + p, n + p))
    M[:n, :n] = K
    M[:n, n:] = Phi
    M[n:, :n] = Phi.T
    return SaddleSystem(n=n, p=p, matrix=M)


def evaluate_expansion(spec, centers, a, c, points, block_size=4096):
    """Evaluate sum_j a_j k(x, centers_j) + sum_k c_k phi_k(x) at many points.

    a is (N,) or (N, q) for q expansions sharing centers; c is (p,) or (p, q)
    with p a square (fixes the harmonic degree). Work proceeds in point blocks
    so the (P, N) kernel matrix is never fully materialized.
    """
    centers = np.asarray(centers, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)

    p = c.shape[0]
    L = int(round(math.sqrt(p))) - 1
    if (L + 1) ** 2 != p:
        raise ValueError(f"polynomial coefficient count {p} is not a square")
    basis = HarmonicBasis(L)

    out_shape = (pts.shape[0],) if a.ndim == 1 else (pts.shape[0], a.shape[1])
    out = np.empty(out_shape)
    for lo in range(0, pts.shape[0], block_size):
        blk = pts[lo : lo + block_size]
        out[lo : lo + block_size] = kernel_matrix(spec, blk, centers) @ a
        out[lo : lo + block_size] += basis.eval(blk) @ c
    return out[0] if single else out
