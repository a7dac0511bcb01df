"""Laplacians, eigenbases, Fourier transforms and the Hodge decomposition.

Node operators follow L = D - A on the weighted graph.  Edge operators are the
combinatorial Hodge Laplacians built from the signed boundary matrices:

    down = B1^T B1,   up = B2 B2^T,   full = down + up
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .complex import BoundaryOperators, WeightedGraph

ZERO_RTOL = 1e-8
SYMMETRY_RTOL = 1e-12
SIGN_TOL = 1e-12

HODGE_PARTS = ("harm", "grad", "curl")


def zero_threshold(eigenvalues) -> float:
    """Eigenvalues below this are treated as exact zeros."""
    lam = np.asarray(eigenvalues)
    top = float(np.max(np.abs(lam))) if lam.size else 0.0
    return ZERO_RTOL * max(1.0, top)


@dataclass(frozen=True)
class EigenBasis:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    zero_tol: float

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def kernel_mask(self) -> np.ndarray:
        return self.eigenvalues < self.zero_tol

    @property
    def kernel_dim(self) -> int:
        return int(np.count_nonzero(self.kernel_mask))

    def to_csv(self, path) -> None:
        """First row holds the eigenvalues, the remaining rows the eigenvector matrix."""
        table = np.vstack([self.eigenvalues[None, :], self.eigenvectors])
        np.savetxt(path, table, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "EigenBasis":
        table = np.loadtxt(Path(path), delimiter=",", ndmin=2)
        lam = table[0]
        return cls(lam, table[1:], zero_threshold(lam))


def graph_laplacian(g: WeightedGraph) -> np.ndarray:
    a = g.to_matrix()
    return np.diag(a.sum(axis=1)) - a


def hodge_laplacian(b: BoundaryOperators, variant: str = "full") -> np.ndarray:
    b1 = b.b1.toarray().astype(float)
    b2 = b.b2.toarray().astype(float)
    if variant == "down":
        return b1.T @ b1
    if variant == "up":
        return b2 @ b2.T
    if variant == "full":
        return b1.T @ b1 + b2 @ b2.T
    raise ValueError(f"unknown Hodge Laplacian variant {variant!r}; expected down, up or full")


def node_laplacian(b: BoundaryOperators) -> np.ndarray:
    """Unweighted graph Laplacian B1 B1^T of the complex's 1-skeleton."""
    b1 = b.b1.toarray().astype(float)
    return b1 @ b1.T


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    vecs = vecs.copy()
    for k in range(vecs.shape[1]):
        nz = np.flatnonzero(np.abs(vecs[:, k]) > SIGN_TOL)
        if nz.size and vecs[nz[0], k] < 0:
            vecs[:, k] = -vecs[:, k]
    return vecs


def eigendecompose(op) -> EigenBasis:
    """Dense symmetric eigendecomposition with ascending eigenvalues.

    Each eigenvector is flipped so that its first entry larger than 1e-12 in
    magnitude is positive.
    """
    op = np.asarray(op, dtype=float)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"operator must be square, got shape {op.shape}")
    if op.size == 0:
        return EigenBasis(np.zeros(0), np.zeros((0, 0)), ZERO_RTOL)
    scale = max(1.0, float(np.max(np.abs(op))))
    if np.max(np.abs(op - op.T)) > SYMMETRY_RTOL * scale:
        raise ValueError("operator not symmetric")
    lam, vecs = np.linalg.eigh(0.5 * (op + op.T))
    return EigenBasis(lam, _fix_signs(vecs), zero_threshold(lam))


def fourier_forward(basis: EigenBasis, x) -> np.ndarray:
    """Spectral coefficients U^T x.  A T x dim matrix is transformed row by row."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != basis.dim:
        raise ValueError(f"signal dimension {x.shape[-1]} does not match basis dimension {basis.dim}")
    return x @ basis.eigenvectors


def fourier_inverse(basis: EigenBasis, c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape[-1] != basis.dim:
        raise ValueError(f"coefficient dimension {c.shape[-1]} does not match basis dimension {basis.dim}")
    return c @ basis.eigenvectors.T


@dataclass(frozen=True)
class HodgeDecomposition:
    grad: np.ndarray
    curl: np.ndarray
    harm: np.ndarray
    node_potential: np.ndarray | None = None
    triangle_potential: np.ndarray | None = None

    def component(self, part: str) -> np.ndarray:
        if part not in HODGE_PARTS:
            raise ValueError(f"unknown Hodge component {part!r}")
        return getattr(self, part)


def _range_basis(m: np.ndarray):
    """Orthonormal basis of range(m) and the pseudo-inverse data of m^T m.

    Returns ``(q, v, lam)`` with ``m^T m = v diag(lam) v^T`` restricted to the
    nonzero eigenvalues and ``q = m v diag(lam)^-1/2``.
    """
    if m.shape[1] == 0:
        return np.zeros((m.shape[0], 0)), np.zeros((0, 0)), np.zeros(0)
    eb = eigendecompose(m.T @ m)
    keep = ~eb.kernel_mask
    v = eb.eigenvectors[:, keep]
    lam = eb.eigenvalues[keep]
    return (m @ v) / np.sqrt(lam), v, lam


class HodgeProjector:
    """Orthogonal projectors onto the gradient, curl and harmonic edge subspaces.

    With ``variant="down"`` the triangles are ignored: the harmonic part is the
    projection onto ker(B1^T B1) and curl is unavailable.
    """

    def __init__(self, b: BoundaryOperators, variant: str = "full"):
        if variant not in ("down", "full"):
            raise ValueError(f"variant must be 'down' or 'full', got {variant!r}")
        self.variant = variant
        self.n1 = b.n1
        b1t = b.b1.toarray().astype(float).T
        self._q_grad, self._v0, self._lam0 = _range_basis(b1t)
        self._b1t = b1t
        if variant == "full":
            b2 = b.b2.toarray().astype(float)
            self._q_curl, self._v2, self._lam2 = _range_basis(b2)
        else:
            b2 = np.zeros((b.n1, 0))
            self._q_curl, self._v2, self._lam2 = np.zeros((b.n1, 0)), np.zeros((0, 0)), np.zeros(0)
        self._b2 = b2

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n1:
            raise ValueError(f"edge signal width {x.shape[-1]} does not match {self.n1} edges")
        return x

    def grad(self, x) -> np.ndarray:
        x = self._check(x)
        return (x @ self._q_grad) @ self._q_grad.T

    def curl(self, x) -> np.ndarray:
        x = self._check(x)
        if self.variant == "down":
            raise ValueError("curl undefined without triangles")
        return (x @ self._q_curl) @ self._q_curl.T

    def harm(self, x) -> np.ndarray:
        x = self._check(x)
        out = x - self.grad(x)
        if self.variant == "full":
            out = out - self.curl(x)
        return out

    def project(self, x, part: str) -> np.ndarray:
        if part not in HODGE_PARTS:
            raise ValueError(f"unknown Hodge component {part!r}; expected one of {HODGE_PARTS}")
        return getattr(self, part)(x)

    def node_potential(self, x) -> np.ndarray:
        """Minimum-norm least-squares solution y of (B1 B1^T) y = B1 x."""
        x = self._check(x)
        rhs = x @ self._b1t
        return ((rhs @ self._v0) / self._lam0) @ self._v0.T

    def triangle_potential(self, x) -> np.ndarray:
        """Minimum-norm least-squares solution z of (B2^T B2) z = B2^T x."""
        x = self._check(x)
        rhs = x @ self._b2
        if rhs.shape[-1] == 0:
            return rhs
        return ((rhs @ self._v2) / self._lam2) @ self._v2.T

    def decompose(self, x) -> HodgeDecomposition:
        x = self._check(x)
        y = self.node_potential(x)
        z = self.triangle_potential(x)
        grad = y @ self._b1t.T
        curl = z @ self._b2.T if z.shape[-1] else np.zeros_like(x)
        return HodgeDecomposition(grad, curl, x - grad - curl, y, z)


def hodge_decompose(b: BoundaryOperators, x) -> HodgeDecomposition:
    """Split an edge signal into gradient, curl and harmonic parts."""
    return HodgeProjector(b, "full").decompose(x)


def subspace_filter(b: BoundaryOperators, x, part: str, variant: str = "full",
                    projector: HodgeProjector | None = None) -> np.ndarray:
    """Keep one Hodge component of every frame of a T x n1 edge series."""
    if variant == "down" and part == "curl":
        raise ValueError("curl undefined without triangles")
    if projector is None:
        projector = HodgeProjector(b, variant)
    return projector.project(np.asarray(x, dtype=float), part)


def split_coupled_decoupled(basis: EigenBasis, x, c: int):
    """Low-pass (first ``c`` eigenmodes) and high-pass parts of a T x n0 node series."""
    if not 1 <= c <= basis.dim:
        raise ValueError(f"cutoff c must lie in [1, {basis.dim}], got {c}")
    coeffs = fourier_forward(basis, x)
    low = coeffs.copy()
    low[..., c:] = 0.0
    coupled = fourier_inverse(basis, low)
    high = coeffs - low
    return coupled, fourier_inverse(basis, high)


def structural_decoupling_index(coupled, decoupled) -> np.ndarray:
    """Per-node ratio of decoupled to coupled temporal l2 norm."""
    coupled = np.asarray(coupled, dtype=float)
    decoupled = np.asarray(decoupled, dtype=float)
    if coupled.shape != decoupled.shape:
        raise ValueError(f"shape mismatch {coupled.shape} vs {decoupled.shape}")
    num = np.linalg.norm(decoupled, axis=0)
    den = np.linalg.norm(coupled, axis=0)
    bad = np.flatnonzero(den == 0)
    if bad.size:
        raise ValueError(f"coupled signal has zero norm at node {int(bad[0])}")
    return num / den
