"""Small dense complex linear algebra: projections and signatures.

Matrices are plain numpy arrays.  The batched helpers accept arrays of shape
``(..., n, r)`` so that a projection field over a whole grid is built with
one call.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBasis, NotComplementary, NullVector

DEGENERACY_RTOL = 1e-10


def as_basis(vectors) -> np.ndarray:
    """Column matrix from a single vector, a list of vectors, or an n x r array."""
    arr = np.asarray(vectors, dtype=complex)
    if arr.ndim == 1:
        return arr.reshape(-1, 1)
    if isinstance(vectors, (list, tuple)):
        # a list of vectors: each entry becomes a column
        return arr.T.copy()
    return arr


def mgs(U: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt with one reorthogonalization pass.

    Raises DegenerateBasis when the columns are numerically dependent
    (relative smallest singular value below 1e-10).
    """
    U = np.array(U, dtype=complex)
    if U.shape[1] == 0:
        return U
    s = np.linalg.svd(U, compute_uv=False)
    if s[-1] <= DEGENERACY_RTOL * s[0]:
        raise DegenerateBasis(f"smallest singular value {s[-1]:.3e} vs largest {s[0]:.3e}")
    Q = U.copy()
    r = Q.shape[1]
    for _ in range(2):
        for i in range(r):
            for k in range(i):
                Q[:, i] -= (Q[:, k].conj() @ Q[:, i]) * Q[:, k]
            Q[:, i] /= np.linalg.norm(Q[:, i])
    return Q


@dataclass(frozen=True)
class HermProj:
    """Hermitian projection stored through an orthonormal image basis."""

    basis: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    @property
    def perp(self) -> np.ndarray:
        return np.eye(self.n) - self.matrix

    def complement(self) -> "HermProj":
        """Projection onto the orthogonal complement of the image."""
        if self.rank == self.n:
            return HermProj(np.zeros((self.n, 0), dtype=complex))
        q, _ = np.linalg.qr(self.basis, mode="complete")
        return HermProj(mgs(q[:, self.rank:]))


@dataclass(frozen=True)
class ObliqueProj:
    """Linear projection with prescribed image and kernel."""

    im_basis: np.ndarray = field(repr=False)
    ker_basis: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.im_basis.shape[0]

    @property
    def rank(self) -> int:
        return self.im_basis.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        return oblique_matrix(self.im_basis, self.ker_basis)

    def swapped(self) -> "ObliqueProj":
        """The complementary projection I - pi."""
        return ObliqueProj(self.ker_basis, self.im_basis)


@dataclass(frozen=True)
class JSignature:
    """Diagonal signature J = diag(+1,...,+1,-1,...,-1) with k plus signs."""

    n: int
    k: int

    def __post_init__(self):
        if not 0 <= self.k <= self.n:
            raise ValueError("need 0 <= k <= n")

    @property
    def diag(self) -> np.ndarray:
        return np.array([1.0] * self.k + [-1.0] * (self.n - self.k))

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diag).astype(complex)

    def adjoint(self, A: np.ndarray) -> np.ndarray:
        """A^{*J} = J^{-1} A^* J."""
        d = self.diag
        return d[:, None] * np.swapaxes(A, -1, -2).conj() * d[None, :]


def proj_from_basis(vectors) -> HermProj:
    """Hermitian projection onto span(vectors)."""
    U = as_basis(vectors)
    return HermProj(mgs(U))


def _complement_basis(U: np.ndarray) -> np.ndarray:
    n, r = U.shape
    q, _ = np.linalg.qr(U, mode="complete")
    return q[:, r:]


def oblique_proj(im, ker) -> ObliqueProj:
    """Projection with image span(im) and kernel span(ker)."""
    U = as_basis(im)
    W = as_basis(ker) if np.size(ker) else np.zeros((U.shape[0], 0), dtype=complex)
    n = U.shape[0]
    if U.shape[1] + W.shape[1] != n:
        raise NotComplementary(f"dimensions {U.shape[1]} + {W.shape[1]} != {n}")
    Qu = mgs(U) if U.shape[1] else U
    Qw = mgs(W) if W.shape[1] else W
    s = np.linalg.svd(np.hstack([Qu, Qw]), compute_uv=False)
    if s[-1] < DEGENERACY_RTOL:
        raise NotComplementary(f"image and kernel intersect (sigma_min={s[-1]:.2e})")
    return ObliqueProj(U, W)


def j_proj_from_basis(vectors, J: JSignature) -> ObliqueProj:
    """J-projection onto span(vectors): pi = V (V*JV)^{-1} V* J."""
    V = as_basis(vectors)
    G = V.conj().T @ (J.diag[:, None] * V)
    s = np.linalg.svd(G, compute_uv=False)
    scale = np.linalg.norm(V, 2) ** 2
    if s.size == 0 or s[-1] <= DEGENERACY_RTOL * scale:
        raise NullVector("V*JV is singular: the span contains a J-null direction")
    # the kernel is the J-orthogonal complement J(V^perp)
    ker = J.diag[:, None] * _complement_basis(V)
    return ObliqueProj(V, ker)


# ---------------------------------------------------------------------------
# batched kernels, used on whole grids

def herm_matrix(U: np.ndarray) -> np.ndarray:
    """U (U*U)^{-1} U* for stacked U of shape (..., n, r)."""
    Uh = np.conj(np.swapaxes(U, -1, -2))
    G = Uh @ U
    return U @ np.linalg.solve(G, Uh)


def oblique_matrix(U: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Projection onto span(U) along span(W), batched over leading axes."""
    M = np.concatenate([U, W], axis=-1)
    r = U.shape[-1]
    n = M.shape[-1]
    D = np.zeros((n, n), dtype=complex)
    D[:r, :r] = np.eye(r)
    return M @ D @ np.linalg.inv(M)


def j_matrix(V: np.ndarray, Jdiag: np.ndarray) -> np.ndarray:
    """V (V*JV)^{-1} V* J, batched."""
    Vh = np.conj(np.swapaxes(V, -1, -2))
    G = Vh @ (Jdiag[:, None] * V)
    return V @ np.linalg.solve(G, Vh * Jdiag)


def retract(P: np.ndarray) -> np.ndarray:
    """Nearest Hermitian projection: symmetrize, round eigenvalues to {0, 1}."""
    H = 0.5 * (P + np.conj(np.swapaxes(P, -1, -2)))
    w, V = np.linalg.eigh(H)
    w = (w > 0.5).astype(float)
    return (V * w[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))


def comm(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A


def dagger(A: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(A, -1, -2))


def close(A, B, tol: float) -> bool:
    """Elementwise equality with an explicit absolute tolerance."""
    return bool(np.max(np.abs(np.asarray(A) - np.asarray(B)), initial=0.0) <= tol)
