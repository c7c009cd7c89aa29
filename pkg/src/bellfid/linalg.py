"""Dense linear-algebra helpers shared across the package.

Composite systems use the flat-index convention |a, b> -> a * dim_b + b,
i.e. plain np.kron ordering, everywhere.
"""

import numpy as np

HERMITIAN_ATOL = 1e-12
PSD_ATOL = 1e-10


def tensor_product(a, b):
    """Kronecker product of two operators (or kets) in the a*dim_b + b convention."""
    return np.kron(np.asarray(a), np.asarray(b))


def dagger(a):
    return np.conj(np.asarray(a)).T


def hermitize(a):
    """Project onto the Hermitian part, (A + A^dag)/2."""
    a = np.asarray(a)
    return (a + dagger(a)) / 2


def is_hermitian(a, atol=HERMITIAN_ATOL):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return bool(np.abs(a - dagger(a)).max() <= atol)


def hermitian_eig(a, atol=HERMITIAN_ATOL):
    """Eigendecomposition of a Hermitian matrix with deterministic output.

    Eigenvalues come back ascending.  Each eigenvector is phase-fixed so
    that its first component with magnitude above 1e-12 is real and
    positive, which makes repeated calls (and cross-platform runs)
    reproducible up to degeneracies.

    Returns:
        (eigenvalues, eigenvectors) with eigenvectors in columns.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    dev = np.abs(a - dagger(a)).max()
    if dev > atol:
        raise ValueError(f"matrix is not Hermitian: max|A - A^dag| = {dev:.3e} > {atol:.0e}")
    w, v = np.linalg.eigh(a)
    for col in range(v.shape[1]):
        vec = v[:, col]
        idx = np.flatnonzero(np.abs(vec) > 1e-12)
        if idx.size:
            lead = vec[idx[0]]
            v[:, col] = vec * (np.conj(lead) / np.abs(lead))
    return w, v


def is_psd(a, atol=PSD_ATOL):
    """Whether a matrix is positive semidefinite (Hermitian + spectrum >= -atol)."""
    a = np.asarray(a)
    if not is_hermitian(a, atol=max(atol, HERMITIAN_ATOL)):
        return False
    return bool(np.linalg.eigvalsh(hermitize(a)).min() >= -atol)


def projector(ket):
    ket = np.asarray(ket, dtype=complex).ravel()
    return np.outer(ket, np.conj(ket))


def orthonormal_complement(ket, atol=1e-10):
    """Deterministic orthonormal basis of the subspace orthogonal to a unit vector.

    Returns an (n, n-1) matrix whose columns span ket-perp, obtained from
    the eigenvectors of I - |ket><ket| with eigenvalue ~1.
    """
    ket = np.asarray(ket, dtype=complex).ravel()
    norm = np.linalg.norm(ket)
    if abs(norm - 1.0) > atol:
        raise ValueError(f"expected a unit vector, got norm {norm!r}")
    n = ket.size
    w, v = hermitian_eig(np.eye(n) - projector(ket))
    cols = v[:, w > 0.5]
    if cols.shape[1] != n - 1:
        raise ValueError(f"complement extraction failed: got {cols.shape[1]} of {n - 1} vectors")
    return cols
