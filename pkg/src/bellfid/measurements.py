"""Local qudit measurements: chi-weighted clock/shift bases, POVMs, statistics.

A measurement coefficient vector ("chi") is a unit-norm complex vector with
no zero entries.  It deforms the usual clock/shift pair into operators whose
eigenbases are non-orthogonal for non-uniform chi; the induced POVM keeps a
(d+1)-th remainder outcome so that the elements always sum to the identity.

Operator labels: the basis label j enters the defining exponents *literally*
(as a signed integer).  For even d the constructions are only periodic in
j mod 2d, so callers that need "minus j" must pass -j, not (d - j) % d.
The outcome label m only ever appears as w^(-m k) and is effectively mod d.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import dagger, hermitize

CHI_ATOL = 1e-12
POVM_PSD_ATOL = 1e-10


def chi_vector(values):
    """Validate measurement coefficients: 1-D, unit norm, every entry nonzero."""
    chi = np.asarray(values, dtype=complex).ravel()
    if chi.size < 2:
        raise ValueError(f"chi vector needs at least 2 entries, got {chi.size}")
    norm = np.linalg.norm(chi)
    if abs(norm - 1.0) > CHI_ATOL:
        raise ValueError(f"chi vector must have unit norm, got {norm!r}")
    small = np.abs(chi).min()
    if small <= CHI_ATOL:
        raise ValueError(f"chi vector entries must be nonzero, min |chi_k| = {small:.3e}")
    return chi


def _w(d, exponent):
    """Fractional power of the d-th root of unity, w^x = exp(i 2 pi x / d)."""
    return np.exp(2j * np.pi * np.asarray(exponent, dtype=float) / d)


def clock_op(d):
    """diag(w^k), the clock operator."""
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    return np.diag(_w(d, np.arange(d)))


def shift_op(chi):
    """chi-weighted cyclic shift, sum_k (chi_{k+1}/chi_k) |e_{k+1}><e_k|."""
    chi = chi_vector(chi)
    d = chi.size
    x = np.zeros((d, d), dtype=complex)
    for k in range(d):
        x[(k + 1) % d, k] = chi[(k + 1) % d] / chi[k]
    return x


def hw_op(i, j, chi):
    """Weyl-type operator w^{-(i j / 2)(d-1)} X(chi)^i Z^j with literal integer labels."""
    chi = chi_vector(chi)
    d = chi.size
    zj = np.diag(_w(d, j * np.arange(d)))
    xi = np.linalg.matrix_power(shift_op(chi), i) if i != 0 else np.eye(d, dtype=complex)
    return _w(d, -(i * j * (d - 1)) / 2) * (xi @ zj)


def hw_eigenbasis_state(m, j, chi):
    """Eigenstate |E_m(j)> of hw_op(1, j, chi) with eigenvalue w^m.

    Components are w^{-(m + j d/2) k + j k^2 / 2} chi_k, evaluated with j as
    a literal signed integer (see module docstring).  Unit norm for any
    valid chi; the states for different m are non-orthogonal unless chi is
    uniform.
    """
    chi = chi_vector(chi)
    d = chi.size
    k = np.arange(d)
    return _w(d, -(m + j * d / 2) * k + j * k * k / 2) * chi


def hw_eigenbasis(j, chi):
    """All d eigenbasis states of label j stacked as rows (m, k)."""
    chi = chi_vector(chi)
    return np.stack([hw_eigenbasis_state(m, j, chi) for m in range(chi.size)])


def povm_from_basis(states):
    """POVM with elements |E_m><E_m|/d plus the remainder I - sum.

    Args:
        states: (d, d) array, row m holding the unit-norm state |E_m>.

    Returns:
        (d+1, d, d) array; the last element is the remainder outcome (kept
        even when it is numerically zero, e.g. for uniform chi).
    """
    states = np.asarray(states, dtype=complex)
    if states.ndim != 2 or states.shape[0] != states.shape[1]:
        raise ValueError(f"expected d unit-norm states of dimension d, got shape {states.shape}")
    d = states.shape[0]
    norms = np.linalg.norm(states, axis=1)
    if np.abs(norms - 1.0).max() > 1e-12:
        raise ValueError(f"basis states must be unit norm, got norms {norms}")
    elements = np.empty((d + 1, d, d), dtype=complex)
    for m in range(d):
        elements[m] = np.outer(states[m], np.conj(states[m])) / d
    elements[d] = np.eye(d) - elements[:d].sum(axis=0)
    elements[d] = hermitize(elements[d])
    low = np.linalg.eigvalsh(elements[d]).min()
    if low < -POVM_PSD_ATOL:
        raise ValueError(f"remainder POVM element is not PSD: min eigenvalue {low:.3e}")
    return elements


@dataclass(frozen=True)
class MeasurementConfig:
    """One two-side measurement setting of label j.

    Side A measures in the chi_A-weighted basis of label j, side B in the
    chi_B-weighted basis of label -j (literal).  povm_a/povm_b include the
    remainder outcome as element d.
    """

    j: int
    chi_a: np.ndarray
    chi_b: np.ndarray
    basis_a: np.ndarray
    basis_b: np.ndarray
    povm_a: np.ndarray
    povm_b: np.ndarray

    @property
    def dim(self):
        return self.chi_a.size


def measurement_config(j, chi_a, chi_b):
    """Build the two-side setting (j on A, -j on B) for a chi pair."""
    chi_a = chi_vector(chi_a)
    chi_b = chi_vector(chi_b)
    if chi_a.size != chi_b.size:
        raise ValueError(f"chi dimensions differ: {chi_a.size} vs {chi_b.size}")
    basis_a = hw_eigenbasis(j, chi_a)
    basis_b = hw_eigenbasis(-j, chi_b)
    return MeasurementConfig(
        j=int(j),
        chi_a=chi_a,
        chi_b=chi_b,
        basis_a=basis_a,
        basis_b=basis_b,
        povm_a=povm_from_basis(basis_a),
        povm_b=povm_from_basis(basis_b),
    )


def _bipartite_dim(rho):
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"expected a square density matrix, got shape {rho.shape}")
    d = round(np.sqrt(rho.shape[0]))
    if d * d != rho.shape[0] or d < 2:
        raise ValueError(f"matrix dimension {rho.shape[0]} is not d*d with d >= 2")
    return rho, d


def comp_basis_stats(rho):
    """P_e table: p(k_A, k_B) = <e_kA e_kB| rho |e_kA e_kB>, shape (d, d)."""
    rho, d = _bipartite_dim(rho)
    return np.real(np.diag(rho)).reshape(d, d).copy()


def config_stats(rho, config):
    """Joint outcome table of a measurement configuration, shape (d+1, d+1).

    Entry (m_A, m_B) is tr[rho (M_mA otimes M_mB)]; the last row/column hold
    the remainder outcome and are retained even when numerically zero.
    """
    rho, d = _bipartite_dim(rho)
    if config.dim != d:
        raise ValueError(f"config dimension {config.dim} does not match state dimension {d}")
    rho4 = rho.reshape(d, d, d, d)
    table = np.einsum("abcd,mca,ndb->mn", rho4, config.povm_a, config.povm_b)
    return np.real(table)


def sample_stats(table, shots, seed=None):
    """Multinomial finite-shot frequencies for an exact outcome table.

    Deterministic for a fixed seed; the result has the same shape as the
    input and sums to 1.
    """
    table = np.asarray(table, dtype=float)
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    if table.min() < -1e-9:
        raise ValueError(f"outcome table has negative entry {table.min():.3e}")
    total = table.sum()
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"outcome table must sum to 1, got {total!r}")
    p = np.clip(table, 0.0, None).ravel()
    p /= p.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(int(shots), p)
    return (counts / shots).reshape(table.shape)
