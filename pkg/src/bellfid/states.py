"""Bell-type targets, generalized Bell states, and noisy preparation models.

Bipartite kets live in dimension d*d with the flat index a*d + b for
|e_a, e_b>.  Schmidt coefficient vectors are strictly positive with unit
2-norm; the target state is sum_k s_k |e_k, e_k>.
"""

import numpy as np

from .linalg import projector
from .measurements import chi_vector

SCHMIDT_ATOL = 1e-12


def schmidt_vector(values):
    """Validate Schmidt coefficients: 1-D, strictly positive, sum of squares 1."""
    raw = np.asarray(values)
    if np.iscomplexobj(raw):
        if np.abs(raw.imag).max() > SCHMIDT_ATOL:
            raise ValueError("schmidt coefficients must be real")
        raw = raw.real
    s = np.asarray(raw, dtype=float).ravel()
    if s.size < 2:
        raise ValueError(f"schmidt vector needs at least 2 entries, got {s.size}")
    if s.min() <= 0:
        raise ValueError(f"schmidt coefficients must be positive, got min {s.min()!r}")
    total = np.sum(s**2)
    if abs(total - 1.0) > SCHMIDT_ATOL:
        raise ValueError(f"schmidt coefficients must satisfy sum s_k^2 = 1, got {total!r}")
    return s


def ramp_schmidt(d):
    """Schmidt coefficients proportional to 1, 2, ..., d."""
    s = np.arange(1, d + 1, dtype=float)
    return s / np.linalg.norm(s)


def bell_state(s):
    """The target sum_k s_k |e_k, e_k> as a d^2 ket."""
    s = schmidt_vector(s)
    d = s.size
    psi = np.zeros(d * d, dtype=complex)
    psi[np.arange(d) * d + np.arange(d)] = s
    return psi


def compatible_schmidt(chi_a, chi_b, atol=1e-9):
    """The Schmidt vector a chi pair is adapted to, s_k ~ chi_A[k] chi_B[k].

    Raises if the products carry non-cancelling phases, in which case no
    Bell-type target with positive coefficients matches the pair.
    """
    chi_a = chi_vector(chi_a)
    chi_b = chi_vector(chi_b)
    prod = chi_a * chi_b
    if np.abs(prod.imag).max() > atol or prod.real.min() <= 0:
        raise ValueError("chi pair products must be real and positive to define a target")
    s = prod.real / np.linalg.norm(prod.real)
    return schmidt_vector(s)


def bell_normalization(mu, chi_a, chi_b):
    """N(mu) = sum_k |chi_A[k+mu] chi_B[k]|^2 (index mod d)."""
    chi_a = chi_vector(chi_a)
    chi_b = chi_vector(chi_b)
    d = chi_a.size
    rolled = chi_a[(np.arange(d) + mu) % d]
    return float(np.sum(np.abs(rolled * chi_b) ** 2))


def generalized_bell_state(mu, nu, chi_a, chi_b):
    """Generalized Bell state with shift mu and phase nu for a chi pair.

    |psi_{mu nu}> = N(mu)^{-1/2} sum_k w^{-nu k} chi_A[k+mu] chi_B[k]
    |e_{k+mu}, e_k>.  States with different mu have disjoint supports;
    |psi_00> is the Bell-type target of the compatible Schmidt vector.
    """
    chi_a = chi_vector(chi_a)
    chi_b = chi_vector(chi_b)
    if chi_a.size != chi_b.size:
        raise ValueError(f"chi dimensions differ: {chi_a.size} vs {chi_b.size}")
    d = chi_a.size
    mu, nu = int(mu) % d, int(nu) % d
    k = np.arange(d)
    amp = np.exp(-2j * np.pi * nu * k / d) * chi_a[(k + mu) % d] * chi_b[k]
    psi = np.zeros(d * d, dtype=complex)
    psi[((k + mu) % d) * d + k] = amp
    return psi / np.linalg.norm(psi)


def bell_schmidt(psi, atol=1e-9):
    """Schmidt vector of a Bell-type ket; rejects kets of any other form."""
    psi = np.asarray(psi, dtype=complex).ravel()
    d = int(round(np.sqrt(psi.size)))
    if d * d != psi.size or d < 2:
        raise ValueError(f"ket length {psi.size} is not a square of d >= 2")
    table = psi.reshape(d, d)
    off = table - np.diag(np.diag(table))
    if np.abs(off).max() > atol:
        raise ValueError(f"ket is not Bell-type: off-diagonal amplitude {np.abs(off).max():.3e}")
    amp = np.diag(table)
    if np.abs(amp.imag).max() > atol or amp.real.min() <= 0:
        raise ValueError("ket is not Bell-type: diagonal amplitudes must be real and positive")
    return schmidt_vector(amp.real / np.linalg.norm(amp.real))


def exact_fidelity(rho, psi):
    """Brute-force fidelity <psi| rho |psi> with a pure target."""
    rho = np.asarray(rho, dtype=complex)
    psi = np.asarray(psi, dtype=complex).ravel()
    if rho.shape != (psi.size, psi.size):
        raise ValueError(f"shape mismatch: rho {rho.shape} vs ket of length {psi.size}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"target must be unit norm, got {norm!r}")
    value = np.conj(psi) @ rho @ psi
    if abs(value.imag) > 1e-9:
        raise ValueError(f"fidelity has imaginary part {value.imag:.3e}; rho is not Hermitian")
    return float(value.real)


def white_noise_state(psi, epsilon):
    """(1 - eps) |psi><psi| + eps I / dim."""
    psi = np.asarray(psi, dtype=complex).ravel()
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"target must be unit norm, got {norm!r}")
    dim = psi.size
    return (1.0 - epsilon) * projector(psi) + epsilon * np.eye(dim) / dim


def crosstalk_state(psi, eps_a, eps_b, renormalize=True):
    """Bell-type preparation with nearest-path crosstalk on either side.

    The leading term carries weight 1 - 2d(eps_A + eps_B); each side
    contributes cyclic-shift product projectors |e_{k+-1}, e_k> (side A)
    and |e_k, e_{k+-1}> (side B) with weights eps s_k^2, where s is the
    Schmidt vector of the Bell-type target psi.  As written the operator
    has trace 1 - 2(d-1)(eps_A + eps_B); by default the result is
    renormalized to a unit-trace state, renormalize=False returns the raw
    operator.
    """
    s = bell_schmidt(psi)
    d = s.size
    if eps_a < 0 or eps_b < 0:
        raise ValueError(f"crosstalk weights must be nonnegative, got ({eps_a}, {eps_b})")
    if 2 * d * (eps_a + eps_b) > 1.0 + 1e-12:
        raise ValueError(f"crosstalk too strong: 2d(eps_A+eps_B) = {2 * d * (eps_a + eps_b)!r} > 1")
    rho = (1.0 - 2 * d * (eps_a + eps_b)) * projector(bell_state(s))
    diag = np.zeros((d, d))
    for k in range(d):
        diag[(k + 1) % d, k] += eps_a * s[k] ** 2
        diag[(k - 1) % d, k] += eps_a * s[k] ** 2
        diag[k, (k + 1) % d] += eps_b * s[k] ** 2
        diag[k, (k - 1) % d] += eps_b * s[k] ** 2
    rho[np.arange(d * d), np.arange(d * d)] += diag.ravel()
    if renormalize:
        rho /= np.real(np.trace(rho))
    return rho


def check_density_matrix(rho, atol_trace=1e-12, atol_herm=1e-12, atol_psd=1e-10):
    """Raise ValueError unless rho is a valid density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {rho.shape}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > atol_trace:
        raise ValueError(f"trace must be 1, got {tr!r}")
    herm = np.abs(rho - np.conj(rho).T).max()
    if herm > atol_herm:
        raise ValueError(f"not Hermitian: max deviation {herm:.3e}")
    low = np.linalg.eigvalsh((rho + np.conj(rho).T) / 2).min()
    if low < -atol_psd:
        raise ValueError(f"not PSD: min eigenvalue {low:.3e}")
    return rho
