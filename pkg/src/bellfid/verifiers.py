"""Verifier operators for Bell-type targets, assembled from local POVMs.

A verifier stabilizes the target (V |psi> = |psi>) while penalizing states
outside its support, so its expectation value upper- and lower-bounds the
fidelity once combined with spectral or decomposition data.  Three kinds
appear here:

* the computational-basis verifier (a diagonal support projector),
* configuration verifiers reconstructed from joint POVM outcome weights,
* the closed-form pair construction for Bell-type targets, together with
  its diagonal error operator and the information operator V_e + E.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import dagger, hermitize, orthonormal_complement, projector, tensor_product
from .measurements import MeasurementConfig, chi_vector, measurement_config
from .states import bell_normalization, compatible_schmidt, generalized_bell_state

SUPPORT_ATOL = 1e-10


@dataclass(frozen=True)
class DiagonalOperator:
    """Operator diagonal in the product computational basis.

    weights[a, b] multiplies |e_a, e_b><e_a, e_b|; expectation values only
    need the computational-basis statistics table of the same shape.
    """

    weights: np.ndarray

    @property
    def dim(self):
        return self.weights.shape[0]

    @property
    def matrix(self):
        return np.diag(self.weights.astype(complex).ravel())

    def expectation(self, p_table):
        p_table = np.asarray(p_table, dtype=float)
        if p_table.shape != self.weights.shape:
            raise ValueError(f"stats shape {p_table.shape} does not match weights {self.weights.shape}")
        return float(np.sum(self.weights * p_table))


@dataclass(frozen=True)
class Verifier:
    """Configuration verifier: dense matrix plus joint-outcome weights.

    v_table[m_A, m_B] are the weights over the d x d non-remainder POVM
    outcomes, so the expectation is sum(v_table * stats[:d, :d]) for a
    configuration statistics table.
    """

    matrix: np.ndarray
    v_table: np.ndarray
    config: MeasurementConfig

    @property
    def dim(self):
        return self.v_table.shape[0]

    def expectation(self, table):
        table = np.asarray(table, dtype=float)
        d = self.dim
        if table.shape != (d + 1, d + 1):
            raise ValueError(f"expected a ({d + 1}, {d + 1}) configuration table, got {table.shape}")
        return float(np.real(np.sum(self.v_table * table[:d, :d])))


def _as_matrix(op):
    if isinstance(op, (DiagonalOperator, Verifier)):
        return op.matrix
    return np.asarray(op, dtype=complex)


def comp_basis_verifier(psi):
    """Projector onto the product-basis support of the target (diagonal)."""
    psi = np.asarray(psi, dtype=complex).ravel()
    d = round(np.sqrt(psi.size))
    if d * d != psi.size or d < 2:
        raise ValueError(f"target length {psi.size} is not d*d with d >= 2")
    weights = (np.abs(psi) > SUPPORT_ATOL).astype(float).reshape(d, d)
    return DiagonalOperator(weights=weights)


def error_operator(chi_a, chi_b):
    """Diagonal penalty on off-support product states for a chi pair.

    Weight d/N(0) * |chi_A[a] chi_B[b]|^2 on each |e_a, e_b> with a != b;
    zero on the support diagonal, so <psi|E|psi> = 0 for the compatible
    target.  Uniform chi on both sides gives weight 1 on every off-support
    state.
    """
    chi_a = chi_vector(chi_a)
    chi_b = chi_vector(chi_b)
    if chi_a.size != chi_b.size:
        raise ValueError(f"chi dimensions differ: {chi_a.size} vs {chi_b.size}")
    d = chi_a.size
    n0 = bell_normalization(0, chi_a, chi_b)
    weights = (d / n0) * np.outer(np.abs(chi_a) ** 2, np.abs(chi_b) ** 2)
    np.fill_diagonal(weights, 0.0)
    return DiagonalOperator(weights=weights)


def info_operator(psi, error):
    """Information operator V_e + E: support projector plus error penalty.

    `error` is a DiagonalOperator or a raw (d, d) weight table; its weights
    must vanish on the support of psi (so the target is undisturbed) and be
    nonnegative elsewhere.
    """
    support = comp_basis_verifier(psi).weights
    weights = error.weights if isinstance(error, DiagonalOperator) else np.asarray(error, dtype=float)
    if weights.shape != support.shape:
        raise ValueError(f"error weights shape {weights.shape} does not match support {support.shape}")
    if np.abs(weights[support > 0]).max(initial=0.0) > 1e-12:
        raise ValueError("error weights must vanish on the target support")
    if weights.min() < 0:
        raise ValueError(f"error weights must be nonnegative, got min {weights.min()!r}")
    return DiagonalOperator(weights=support + weights)


def bell_verifier(j, chi_a, chi_b):
    """Closed-form verifier for the Bell-type target of a chi pair.

    V_j = d/N(0) * sum_m M_m[A-basis of label j] (x) M_{-m}[B-basis of
    label -j].  Stabilizes the compatible target for every integer j, has
    rank d, and its expectation needs only the anti-diagonal of the
    configuration statistics.
    """
    config = measurement_config(j, chi_a, chi_b)
    d = config.dim
    coeff = d / bell_normalization(0, chi_a, chi_b)
    matrix = np.zeros((d * d, d * d), dtype=complex)
    v_table = np.zeros((d, d))
    for m in range(d):
        mb = (-m) % d
        matrix += tensor_product(config.povm_a[m], config.povm_b[mb])
        v_table[m, mb] = coeff
    return Verifier(matrix=hermitize(coeff * matrix), v_table=v_table, config=config)


def lemma1_verifier(config, psi):
    """Reconstruct a verifier of psi from a measurement configuration.

    Solves for joint-outcome weights v[m_A, m_B] such that
    sum v M_mA (x) M_mB stabilizes psi, using the basis transforms
    T = sum_m |E_m><e_m| of the two sides.  Weights with a vanishing
    denominator <E_mA, E_mB | psi> are set to zero.
    """
    psi = np.asarray(psi, dtype=complex).ravel()
    d = config.dim
    if psi.size != d * d:
        raise ValueError(f"target length {psi.size} does not match configuration dimension {d}")
    t_a = config.basis_a.T
    t_b = config.basis_b.T
    psi_mat = psi.reshape(d, d)
    try:
        num = np.linalg.solve(t_a, psi_mat) @ np.linalg.inv(t_b).T
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"basis transform is singular: {exc}") from None
    den = dagger(t_a) @ psi_mat @ np.conj(t_b)
    keep = np.abs(den) > 1e-12 * np.linalg.norm(den)
    v_table = np.zeros((d, d), dtype=complex)
    v_table[keep] = d * d * num[keep] / den[keep]
    matrix = np.zeros((d * d, d * d), dtype=complex)
    for ma, mb in zip(*np.nonzero(keep)):
        matrix += v_table[ma, mb] * tensor_product(config.povm_a[ma], config.povm_b[mb])
    return Verifier(matrix=hermitize(matrix), v_table=v_table, config=config)


def mix_verifiers(u_e, verifier_e, weights, verifiers):
    """Convex combination u_e V_e + (1 - u_e) sum_j u_j V_j as a dense matrix."""
    if not 0.0 <= u_e <= 1.0:
        raise ValueError(f"u_e must be in [0, 1], got {u_e}")
    weights = np.asarray(weights, dtype=float)
    if weights.size != len(verifiers):
        raise ValueError(f"{weights.size} weights for {len(verifiers)} verifiers")
    if weights.min(initial=0.0) < 0:
        raise ValueError(f"mixing weights must be nonnegative, got {weights}")
    if verifiers and abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError(f"mixing weights must sum to 1, got {weights.sum()!r}")
    mixed = u_e * _as_matrix(verifier_e)
    for u, v in zip(weights, verifiers):
        mixed = mixed + (1.0 - u_e) * u * _as_matrix(v)
    return mixed


@dataclass(frozen=True)
class VerifierDecomposition:
    """Common rank-one decomposition of a mixed verifier and an info operator.

    states[i] is a unit ket |phi_i> (the family need not be orthogonal),
    with V_perp = sum_i lam[i] |phi_i><phi_i| and
    I_perp = sum_i r[i] |phi_i><phi_i|; lam >= 0 and r > 0.
    """

    states: np.ndarray
    lam: np.ndarray
    r: np.ndarray

    def verifier_perp(self):
        return sum(l * projector(v) for l, v in zip(self.lam, self.states))

    def info_perp(self):
        return sum(w * projector(v) for w, v in zip(self.r, self.states))

    def ratios(self):
        return self.lam / self.r


def bell_decomposition(configs, weights, u_e, chi_a, chi_b):
    """Common decomposition of the mixed Bell verifier and its info operator.

    For the target psi of a compatible chi pair, the psi-orthogonal parts of
    u_e V_e + (1-u_e) sum u_j V_j and of I = V_e + E decompose over one
    shared family: (d-1) orthonormal completions of psi inside the support
    subspace (lam = u_e, r = 1) and the generalized Bell states with
    mu >= 1 (r = N(mu)/N(0), lam = (1-u_e) r sum of the u_j whose label
    satisfies mu*j + nu = 0 mod d).
    """
    chi_a = chi_vector(chi_a)
    chi_b = chi_vector(chi_b)
    s = compatible_schmidt(chi_a, chi_b)
    d = s.size
    configs = [int(j) for j in configs]
    if len(set(configs)) != len(configs) or any(not 0 <= j < d for j in configs):
        raise ValueError(f"configs must be distinct labels in [0, {d}), got {configs}")
    weights = np.asarray(weights, dtype=float)
    if weights.size != len(configs) or abs(weights.sum() - 1.0) > 1e-12 or weights.min() < 0:
        raise ValueError("config weights must be nonnegative and sum to 1")
    if not 0.0 <= u_e <= 1.0:
        raise ValueError(f"u_e must be in [0, 1], got {u_e}")

    states, lam, r = [], [], []
    diag_idx = np.arange(d) * d + np.arange(d)
    for col in orthonormal_complement(s.astype(complex)).T:
        ket = np.zeros(d * d, dtype=complex)
        ket[diag_idx] = col
        states.append(ket)
        lam.append(u_e)
        r.append(1.0)
    n0 = bell_normalization(0, chi_a, chi_b)
    for mu in range(1, d):
        n_ratio = bell_normalization(mu, chi_a, chi_b) / n0
        for nu in range(d):
            u_sum = sum(u for u, j in zip(weights, configs) if (mu * j + nu) % d == 0)
            states.append(generalized_bell_state(mu, nu, chi_a, chi_b))
            lam.append((1.0 - u_e) * n_ratio * u_sum)
            r.append(n_ratio)
    return VerifierDecomposition(
        states=np.asarray(states), lam=np.asarray(lam), r=np.asarray(r)
    )


def expectation_from_stats(op, stats):
    """Expectation value of a verifier or diagonal operator from statistics.

    DiagonalOperator expects the (d, d) computational-basis table; Verifier
    expects the (d+1, d+1) configuration table of its own setting.
    """
    if isinstance(op, (DiagonalOperator, Verifier)):
        return op.expectation(stats)
    raise TypeError(f"cannot evaluate {type(op).__name__} from statistics")
