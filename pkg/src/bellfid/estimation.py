"""Fidelity bound estimators and measurement-coefficient adaptation.

Three bound routes, kept deliberately separate:

* nonadaptive: spectral gap of a fixed mixed verifier (no use of the
  computational-basis statistics beyond the expectation value),
* lemma2: ratio coefficients alpha/beta of a common decomposition of the
  verifier and an information operator,
* theorem1: the closed-form subclass bound for Bell-type targets, which is
  what the command-line harness reports by default.

The chi optimizer adapts the measurement coefficients to the observed
computational-basis table; every strategy returns a pair compatible with
the target Schmidt vector (chi_B is slaved to chi_A through s).
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .linalg import dagger, hermitize, hermitian_eig, orthonormal_complement
from .measurements import chi_vector, comp_basis_stats, config_stats, measurement_config, sample_stats
from .states import bell_state, compatible_schmidt, schmidt_vector
from .verifiers import (
    DiagonalOperator,
    _as_matrix,
    bell_verifier,
    comp_basis_verifier,
    error_operator,
    info_operator,
    mix_verifiers,
)

DEGENERATE_ATOL = 1e-9

CHI_HINTS = ("general", "symmetric", "crosstalk", "one_side_A", "one_side_B")


@dataclass(frozen=True)
class SpectralBounds:
    """Extreme eigenvalues of a verifier on the target-orthogonal subspace."""

    lambda_min: float
    lambda_max: float
    phi_min: np.ndarray
    phi_max: np.ndarray


@dataclass(frozen=True)
class BoundCoefficients:
    """Ratio coefficients of a common decomposition: alpha = max, beta = min."""

    alpha: float
    beta: float


@dataclass(frozen=True)
class SubclassPartition:
    """Measurement labels grouped by residue mod the smallest prime divisor."""

    p1: int
    classes: tuple

    @property
    def nonempty(self):
        return tuple(c for c in self.classes if c)

    @property
    def n_classes(self):
        return len(self.nonempty)

    def selections(self):
        """All subsets with exactly one label from each nonempty class, sorted."""
        return sorted(itertools.product(*self.nonempty))


@dataclass(frozen=True)
class FidelityBounds:
    lower: float
    upper: float
    exact: float | None = None
    method: str = ""
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BoundsReport:
    """Everything a single adaptive estimation run produced."""

    dim: int
    configs: tuple
    schmidt: np.ndarray
    chi_a: np.ndarray
    chi_b: np.ndarray
    expectations: dict
    bounds: dict
    m_tilde: tuple | None


def smallest_prime_divisor(d):
    if d < 2:
        raise ValueError(f"need d >= 2, got {d}")
    p = 2
    while p * p <= d:
        if d % p == 0:
            return p
        p += 1
    return d


def subclass_partition(configs, d):
    """Group configuration labels into residue classes mod p1."""
    configs = sorted(int(j) for j in configs)
    if len(set(configs)) != len(configs):
        raise ValueError(f"configuration labels must be distinct, got {configs}")
    if not configs:
        raise ValueError("need at least one configuration label")
    if configs[0] < 0 or configs[-1] >= d:
        raise ValueError(f"configuration labels must lie in [0, {d}), got {configs}")
    p1 = smallest_prime_divisor(d)
    classes = tuple(tuple(j for j in configs if j % p1 == i) for i in range(p1))
    return SubclassPartition(p1=p1, classes=classes)


def spectral_bounds(verifier, psi):
    """Extreme eigenvalues of V - |psi><psi| restricted to the psi-orthogonal subspace."""
    v = _as_matrix(verifier)
    psi = np.asarray(psi, dtype=complex).ravel()
    q = orthonormal_complement(psi)
    w, vec = hermitian_eig(hermitize(dagger(q) @ v @ q))
    return SpectralBounds(
        lambda_min=float(w[0]),
        lambda_max=float(w[-1]),
        phi_min=q @ vec[:, 0],
        phi_max=q @ vec[:, -1],
    )


def nonadaptive_bounds(verifier, psi, expectation):
    """Fidelity bounds from the spectral gap of a fixed verifier.

    lower = (<V> - lambda_max) / (1 - lambda_max), and the analogous upper
    bound with lambda_min.  Both are tight on mixtures of psi with the
    corresponding extremal eigenstate.
    """
    sb = spectral_bounds(verifier, psi)
    if sb.lambda_max >= 1.0 - DEGENERATE_ATOL:
        raise ValueError(
            f"verifier cannot separate the target: lambda_max = {sb.lambda_max!r} on psi-perp"
        )
    lower = (expectation - sb.lambda_max) / (1.0 - sb.lambda_max)
    upper = (expectation - sb.lambda_min) / (1.0 - sb.lambda_min)
    return FidelityBounds(
        lower=float(lower),
        upper=float(upper),
        method="nonadaptive",
        details={"lambda_min": sb.lambda_min, "lambda_max": sb.lambda_max, "expectation": expectation},
    )


def alpha_beta(decomposition):
    """Bound coefficients of a VerifierDecomposition (max and min ratio)."""
    ratios = decomposition.ratios()
    return BoundCoefficients(alpha=float(ratios.max()), beta=float(ratios.min()))


def lemma2_bounds(verifier_expectation, info_expectation, coefficients):
    """Fidelity bounds from decomposition ratios against an info operator.

    lower = (<V> - alpha <I>) / (1 - alpha) and upper analogously with
    beta.  With the trivial info operator (identity, <I> = 1) this recovers
    the spectral-gap bounds exactly.
    """
    a, b = coefficients.alpha, coefficients.beta
    if b > a:
        raise ValueError(f"alpha must dominate beta, got alpha={a}, beta={b}")
    if a >= 1.0 - 1e-12:
        raise ValueError(f"degenerate decomposition: alpha = {a!r}")
    lower = (verifier_expectation - a * info_expectation) / (1.0 - a)
    upper = (verifier_expectation - b * info_expectation) / (1.0 - b)
    return FidelityBounds(
        lower=float(lower),
        upper=float(upper),
        method="lemma2",
        details={"alpha": a, "beta": b, "info_expectation": info_expectation},
    )


def theorem1_from_expectations(v_e, v_j, e_op, d):
    """Subclass bounds from precomputed expectation values.

    v_j maps configuration labels to <V_j>.  The lower bound maximizes the
    subclass average minus <E>/n over all one-per-class selections (ties
    broken lexicographically); the upper bound is the smallest single
    verifier expectation.  For prime d with all d configurations present
    the two meet at the exact fidelity (1/d)(sum <V_j> - <E>).
    """
    labels = sorted(v_j)
    part = subclass_partition(labels, d)
    n = part.n_classes
    best, best_sel = -np.inf, None
    for sel in part.selections():
        val = sum(v_j[j] for j in sel) / n - e_op / n
        if val > best:
            best, best_sel = val, sel
    upper = min(v_e, min(v_j.values()))
    exact = None
    if part.p1 == d and len(labels) == d:
        exact = (sum(v_j.values()) - e_op) / d
        best = upper = exact
    return FidelityBounds(
        lower=float(best),
        upper=float(upper),
        exact=exact,
        method="theorem1",
        details={"m_tilde": best_sel, "n_classes": n, "v_e": v_e, "e_op": e_op},
    )


def theorem1_bounds(p_e, config_tables, chi_a, chi_b):
    """Subclass bounds straight from measurement statistics.

    Args:
        p_e: computational-basis table, shape (d, d).
        config_tables: dict mapping label j to its (d+1, d+1) outcome table.
        chi_a, chi_b: the measurement coefficient pair that was used.
    """
    p_e = np.asarray(p_e, dtype=float)
    d = p_e.shape[0]
    chi_a = chi_vector(chi_a)
    chi_b = chi_vector(chi_b)
    v_e = float(np.trace(p_e))
    e_op = error_operator(chi_a, chi_b).expectation(p_e)
    v_j = {}
    for j, table in config_tables.items():
        table = np.asarray(table, dtype=float)
        if table.shape != (d + 1, d + 1):
            raise ValueError(f"config {j}: expected shape {(d + 1, d + 1)}, got {table.shape}")
        coeff = d / float(np.sum(np.abs(chi_a * chi_b) ** 2))
        v_j[int(j)] = coeff * float(sum(table[m, (-m) % d] for m in range(d)))
    return theorem1_from_expectations(v_e, v_j, e_op, d)


def schmidt_from_stats(p_e):
    """Schmidt coefficients of the closest Bell-type target, from P_e."""
    p_e = np.asarray(p_e, dtype=float)
    diag = np.diag(p_e)
    if diag.min() <= 0:
        raise ValueError(f"P_e diagonal must be positive to adapt, got min {diag.min()!r}")
    return schmidt_vector(np.sqrt(diag / diag.sum()))


def _slaved_pair(chi_a, s):
    """Normalize chi_A and slave chi_B = s / chi_A so the pair matches s."""
    chi_a = np.asarray(chi_a, dtype=complex)
    chi_a = chi_vector(chi_a / np.linalg.norm(chi_a))
    chi_b = s / chi_a
    chi_b = chi_vector(chi_b / np.linalg.norm(chi_b))
    target = compatible_schmidt(chi_a, chi_b)
    if np.abs(target - s).max() > 1e-9:
        raise ValueError("internal: slaved pair does not reproduce the target coefficients")
    return chi_a, chi_b


def _error_objective(t, s, p_e):
    """<E> for |chi_A|^2 = t (up to scale) with chi_B slaved through s."""
    ratio = np.outer(t, 1.0 / t)
    cross = ratio * (s**2)[None, :] * p_e
    np.fill_diagonal(cross, 0.0)
    return float(t.size * cross.sum())


def _descend_error(t, s, p_e, iters=500, tol=1e-12):
    """Cyclic coordinate descent on the slaved <E>; exact single-coordinate updates."""
    t = t / t.sum()
    d = t.size
    off = p_e - np.diag(np.diag(p_e))
    value = _error_objective(t, s, p_e)
    for _ in range(iters):
        for k in range(d):
            a_k = np.dot(s**2 * off[k, :], 1.0 / t)
            b_k = s[k] ** 2 * np.dot(t, off[:, k])
            if a_k <= 1e-300 or b_k <= 1e-300:
                continue
            t[k] = np.sqrt(b_k / a_k)
        t = t / t.sum()
        new = _error_objective(t, s, p_e)
        if value - new < tol:
            value = new
            break
        value = new
    return t, value


def optimize_chi(p_e, s, hint="general"):
    """Measurement coefficients adapted to the computational-basis table.

    Hints:
        symmetric   closed form sqrt(s_k / sum s) on both sides
        crosstalk   fourth-root product formula over neighboring-path
                    transition ratios (falls back to `general` when a
                    required ratio is one-sidedly zero)
        one_side_A  sqrt(p(k,k)/sum) on A, uniform-slaved B
        one_side_B  mirror image
        general     numerical minimization of <E> over slaved pairs
                    (never worse than the uniform-chi_A baseline)

    Every hint returns a pair compatible with s.  Paths that read the P_e
    diagonal reject tables with a vanishing diagonal entry.
    """
    p_e = np.asarray(p_e, dtype=float)
    s = schmidt_vector(s)
    d = s.size
    if p_e.shape != (d, d):
        raise ValueError(f"P_e shape {p_e.shape} does not match dimension {d}")
    if p_e.min() < -1e-9:
        raise ValueError(f"P_e has negative entry {p_e.min():.3e}")
    p_e = np.clip(p_e, 0.0, None)
    if hint not in CHI_HINTS:
        raise ValueError(f"unknown hint {hint!r}, expected one of {CHI_HINTS}")

    diag = np.diag(p_e)
    if hint == "symmetric":
        return _slaved_pair(np.sqrt(s / s.sum()), s)
    if hint == "one_side_A":
        if diag.min() <= 0:
            raise ValueError("one_side_A needs a strictly positive P_e diagonal")
        return _slaved_pair(np.sqrt(diag / diag.sum()), s)
    if hint == "one_side_B":
        if diag.min() <= 0:
            raise ValueError("one_side_B needs a strictly positive P_e diagonal")
        chi_b = np.sqrt(diag / diag.sum())
        chi_b = chi_vector(chi_b / np.linalg.norm(chi_b))
        chi_a = s / chi_b
        chi_a, chi_b2 = _slaved_pair(chi_a, s)
        return chi_a, chi_b2
    if hint == "crosstalk":
        if diag.min() <= 0:
            raise ValueError("crosstalk adaptation needs a strictly positive P_e diagonal")
        ratios = np.ones(d)
        tiny = 1e-15
        for k in range(d - 1):
            up, dn = p_e[k, k + 1], p_e[k + 1, k]
            if up <= tiny and dn <= tiny:
                ratios[k + 1] = ratios[k]
            elif up <= tiny or dn <= tiny:
                return optimize_chi(p_e, s, hint="general")
            else:
                ratios[k + 1] = ratios[k] * up / dn
        return _slaved_pair((diag * ratios) ** 0.25, s)

    # general: coordinate descent from the symmetric point, then take the
    # best of the descent result, the symmetric point, and the uniform pair.
    candidates = [np.full(d, 1.0 / d), s / s.sum()]
    t_opt, _ = _descend_error((s / s.sum()).copy(), s, p_e)
    candidates.append(t_opt)
    best = min(candidates, key=lambda t: _error_objective(t, s, p_e))
    return _slaved_pair(np.sqrt(best), s)


def chi_condition_check(chi_a, chi_b, p_e, s, tiny=1e-15):
    """Per-pair residuals of the stationarity conditions for a chi pair.

    For each unordered pair (k, k') the optimum requires
    |chi_A[k']|^2 / |chi_A[k]|^2 = sqrt(p(k,k')/p(k',k)) s_{k'}/s_k and the
    mirrored condition on side B.  Returns one record per pair with both
    relative residuals; pairs with a vanishing transition probability are
    flagged as skipped (the conditions cannot be evaluated there, and in
    general cannot all be fulfilled simultaneously).
    """
    chi_a = chi_vector(chi_a)
    chi_b = chi_vector(chi_b)
    s = schmidt_vector(s)
    p_e = np.asarray(p_e, dtype=float)
    d = s.size
    records = []
    ta, tb = np.abs(chi_a) ** 2, np.abs(chi_b) ** 2
    for k in range(d):
        for kp in range(k + 1, d):
            if p_e[k, kp] <= tiny or p_e[kp, k] <= tiny:
                records.append({"pair": (k, kp), "residual_a": np.nan, "residual_b": np.nan, "skipped": True})
                continue
            rhs_a = np.sqrt(p_e[k, kp] / p_e[kp, k]) * s[kp] / s[k]
            rhs_b = np.sqrt(p_e[kp, k] / p_e[k, kp]) * s[kp] / s[k]
            lhs_a = ta[kp] / ta[k]
            lhs_b = tb[kp] / tb[k]
            records.append(
                {
                    "pair": (k, kp),
                    "residual_a": abs(lhs_a - rhs_a) / max(lhs_a, rhs_a),
                    "residual_b": abs(lhs_b - rhs_b) / max(lhs_b, rhs_b),
                    "skipped": False,
                }
            )
    return records


ESTIMATORS = ("theorem1", "nonadaptive", "lemma2_trivial")

STRATEGY_HINTS = {
    "symmetric": "symmetric",
    "crosstalk_opt": "crosstalk",
    "one_side_A": "one_side_A",
    "one_side_B": "one_side_B",
    "general": "general",
}


def adaptive_estimate(
    rho,
    configs,
    chi_strategy="general",
    schmidt=None,
    shots=None,
    seed=None,
    estimators=("theorem1",),
):
    """Full pipeline: statistics -> adapted chi -> verifier expectations -> bounds.

    The computational-basis table is measured first; the Schmidt vector is
    taken from it when `schmidt` is None (otherwise the given target is
    kept).  With `shots` set, every table is resampled multinomially
    (per-configuration seeds are seed + j + 1).  Returns a BoundsReport
    with one FidelityBounds per requested estimator.
    """
    rho = np.asarray(rho, dtype=complex)
    for name in estimators:
        if name not in ESTIMATORS:
            raise ValueError(f"unknown estimator {name!r}, expected subset of {ESTIMATORS}")
    p_e = comp_basis_stats(rho)
    d = p_e.shape[0]
    configs = sorted(int(j) for j in configs)
    if not configs or len(set(configs)) != len(configs) or configs[0] < 0 or configs[-1] >= d:
        raise ValueError(f"configs must be distinct labels in [0, {d}), got {configs}")
    if shots is not None:
        p_e = sample_stats(p_e, shots, seed)
    s = schmidt_from_stats(p_e) if schmidt is None else schmidt_vector(schmidt)

    if chi_strategy == "uniform":
        chi_a, chi_b = _slaved_pair(np.full(d, 1.0 / np.sqrt(d)), s)
    elif chi_strategy in STRATEGY_HINTS:
        chi_a, chi_b = optimize_chi(p_e, s, hint=STRATEGY_HINTS[chi_strategy])
    else:
        raise ValueError(
            f"unknown chi strategy {chi_strategy!r}, expected one of "
            f"{('uniform',) + tuple(STRATEGY_HINTS)}"
        )

    tables = {}
    for j in configs:
        cfg = measurement_config(j, chi_a, chi_b)
        table = config_stats(rho, cfg)
        if shots is not None:
            table = sample_stats(table, shots, None if seed is None else seed + j + 1)
        tables[j] = table

    t1 = theorem1_bounds(p_e, tables, chi_a, chi_b)
    expectations = {
        "v_e": t1.details["v_e"],
        "e_op": t1.details["e_op"],
        "info": t1.details["v_e"] + t1.details["e_op"],
        "v_j": {j: None for j in configs},
    }
    coeff = d / float(np.sum(np.abs(chi_a * chi_b) ** 2))
    for j in configs:
        expectations["v_j"][j] = coeff * float(sum(tables[j][m, (-m) % d] for m in range(d)))

    bounds = {}
    if "theorem1" in estimators:
        bounds["theorem1"] = t1
    if "nonadaptive" in estimators or "lemma2_trivial" in estimators:
        psi = bell_state(s)
        v_e_op = comp_basis_verifier(psi)
        v_ops = [bell_verifier(j, chi_a, chi_b) for j in configs]
        n = len(configs)
        u_e = 1.0 / (n + 1)
        mixed = mix_verifiers(u_e, v_e_op, np.full(n, 1.0 / n), v_ops)
        v_psi_expect = u_e * expectations["v_e"] + sum(
            (1.0 - u_e) / n * expectations["v_j"][j] for j in configs
        )
        if "nonadaptive" in estimators:
            bounds["nonadaptive"] = nonadaptive_bounds(mixed, psi, v_psi_expect)
        if "lemma2_trivial" in estimators:
            sb = spectral_bounds(mixed, psi)
            trivial = info_operator(psi, np.ones((d, d)) - comp_basis_verifier(psi).weights)
            info_expect = trivial.expectation(p_e)
            coeffs = BoundCoefficients(alpha=sb.lambda_max, beta=sb.lambda_min)
            bounds["lemma2_trivial"] = lemma2_bounds(v_psi_expect, info_expect, coeffs)

    return BoundsReport(
        dim=d,
        configs=tuple(configs),
        schmidt=s,
        chi_a=chi_a,
        chi_b=chi_b,
        expectations=expectations,
        bounds=bounds,
        m_tilde=t1.details.get("m_tilde"),
    )
