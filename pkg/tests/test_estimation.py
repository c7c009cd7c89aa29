import numpy as np
import pytest

import bellfid
from bellfid.estimation import (
    BoundCoefficients,
    _slaved_pair,
    alpha_beta,
    lemma2_bounds,
    nonadaptive_bounds,
    smallest_prime_divisor,
    spectral_bounds,
    subclass_partition,
    theorem1_from_expectations,
)
from bellfid.measurements import comp_basis_stats, config_stats, measurement_config
from bellfid.verifiers import bell_decomposition


def _slaved(rng, d):
    s = rng.uniform(0.25, 1.0, d)
    s = s / np.linalg.norm(s)
    chi_a = rng.uniform(0.3, 1.0, d) * np.exp(2j * np.pi * rng.random(d))
    chi_a = chi_a / np.linalg.norm(chi_a)
    chi_b = s / chi_a
    return s, chi_a, chi_b / np.linalg.norm(chi_b)


def _pipeline_expectations(rho, configs, chi_a, chi_b):
    p_e = comp_basis_stats(rho)
    d = p_e.shape[0]
    tables = {j: config_stats(rho, measurement_config(j, chi_a, chi_b)) for j in configs}
    v_e = float(np.trace(p_e))
    e_op = bellfid.error_operator(chi_a, chi_b).expectation(p_e)
    coeff = d / np.sum(np.abs(chi_a * chi_b) ** 2)
    v_j = {j: coeff * float(sum(tables[j][m, (-m) % d] for m in range(d))) for j in configs}
    return v_e, v_j, e_op


def test_smallest_prime_divisor():
    assert smallest_prime_divisor(2) == 2
    assert smallest_prime_divisor(9) == 3
    assert smallest_prime_divisor(7) == 7
    assert smallest_prime_divisor(35) == 5
    with pytest.raises(ValueError):
        smallest_prime_divisor(1)


def test_subclass_partition():
    part = subclass_partition(range(9), 9)
    assert part.p1 == 3
    assert part.classes == ((0, 3, 6), (1, 4, 7), (2, 5, 8))
    assert len(part.selections()) == 27
    assert part.selections()[0] == (0, 1, 2)

    part = subclass_partition([0, 1], 9)
    assert part.nonempty == ((0,), (1,))
    assert part.selections() == [(0, 1)]

    assert subclass_partition([4], 7).n_classes == 1
    with pytest.raises(ValueError):
        subclass_partition([0, 0], 5)
    with pytest.raises(ValueError):
        subclass_partition([5], 5)
    with pytest.raises(ValueError):
        subclass_partition([], 5)


def test_spectral_bounds_single_verifier():
    rng = np.random.default_rng(40)
    d = 3
    s, chi_a, chi_b = _slaved(rng, d)
    psi = bellfid.bell_state(s)
    v = bellfid.bell_verifier(0, chi_a, chi_b)
    sb = spectral_bounds(v, psi)
    # eigenvalues on psi-perp are the N(mu)/N(0) ratios of matched states plus zeros
    from bellfid.states import bell_normalization

    n0 = bell_normalization(0, chi_a, chi_b)
    ratios = [bell_normalization(mu, chi_a, chi_b) / n0 for mu in (1, 2)]
    assert abs(sb.lambda_max - max(ratios)) < 1e-9
    assert abs(sb.lambda_min - 0.0) < 1e-9


def test_nonadaptive_bounds_tight_on_extremal_mixture():
    # symmetric pairs keep every N(mu)/N(0) <= 1, so the mixed verifier
    # always separates the target
    rng = np.random.default_rng(41)
    for d in (2, 3, 5):
        s = rng.uniform(0.25, 1.0, d)
        s = s / np.linalg.norm(s)
        chi_a = chi_b = np.sqrt(s / s.sum())
        psi = bellfid.bell_state(s)
        configs = list(range(d))
        n = len(configs)
        mixed = bellfid.mix_verifiers(
            1.0 / (n + 1),
            bellfid.comp_basis_verifier(psi),
            np.full(n, 1.0 / n),
            [bellfid.bell_verifier(j, chi_a, chi_b) for j in configs],
        )
        sb = spectral_bounds(mixed, psi)
        p = 0.3
        rho = (1 - p) * np.outer(psi, psi.conj()) + p * np.outer(sb.phi_max, sb.phi_max.conj())
        expectation = np.real(np.trace(mixed @ rho))
        bounds = nonadaptive_bounds(mixed, psi, expectation)
        fid = bellfid.exact_fidelity(rho, psi)
        assert abs(bounds.lower - fid) < 1e-9
        assert bounds.upper >= fid - 1e-9


def test_nonadaptive_rejects_degenerate():
    d = 3
    chi = np.full(d, 1 / np.sqrt(d))
    psi = bellfid.bell_state(np.full(d, 1 / np.sqrt(d)))
    v = bellfid.bell_verifier(0, chi, chi)  # N(mu)=N(0): lambda_max = 1
    with pytest.raises(ValueError):
        nonadaptive_bounds(v, psi, 0.9)


def test_lemma2_bounds_formulas():
    b = lemma2_bounds(0.9, 1.0, BoundCoefficients(alpha=0.5, beta=0.0))
    assert abs(b.lower - (0.9 - 0.5) / 0.5) < 1e-12
    assert abs(b.upper - 0.9) < 1e-12
    with pytest.raises(ValueError):
        lemma2_bounds(0.9, 1.0, BoundCoefficients(alpha=0.2, beta=0.5))
    with pytest.raises(ValueError):
        lemma2_bounds(0.9, 1.0, BoundCoefficients(alpha=1.0, beta=0.0))


def test_lemma2_trivial_equals_nonadaptive():
    rng = np.random.default_rng(42)
    for _ in range(10):
        d = int(rng.integers(2, 6))
        s = rng.uniform(0.25, 1.0, d)
        s = s / np.linalg.norm(s)
        chi_a = chi_b = np.sqrt(s / s.sum())
        psi = bellfid.bell_state(s)
        n = int(rng.integers(1, d + 1))
        configs = sorted(rng.choice(d, size=n, replace=False).tolist())
        mixed = bellfid.mix_verifiers(
            1.0 / (n + 1),
            bellfid.comp_basis_verifier(psi),
            np.full(n, 1.0 / n),
            [bellfid.bell_verifier(j, chi_a, chi_b) for j in configs],
        )
        rho = bellfid.white_noise_state(psi, float(rng.uniform(0, 1)))
        expectation = np.real(np.trace(mixed @ rho))
        sb = spectral_bounds(mixed, psi)
        na = nonadaptive_bounds(mixed, psi, expectation)
        l2 = lemma2_bounds(expectation, 1.0, BoundCoefficients(alpha=sb.lambda_max, beta=sb.lambda_min))
        assert abs(na.lower - l2.lower) < 1e-9
        assert abs(na.upper - l2.upper) < 1e-9


def test_theorem1_from_expectations():
    # two residue classes: selections pair one even with one odd label
    v_j = {0: 0.9, 1: 0.8, 2: 0.7, 3: 0.95}
    b = theorem1_from_expectations(0.97, v_j, 0.1, 4)
    # best selection is (0, 3): (0.9 + 0.95)/2 - 0.1/2
    assert abs(b.lower - ((0.9 + 0.95) / 2 - 0.05)) < 1e-12
    assert b.details["m_tilde"] == (0, 3)
    assert abs(b.upper - 0.7) < 1e-12
    assert b.exact is None


def test_theorem1_tie_break_lexicographic():
    v_j = {j: 0.9 for j in range(9)}
    b = theorem1_from_expectations(0.95, v_j, 0.05, 9)
    assert b.details["m_tilde"] == (0, 1, 2)


def test_theorem1_prime_full_exact():
    rng = np.random.default_rng(43)
    for d in (2, 3, 5, 7):
        s, chi_a, chi_b = _slaved(rng, d)
        psi = bellfid.bell_state(s)
        rho = bellfid.white_noise_state(psi, 0.4)
        v_e, v_j, e_op = _pipeline_expectations(rho, range(d), chi_a, chi_b)
        b = theorem1_from_expectations(v_e, v_j, e_op, d)
        fid = bellfid.exact_fidelity(rho, psi)
        assert b.exact is not None
        assert abs(b.exact - fid) < 1e-9
        assert abs(b.lower - b.upper) < 1e-12


def test_theorem1_matches_selection_decomposition_bounds():
    # the subclass closed form equals the best decomposition-ratio bound
    # over one-per-class selections with uniform weights
    rng = np.random.default_rng(44)
    for d, eps in [(4, 0.3), (6, 0.2), (9, 0.5)]:
        s, chi_a, chi_b = _slaved(rng, d)
        psi = bellfid.bell_state(s)
        rho = bellfid.white_noise_state(psi, eps)
        labels = sorted(rng.choice(d, size=int(rng.integers(2, d + 1)), replace=False).tolist())
        v_e, v_j, e_op = _pipeline_expectations(rho, labels, chi_a, chi_b)
        t1 = theorem1_from_expectations(v_e, v_j, e_op, d)

        best = -np.inf
        for sel in subclass_partition(labels, d).selections():
            n = len(sel)
            u_e = 1.0 / (n + 1)
            decomp = bell_decomposition(sel, np.full(n, 1.0 / n), u_e, chi_a, chi_b)
            coeffs = alpha_beta(decomp)
            v_mixed = u_e * v_e + (1 - u_e) / n * sum(v_j[j] for j in sel)
            info = v_e + e_op
            best = max(best, lemma2_bounds(v_mixed, info, coeffs).lower)
        assert abs(t1.lower - best) < 1e-9


def test_theorem1_bounds_validation():
    p_e = np.full((3, 3), 1 / 9)
    with pytest.raises(ValueError):
        bellfid.theorem1_bounds(p_e, {0: np.zeros((3, 3))}, np.full(3, 1 / np.sqrt(3)), np.full(3, 1 / np.sqrt(3)))


def test_optimize_chi_symmetric_closed_form():
    rng = np.random.default_rng(45)
    d = 5
    s = rng.uniform(0.3, 1.0, d)
    s = s / np.linalg.norm(s)
    p_e = np.full((d, d), 1 / d**2)
    chi_a, chi_b = bellfid.optimize_chi(p_e, s, hint="symmetric")
    want = np.sqrt(s / s.sum())
    assert np.abs(chi_a - want).max() < 1e-12
    assert np.abs(chi_b - want).max() < 1e-12


def test_optimize_chi_crosstalk_reductions():
    from bellfid.harness import FIG3_SCHMIDT

    d = 7
    s = bellfid.schmidt_vector(np.asarray(FIG3_SCHMIDT) / np.linalg.norm(FIG3_SCHMIDT))
    psi = bellfid.bell_state(s)
    # one-sided statistics: product formula telescopes to the diagonal form
    p_one = comp_basis_stats(bellfid.crosstalk_state(psi, 0.04, 0.0))
    ca1, cb1 = bellfid.optimize_chi(p_one, s, hint="crosstalk")
    ca2, cb2 = bellfid.optimize_chi(p_one, s, hint="one_side_A")
    assert np.abs(np.abs(ca1) - np.abs(ca2)).max() < 1e-12
    assert np.abs(np.abs(cb1) - np.abs(cb2)).max() < 1e-12
    # balanced crosstalk: all transition ratios are 1, reduces to symmetric
    p_bal = comp_basis_stats(bellfid.crosstalk_state(psi, 0.02, 0.02))
    ca3, _ = bellfid.optimize_chi(p_bal, s, hint="crosstalk")
    ca4, _ = bellfid.optimize_chi(p_bal, s, hint="symmetric")
    assert np.abs(np.abs(ca3) - np.abs(ca4)).max() < 1e-9


def test_optimize_chi_general_never_worse_than_uniform():
    rng = np.random.default_rng(46)
    for _ in range(20):
        d = int(rng.integers(2, 8))
        s = rng.uniform(0.25, 1.0, d)
        s = s / np.linalg.norm(s)
        p_e = rng.uniform(0, 1, (d, d))
        p_e = p_e / p_e.sum()
        chi_a, chi_b = bellfid.optimize_chi(p_e, s, hint="general")
        ua, ub = _slaved_pair(np.full(d, 1 / np.sqrt(d)), s)
        e_general = bellfid.error_operator(chi_a, chi_b).expectation(p_e)
        e_uniform = bellfid.error_operator(ua, ub).expectation(p_e)
        assert e_general <= e_uniform + 1e-12
        # result is always compatible with the target
        assert np.abs(bellfid.compatible_schmidt(chi_a, chi_b) - s).max() < 1e-9


def test_optimize_chi_symmetric_stats_match_closed_form():
    rng = np.random.default_rng(47)
    for _ in range(10):
        d = int(rng.integers(2, 7))
        s = rng.uniform(0.25, 1.0, d)
        s = s / np.linalg.norm(s)
        p_e = rng.uniform(0, 1, (d, d))
        p_e = (p_e + p_e.T) / 2
        p_e = p_e / p_e.sum()
        ca_g, cb_g = bellfid.optimize_chi(p_e, s, hint="general")
        ca_s, cb_s = bellfid.optimize_chi(p_e, s, hint="symmetric")
        e_g = bellfid.error_operator(ca_g, cb_g).expectation(p_e)
        e_s = bellfid.error_operator(ca_s, cb_s).expectation(p_e)
        assert abs(e_g - e_s) < 1e-9


def test_optimize_chi_validation():
    s = bellfid.ramp_schmidt(3)
    p_e = np.full((3, 3), 1 / 9)
    with pytest.raises(ValueError):
        bellfid.optimize_chi(p_e, s, hint="fancy")
    with pytest.raises(ValueError):
        bellfid.optimize_chi(np.full((4, 4), 1 / 16), s)
    with pytest.raises(ValueError):
        bellfid.optimize_chi(-p_e, s)
    zero_diag = p_e.copy()
    zero_diag[1, 1] = 0.0
    for hint in ("one_side_A", "one_side_B", "crosstalk"):
        with pytest.raises(ValueError):
            bellfid.optimize_chi(zero_diag, s, hint=hint)


def test_optimize_chi_crosstalk_falls_back_on_one_sided_zero():
    d = 3
    s = bellfid.ramp_schmidt(d)
    p_e = np.diag([0.3, 0.3, 0.3])
    p_e[0, 1] = 0.1  # p(1, 0) stays zero: the printed ratio is undefined
    chi_a, chi_b = bellfid.optimize_chi(p_e, s, hint="crosstalk")
    ga, gb = bellfid.optimize_chi(p_e, s, hint="general")
    assert np.abs(chi_a - ga).max() < 1e-12
    assert np.abs(chi_b - gb).max() < 1e-12


def test_schmidt_from_stats():
    rng = np.random.default_rng(48)
    d = 6
    s = rng.uniform(0.3, 1.0, d)
    s = s / np.linalg.norm(s)
    psi = bellfid.bell_state(s)
    assert np.abs(bellfid.schmidt_from_stats(comp_basis_stats(np.outer(psi, psi.conj()))) - s).max() < 1e-12
    # crosstalk keeps the diagonal proportional to s^2
    p_e = comp_basis_stats(bellfid.crosstalk_state(psi, 0.01, 0.02))
    assert np.abs(bellfid.schmidt_from_stats(p_e) - s).max() < 1e-12
    with pytest.raises(ValueError):
        bellfid.schmidt_from_stats(np.diag([0.5, 0.5, 0.0]))


def test_chi_condition_check():
    rng = np.random.default_rng(49)
    d = 2
    s = rng.uniform(0.3, 1.0, d)
    s = s / np.linalg.norm(s)
    p_e = rng.uniform(0.05, 1.0, (d, d))
    p_e = p_e / p_e.sum()
    chi_a, chi_b = bellfid.optimize_chi(p_e, s, hint="general")
    records = bellfid.chi_condition_check(chi_a, chi_b, p_e, s)
    assert len(records) == 1
    rec = records[0]
    assert rec["pair"] == (0, 1) and not rec["skipped"]
    assert rec["residual_a"] < 1e-6 and rec["residual_b"] < 1e-6

    p_zero = np.diag([0.6, 0.4]).astype(float)
    records = bellfid.chi_condition_check(chi_a, chi_b, p_zero, s)
    assert records[0]["skipped"] and np.isnan(records[0]["residual_a"])


def test_adaptive_estimate_strategies_and_validation():
    rng = np.random.default_rng(50)
    d = 4
    s = rng.uniform(0.3, 1.0, d)
    s = s / np.linalg.norm(s)
    psi = bellfid.bell_state(s)
    rho = bellfid.white_noise_state(psi, 0.2)
    rep = bellfid.adaptive_estimate(rho, [0, 1], chi_strategy="uniform", schmidt=s)
    assert np.abs(rep.chi_a - 1 / 2).max() < 1e-12
    assert np.abs(rep.chi_b - s).max() < 1e-12
    assert rep.configs == (0, 1)
    assert set(rep.expectations["v_j"]) == {0, 1}

    with pytest.raises(ValueError):
        bellfid.adaptive_estimate(rho, [0, 0], schmidt=s)
    with pytest.raises(ValueError):
        bellfid.adaptive_estimate(rho, [d], schmidt=s)
    with pytest.raises(ValueError):
        bellfid.adaptive_estimate(rho, [0], chi_strategy="bogus", schmidt=s)
    with pytest.raises(ValueError):
        bellfid.adaptive_estimate(rho, [0], estimators=("magic",), schmidt=s)


def test_adaptive_estimate_shots_deterministic():
    rng = np.random.default_rng(51)
    d = 3
    s = rng.uniform(0.3, 1.0, d)
    s = s / np.linalg.norm(s)
    rho = bellfid.white_noise_state(bellfid.bell_state(s), 0.3)
    a = bellfid.adaptive_estimate(rho, [0, 1], schmidt=s, shots=2000, seed=9)
    b = bellfid.adaptive_estimate(rho, [0, 1], schmidt=s, shots=2000, seed=9)
    c = bellfid.adaptive_estimate(rho, [0, 1], schmidt=s, shots=2000, seed=10)
    assert a.bounds["theorem1"].lower == b.bounds["theorem1"].lower
    assert a.expectations["v_j"] == b.expectations["v_j"]
    assert a.bounds["theorem1"].lower != c.bounds["theorem1"].lower


def test_adaptive_estimate_adapted_target():
    # without an explicit target the estimate adapts the Schmidt coefficients
    # from the diagonal statistics
    rng = np.random.default_rng(52)
    d = 5
    s = rng.uniform(0.3, 1.0, d)
    s = s / np.linalg.norm(s)
    rho = bellfid.crosstalk_state(bellfid.bell_state(s), 0.01, 0.01)
    rep = bellfid.adaptive_estimate(rho, [0], chi_strategy="symmetric")
    assert np.abs(rep.schmidt - s).max() < 1e-12
