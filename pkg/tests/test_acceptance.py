import time

import numpy as np

import bellfid
from bellfid.harness import FIG3_SCHMIDT, preset_scenarios, run_scenario


def _random_slaved(rng, d):
    s = rng.uniform(0.2, 1.0, d)
    s = s / np.linalg.norm(s)
    chi_a = rng.uniform(0.3, 1.0, d) * np.exp(2j * np.pi * rng.random(d))
    chi_a = chi_a / np.linalg.norm(chi_a)
    chi_b = s / chi_a
    return s, chi_a, chi_b / np.linalg.norm(chi_b)


def test_prime_dimension_full_settings_exact_fidelity():
    t0 = time.perf_counter()
    for d in (2, 3, 5, 7):
        s = bellfid.ramp_schmidt(d)
        psi = bellfid.bell_state(s)
        for eps in np.linspace(0.0, 1.0, 101):
            rho = bellfid.white_noise_state(psi, float(eps))
            rep = bellfid.adaptive_estimate(rho, range(d), chi_strategy="symmetric", schmidt=s)
            b = rep.bounds["theorem1"]
            assert b.exact is not None
            assert abs(b.exact - ((1 - eps) + eps / d**2)) <= 1e-9
            assert b.lower == b.upper == b.exact
    assert time.perf_counter() - t0 < 10.0


def test_verifier_sum_identity_random_pairs():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2026)
    for d in (2, 3, 5, 7, 11):
        for _ in range(20):
            s, chi_a, chi_b = _random_slaved(rng, d)
            lhs = sum(bellfid.bell_verifier(j, chi_a, chi_b).matrix for j in range(d))
            psi = bellfid.generalized_bell_state(0, 0, chi_a, chi_b)
            rhs = d * np.outer(psi, psi.conj()) + bellfid.error_operator(chi_a, chi_b).matrix
            assert np.abs(lhs - rhs).max() <= 1e-9
    assert time.perf_counter() - t0 < 30.0


def test_bound_sandwich_randomized_instances():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20260815)
    strategies = ("uniform", "symmetric", "crosstalk_opt", "one_side_A", "one_side_B", "general")
    for t in range(500):
        d = 2 + t % 8
        s = rng.uniform(0.25, 1.0, d)
        s = s / np.linalg.norm(s)
        psi = bellfid.bell_state(s)
        kind = t % 3
        if kind == 0:
            rho = bellfid.white_noise_state(psi, float(rng.uniform(0.0, 1.0)))
        elif kind == 1:
            cap = 1.0 / (2 * d)
            rho = bellfid.crosstalk_state(psi, float(rng.uniform(0, cap / 2)), float(rng.uniform(0, cap / 2)))
        else:
            # convex mixture of generalized Bell projectors of an unrelated
            # chi pair, floored on the target so the diagonal stays positive
            _, ga, gb = _random_slaved(rng, d)
            w = rng.dirichlet(np.ones(4))
            rho = (w[0] + 0.25) / 1.25 * np.outer(psi, psi.conj())
            for i in range(1, 4):
                mu, nu = int(rng.integers(1, d)), int(rng.integers(0, d))
                phi = bellfid.generalized_bell_state(mu, nu, ga, gb)
                rho = rho + w[i] / 1.25 * np.outer(phi, phi.conj())
        n = int(rng.integers(1, d + 1))
        configs = sorted(rng.choice(d, size=n, replace=False).tolist())
        rep = bellfid.adaptive_estimate(rho, configs, chi_strategy=strategies[t % 6], schmidt=s)
        fid = bellfid.exact_fidelity(rho, psi)
        b = rep.bounds["theorem1"]
        assert b.lower - 1e-9 <= fid <= b.upper + 1e-9
    assert time.perf_counter() - t0 < 120.0


def test_lower_bound_saturates_at_one_per_subclass():
    d = 9
    s = bellfid.ramp_schmidt(d)
    psi = bellfid.bell_state(s)
    for eps in (0.1, 0.3, 0.5):
        rho = bellfid.white_noise_state(psi, eps)
        small = bellfid.adaptive_estimate(rho, [0, 1, 2], chi_strategy="symmetric", schmidt=s)
        full = bellfid.adaptive_estimate(rho, range(d), chi_strategy="symmetric", schmidt=s)
        assert abs(small.bounds["theorem1"].lower - full.bounds["theorem1"].lower) <= 1e-9


def test_crosstalk_adapted_chi_improves_lower_bound():
    s = np.asarray(FIG3_SCHMIDT)
    s = s / np.linalg.norm(s)
    psi = bellfid.bell_state(s)
    for ea, eb in ((0.04, 0.0), (0.0, 0.04)):
        rho = bellfid.crosstalk_state(psi, ea, eb, renormalize=False)
        opt = bellfid.adaptive_estimate(rho, [0], chi_strategy="crosstalk_opt")
        sym = bellfid.adaptive_estimate(rho, [0], chi_strategy="symmetric")
        delta = opt.bounds["theorem1"].lower - sym.bounds["theorem1"].lower
        assert 0.014 - 0.005 <= delta <= 0.014 + 0.005


def test_trivial_info_operator_recovers_spectral_bounds():
    rng = np.random.default_rng(99)
    for t in range(100):
        d = int(rng.integers(2, 8))
        s = rng.uniform(0.25, 1.0, d)
        s = s / np.linalg.norm(s)
        psi = bellfid.bell_state(s)
        if t % 2:
            rho = bellfid.white_noise_state(psi, float(rng.uniform(0.0, 1.0)))
        else:
            cap = 1.0 / (2 * d)
            rho = bellfid.crosstalk_state(psi, float(rng.uniform(0, cap / 2)), float(rng.uniform(0, cap / 2)))
        n = int(rng.integers(1, d + 1))
        configs = sorted(rng.choice(d, size=n, replace=False).tolist())
        rep = bellfid.adaptive_estimate(
            rho, configs, chi_strategy="symmetric", schmidt=s, estimators=("nonadaptive", "lemma2_trivial")
        )
        na, l2 = rep.bounds["nonadaptive"], rep.bounds["lemma2_trivial"]
        assert abs(na.lower - l2.lower) <= 1e-9
        assert abs(na.upper - l2.upper) <= 1e-9


def test_optimizer_matches_closed_form_and_uniform_baseline():
    rng = np.random.default_rng(7)
    for _ in range(50):
        d = int(rng.integers(2, 8))
        s = rng.uniform(0.2, 1.0, d)
        s = s / np.linalg.norm(s)
        p_e = rng.uniform(0.0, 1.0, (d, d))
        p_e = (p_e + p_e.T) / 2
        p_e = p_e / p_e.sum()
        ga, gb = bellfid.optimize_chi(p_e, s, hint="general")
        sa, sb = bellfid.optimize_chi(p_e, s, hint="symmetric")
        e_general = bellfid.error_operator(ga, gb).expectation(p_e)
        e_closed = bellfid.error_operator(sa, sb).expectation(p_e)
        assert abs(e_general - e_closed) <= 1e-6
    for _ in range(100):
        d = int(rng.integers(2, 8))
        s = rng.uniform(0.2, 1.0, d)
        s = s / np.linalg.norm(s)
        p_e = rng.uniform(0.0, 1.0, (d, d))
        p_e = p_e / p_e.sum()
        ga, gb = bellfid.optimize_chi(p_e, s, hint="general")
        ua = np.full(d, 1 / np.sqrt(d))
        ub = s / ua
        ub = ub / np.linalg.norm(ub)
        e_general = bellfid.error_operator(ga, gb).expectation(p_e)
        e_uniform = bellfid.error_operator(ua, ub).expectation(p_e)
        assert e_general <= e_uniform + 1e-12


def test_lower_bound_monotone_in_settings_prefix():
    results = [run_scenario(sc) for sc in preset_scenarios("fig1")]
    assert all(r.ok for r in results)
    lowers = [np.array([row["bounds"]["theorem1"]["lower"] for row in r.rows]) for r in results]
    for prev, cur in zip(lowers, lowers[1:]):
        assert (cur >= prev - 1e-9).all()
