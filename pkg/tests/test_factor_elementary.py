"""Factor decompositions and the closed-form spectral estimator."""

import math

import numpy as np
import pytest

import taucorr
from taucorr import (
    DegenerateInputError,
    FactorDecomposition,
    FactorSpec,
    ModelMismatchError,
    check_elementary_conditions,
    deviation_scale,
    estimate_elementary,
    make_factor_truth,
    mu_bar,
    mu_threshold,
    sigma_deviation_bounds,
)

C1 = math.pi
C2 = 3.0 * math.pi**2 / 16.0


def assemble(eigenvalues, seed=0):
    """Symmetric matrix with prescribed spectrum and a Haar eigenbasis."""
    d = len(eigenvalues)
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    return (q * np.asarray(eigenvalues, dtype=float)) @ q.T, q


def test_estimate_rank_one():
    m, q = assemble([3.0, 1.0, 1.0, 1.0])
    est = estimate_elementary(m, 0.5)
    assert est.r_hat == 1
    assert est.sigma2_hat == pytest.approx(1.0, abs=1e-12)
    expected_theta = 2.0 * np.outer(q[:, 0], q[:, 0])
    assert np.max(np.abs(est.theta_hat - expected_theta)) <= 1e-10
    assert not est.sigma2_negative


def test_estimate_rank_two_close_eigenvalues():
    m, _ = assemble([4.0, 3.9, 1.0, 1.0], seed=1)
    est = estimate_elementary(m, 0.05)
    assert est.r_hat == 2
    assert est.sigma2_hat == pytest.approx(1.0, abs=1e-12)
    lam = np.linalg.eigvalsh(est.theta_hat)[::-1]
    assert lam[0] == pytest.approx(3.0, abs=1e-10)
    assert lam[1] == pytest.approx(2.9, abs=1e-10)
    assert np.max(np.abs(lam[2:])) <= 1e-10


def test_estimate_identity_input():
    est = estimate_elementary(np.eye(5), 0.3)
    assert est.r_hat == 0
    assert est.sigma2_hat == pytest.approx(1.0, abs=1e-14)
    assert np.max(np.abs(est.theta_hat)) == 0.0


def test_estimate_exact_recovery():
    spec = FactorSpec(d=16, r=3, factor_eigenvalues=(5.0, 4.0, 2.0),
                      elementary=True)
    truth = make_factor_truth(spec)
    sigma = truth.sigma
    for mu in (0.05, 0.7, 2.0):  # any mu in (0, lambda_r]
        est = estimate_elementary(sigma, mu)
        assert est.r_hat == truth.r_star
        assert est.sigma2_hat == pytest.approx(truth.noise_level, abs=1e-10)
        assert np.linalg.norm(est.theta_hat - truth.theta_star) <= 1e-10


def test_estimate_shift_invariance_of_rank():
    m, _ = assemble([4.0, 2.5, 1.0, 0.5], seed=2)
    for mu in (0.2, 1.0, 2.0):
        base = estimate_elementary(m, mu).r_hat
        shifted = estimate_elementary(m + 3.1 * np.eye(4), mu).r_hat
        assert base == shifted


def test_estimate_negative_noise_flag():
    m, _ = assemble([2.0, -0.5, -0.5], seed=3)
    est = estimate_elementary(m, 1.0)
    assert est.sigma2_hat < 0.0
    assert est.sigma2_negative


def test_estimate_rejects_bad_arguments():
    with pytest.raises(ValueError):
        estimate_elementary(np.eye(3), 0.0)
    with pytest.raises(ValueError):
        estimate_elementary(np.array([[1.0, 0.5], [0.4, 1.0]]), 0.1)


def test_mu_threshold_matches_bound_formula():
    for that_norm in (0.0, 1.5, 3.0):
        _, rhs_dd, _ = sigma_deviation_bounds(
            1000, 3, 0.25, t_norm=None, that_norm=that_norm
        )
        assert mu_threshold(that_norm, 1000, 3, 0.25) == pytest.approx(
            2.0 * rhs_dd, rel=1e-14
        )


def test_mu_bar_formula():
    f = deviation_scale(1000, 3, 0.25)
    t_norm = 1.5
    expected = 2.0 * (C1 * math.sqrt(t_norm) * f + (C1 + C2) * f * f)
    assert mu_bar(t_norm, 1000, 3, 0.25) == pytest.approx(expected, rel=1e-14)
    assert mu_bar(0.0, 1000, 3, 0.25) == pytest.approx(
        2.0 * (C1 + C2) * f * f, rel=1e-14
    )


def test_mu_alpha_range():
    with pytest.raises(ValueError):
        mu_threshold(1.0, 1000, 3, 0.5)
    with pytest.raises(ValueError):
        mu_bar(1.0, 1000, 3, -0.1)


def test_factor_decomposition_validation():
    spec = FactorSpec(d=8, r=2, factor_eigenvalues=(2.0, 1.0), elementary=True)
    truth = make_factor_truth(spec)
    # diag(theta) + v must reconstruct the unit diagonal
    with pytest.raises(ValueError):
        FactorDecomposition(
            theta_star=truth.theta_star,
            v_star=truth.v_star + 0.1,
            r_star=truth.r_star,
            eigenvalues=truth.eigenvalues,
            eigenvectors=truth.eigenvectors,
        )
    with pytest.raises(ValueError):
        FactorDecomposition(
            theta_star=truth.theta_star,
            v_star=truth.v_star,
            r_star=truth.r_star,
            eigenvalues=truth.eigenvalues,
            eigenvectors=truth.eigenvectors * 1.05,  # not orthonormal
        )


def test_factor_sigma_properties():
    spec = FactorSpec(d=8, r=2, factor_eigenvalues=(2.0, 1.0), elementary=True)
    truth = make_factor_truth(spec)
    sigma = truth.sigma
    assert np.array_equal(np.diag(sigma), np.ones(8))
    assert truth.is_elementary()
    assert truth.noise_level == pytest.approx(1.0 - 3.0 / 8.0, rel=1e-14)


def test_conditions_report_semantics():
    spec = FactorSpec(d=16, r=2, factor_eigenvalues=(6.0, 5.0), elementary=True)
    truth = make_factor_truth(spec)
    rep = check_elementary_conditions(truth, 20000, 0.25)
    assert rep.rank_deficient  # r < d
    assert rep.sample_size_ok  # ||T||_2 >= f^2
    assert rep.eigengap_ok == (truth.eigenvalues[-1] >= 2.0 * rep.mu_bar)
    assert rep.all_ok == (rep.rank_deficient and rep.eigengap_ok and rep.sample_size_ok)
    assert rep.guaranteed_rank == 2
    assert rep.theta_error_bound == pytest.approx(
        2.0 * truth.r_star * rep.mu_bar**2, rel=1e-12
    )
    assert rep.sigma2_error_bound == pytest.approx(rep.mu_bar / 2.0, rel=1e-12)

    # same truth, far too little data: the eigengap condition must fail
    rep_small = check_elementary_conditions(truth, 200, 0.25)
    assert not rep_small.eigengap_ok
    assert not rep_small.all_ok


def test_conditions_boundary_is_inclusive(monkeypatch):
    spec = FactorSpec(d=16, r=2, factor_eigenvalues=(6.0, 5.0), elementary=True)
    truth = make_factor_truth(spec)
    lam_r = float(truth.eigenvalues[-1])

    monkeypatch.setattr(taucorr.elementary, "mu_bar", lambda *a, **k: lam_r / 2.0)
    assert check_elementary_conditions(truth, 20000, 0.25).eigengap_ok

    monkeypatch.setattr(
        taucorr.elementary, "mu_bar", lambda *a, **k: lam_r / 2.0 + 1e-12
    )
    assert not check_elementary_conditions(truth, 20000, 0.25).eigengap_ok


def test_conditions_reject_anisotropic_noise():
    spec = FactorSpec(d=8, r=2, factor_eigenvalues=(1.5, 1.0),
                      eigenvector_style="delocalized_haar")
    truth = make_factor_truth(spec, rng=np.random.default_rng(5))
    assert not truth.is_elementary()
    with pytest.raises(ModelMismatchError):
        check_elementary_conditions(truth, 1000, 0.25)
