"""Tests for the Monte Carlo experiment harness: config plumbing,
Clopper-Pearson aggregation, output files, and the per-experiment runners
on small (fast) instances."""

import copy
import json

import numpy as np
import pytest
from scipy.stats import beta as beta_dist

from taucorr.harness import (
    EXPERIMENTS,
    SCHEMA_VERSION,
    ExperimentConfig,
    binomial_lcb,
    random_correlation,
    run,
)
from taucorr.simulator import FactorSpec


# ---------------------------------------------------------------------------
# configuration round trips and validation


def test_config_roundtrip_through_dict():
    cfg = ExperimentConfig(
        experiment="elementary",
        n=5000,
        d=8,
        alpha=0.2,
        replicates=7,
        seed=42,
        factor=FactorSpec(d=8, r=2, factor_eigenvalues=(3.0, 2.0), elementary=True),
        marginals="exp",
    )
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


def test_config_from_dict_nested_groups():
    raw = {
        "experiment": "certificate",
        "d": 10,
        "rank": 2,
        "replicates": 3,
        "certificate": {"c": 3.0, "mu_margin": 1.5},
        "contraction": {"trials_per_space": 6},
        "solver": {"tol": 1e-6, "max_iter": 500},
        "copula": {"generator": "student_t", "df": 5.0},
    }
    cfg = ExperimentConfig.from_dict(raw)
    assert cfg.certificate_c == 3.0
    assert cfg.certificate_mu_margin == 1.5
    assert cfg.contraction_trials == 6
    assert cfg.tol == 1e-6 and cfg.max_iter == 500
    assert cfg.generator == "student_t" and cfg.df == 5.0


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unrecognised config keys"):
        ExperimentConfig.from_dict({"experiment": "sandwich", "bogus": 1})
    with pytest.raises(ValueError, match="config must be a JSON object"):
        ExperimentConfig.from_dict(["sandwich"])


def test_config_validation_errors():
    with pytest.raises(ValueError, match="unknown experiment"):
        ExperimentConfig(experiment="nope")
    with pytest.raises(ValueError, match="replicates"):
        ExperimentConfig(experiment="sandwich", replicates=0)
    with pytest.raises(ValueError, match="alpha"):
        ExperimentConfig(experiment="sandwich", alpha=1.0)
    # factor-model experiments need a factor spec and alpha < 1/2
    with pytest.raises(ValueError, match="requires a factor spec"):
        ExperimentConfig(experiment="elementary", alpha=0.25)
    with pytest.raises(ValueError, match="alpha in \\(0, 1/2\\)"):
        ExperimentConfig(
            experiment="elementary",
            alpha=0.6,
            factor=FactorSpec(d=8, r=1, factor_eigenvalues=(2.0,)),
        )
    with pytest.raises(ValueError, match="does not match"):
        ExperimentConfig(
            experiment="elementary",
            d=9,
            alpha=0.25,
            factor=FactorSpec(d=8, r=1, factor_eigenvalues=(2.0,)),
        )
    with pytest.raises(ValueError, match="certificate_c"):
        ExperimentConfig(experiment="certificate", certificate_c=0.5)


def test_experiment_registry_is_complete():
    assert set(EXPERIMENTS) == {
        "bound_coverage_T",
        "bound_coverage_Sigma",
        "sandwich",
        "elementary",
        "refined_oracle",
        "diagonal_bound",
        "certificate",
        "contraction",
    }


# ---------------------------------------------------------------------------
# Clopper-Pearson lower confidence bound


def test_binomial_lcb_edge_cases():
    assert binomial_lcb(0, 50) == 0.0
    # all successes: closed form 0.01**(1/n) at the 99% level
    assert binomial_lcb(20, 20) == pytest.approx(0.01 ** (1.0 / 20.0), rel=1e-12)


def test_binomial_lcb_matches_beta_quantile():
    for k, n in [(3, 10), (95, 100), (180, 200)]:
        expected = float(beta_dist.ppf(0.01, k, n - k + 1))
        assert binomial_lcb(k, n) == pytest.approx(expected, rel=1e-12)
        assert 0.0 < binomial_lcb(k, n) < k / n


def test_binomial_lcb_rejects_bad_counts():
    with pytest.raises(ValueError):
        binomial_lcb(5, 4)
    with pytest.raises(ValueError):
        binomial_lcb(-1, 4)


def test_random_correlation_is_valid():
    rng = np.random.default_rng(7)
    for d in (2, 5, 12):
        corr = random_correlation(d, rng)
        s = corr.values
        assert s.shape == (d, d)
        np.testing.assert_allclose(np.diag(s), 1.0, atol=1e-14)
        np.testing.assert_allclose(s, s.T, atol=1e-14)
        assert np.linalg.eigvalsh(s).min() > -1e-10


# ---------------------------------------------------------------------------
# deterministic-claim experiments


def test_sandwich_run_passes_deterministically():
    cfg = ExperimentConfig(experiment="sandwich", d=6, replicates=25, seed=3)
    result = run(cfg)
    assert result.status == "pass"
    assert result.summary["coverage"] == 1.0
    assert result.summary["deterministic_claim"] is True
    assert result.summary["probability_floor"] == 1.0
    assert len(result.records) == 25
    for rec in result.records:
        assert rec["lower"] <= rec["t_norm"] <= rec["upper"]


def test_certificate_run_small():
    cfg = ExperimentConfig(
        experiment="certificate", d=20, rank=2, replicates=3, seed=11
    )
    result = run(cfg)
    assert result.status == "pass"
    for rec in result.records:
        assert rec["gamma"] < 1.0 / 5.0
        assert rec["mu"] > 0.0
        assert rec["all_ok"]


def test_contraction_run_small():
    cfg = ExperimentConfig(
        experiment="contraction",
        d=8,
        rank=2,
        replicates=5,
        contraction_trials=4,
        seed=1,
    )
    result = run(cfg)
    assert result.status == "pass"
    assert result.summary["total_trials"] == 20
    assert all(rec["max_ratio_spectral_inf"] <= 1.0 + 1e-10 for rec in result.records)


# ---------------------------------------------------------------------------
# stochastic experiments: aggregation semantics


def test_small_run_cannot_certify_a_high_floor():
    # 10/10 coverage gives a 99% lower confidence bound of only ~0.63,
    # so a floor of 0.9 must honestly report "fail" rather than "pass".
    cfg = ExperimentConfig(
        experiment="bound_coverage_T",
        n=300,
        d=5,
        alpha=0.1,
        replicates=10,
        seed=0,
    )
    result = run(cfg)
    assert result.summary["coverage"] == 1.0
    assert result.summary["binomial_lcb_99"] == pytest.approx(0.01 ** 0.1, rel=1e-12)
    assert result.summary["pass"] is False
    assert result.status == "fail"


def test_bound_coverage_records_and_chain():
    cfg = ExperimentConfig(
        experiment="bound_coverage_T", n=400, d=4, alpha=0.2, replicates=6, seed=5
    )
    result = run(cfg)
    assert result.summary["chain_violations"] == 0
    for rec in result.records:
        assert rec["rhs_population"] <= rec["rhs_data_driven"] + 1e-12
        assert rec["rhs_data_driven"] <= rec["rhs_guaranteed"] + 2e-12
        assert rec["deviation"] >= 0.0


def test_sigma_coverage_tracks_identity_gap():
    cfg = ExperimentConfig(
        experiment="bound_coverage_Sigma", n=400, d=4, alpha=0.2, replicates=6, seed=5
    )
    result = run(cfg)
    assert result.summary["identity_max_gap"] <= 1e-12
    assert result.summary["probability_floor"] == pytest.approx(1.0 - 0.2 - 0.01)


# ---------------------------------------------------------------------------
# conditions-unmet paths


def test_elementary_conditions_unmet_on_tiny_sample():
    cfg = ExperimentConfig(
        experiment="elementary",
        n=40,  # far too small for the spectral threshold to clear the gap
        d=8,
        alpha=0.25,
        replicates=5,
        factor=FactorSpec(d=8, r=2, factor_eigenvalues=(3.0, 2.0), elementary=True),
    )
    result = run(cfg)
    assert result.status == "conditions-unmet"
    assert result.records == []
    assert result.summary["coverage"] is None
    assert result.summary["pass"] is False


def test_refined_conditions_unmet_on_high_coherence():
    # a rank-2 flat frame at d=6 has coherence 1/3, above the 1/9 ceiling
    cfg = ExperimentConfig(
        experiment="refined_oracle",
        n=1000,
        d=6,
        alpha=0.25,
        replicates=3,
        factor=FactorSpec(d=6, r=2, factor_eigenvalues=(2.0, 2.0), elementary=True),
    )
    result = run(cfg)
    assert result.status == "conditions-unmet"
    assert result.summary["gamma_r_star"] == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert result.records == []


def test_refined_oracle_small_run_records():
    # coherence of the rank-2 flat frame at d=18 is exactly the ceiling 1/9
    cfg = ExperimentConfig(
        experiment="refined_oracle",
        n=2000,
        d=18,
        alpha=0.25,
        replicates=3,
        seed=9,
        factor=FactorSpec(d=18, r=2, factor_eigenvalues=(4.0, 4.0), elementary=True),
    )
    result = run(cfg)
    assert result.status in ("pass", "fail")  # never unmet: gamma == ceiling
    assert len(result.records) == 3
    for rec in result.records:
        assert rec["converged"]
        assert rec["err_sq"] >= 0.0
        assert isinstance(rec["event_oracle"], bool)
        assert isinstance(rec["event_diag"], bool)
    assert 0.0 <= result.summary["secondary_coverage"] <= 1.0


# ---------------------------------------------------------------------------
# artifact files


def test_output_files_schema_and_determinism(tmp_path):
    base = tmp_path / "sandwich_run"
    cfg = dict(experiment="sandwich", d=5, replicates=8, seed=2,
               output_path=str(base))
    first = run(ExperimentConfig(**cfg))
    with open(f"{base}.json", encoding="utf-8") as fh:
        payload_one = json.load(fh)
    csv_one = (tmp_path / "sandwich_run.csv").read_bytes()

    second = run(ExperimentConfig(**copy.deepcopy(cfg)))
    with open(f"{base}.json", encoding="utf-8") as fh:
        payload_two = json.load(fh)
    csv_two = (tmp_path / "sandwich_run.csv").read_bytes()

    assert payload_one["schema_version"] == SCHEMA_VERSION == 1
    assert payload_one["experiment"] == "sandwich"
    assert payload_one["status"] in ("pass", "fail", "conditions-unmet")
    assert payload_one["config"]["d"] == 5
    # identical up to the timestamp
    payload_one.pop("created_at")
    payload_two.pop("created_at")
    assert payload_one == payload_two
    assert csv_one == csv_two
    assert first.summary == second.summary


def test_csv_layout_for_coverage_runs(tmp_path):
    base = tmp_path / "cov"
    cfg = ExperimentConfig(
        experiment="bound_coverage_T",
        n=200,
        d=3,
        alpha=0.3,
        replicates=4,
        seed=1,
        output_path=str(base),
    )
    run(cfg)
    lines = (tmp_path / "cov.csv").read_text(encoding="utf-8").strip().splitlines()
    assert lines[0] == (
        "replicate,that_norm,deviation,rhs_population,rhs_data_driven,"
        "rhs_guaranteed,covered,chain_ok"
    )
    assert len(lines) == 5
    for row in lines[1:]:
        cells = row.split(",")
        assert cells[-1] in ("0", "1")  # booleans serialised as integers
        assert cells[-2] in ("0", "1")


def test_conditions_unmet_writes_empty_csv(tmp_path):
    base = tmp_path / "unmet"
    cfg = ExperimentConfig(
        experiment="elementary",
        n=40,
        d=8,
        alpha=0.25,
        replicates=2,
        factor=FactorSpec(d=8, r=2, factor_eigenvalues=(3.0, 2.0), elementary=True),
        output_path=str(base),
    )
    result = run(cfg)
    assert result.status == "conditions-unmet"
    assert (tmp_path / "unmet.csv").read_text(encoding="utf-8") == ""
    with open(f"{base}.json", encoding="utf-8") as fh:
        payload = json.load(fh)
    assert payload["records"] == []
