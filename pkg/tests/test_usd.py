import json

import numpy as np
import pytest

from povmsim.core import (
    InvariantViolation,
    Povm,
    QuantumState,
    haar_random_pure_state,
    min_eigenvalue,
)
from povmsim.simulation import PostProcessingMap, apply_postprocessing, build_mq
from povmsim.usd import (
    Ensemble,
    dual_states,
    ensemble_from_document,
    ensemble_to_document,
    equal_probability_measurement,
    usd_advantage_bound,
    projective_simulable_optimum,
    projective_simulable_optimum_by_search,
    random_ensemble_experiment,
    symmetric_ensemble,
    symmetric_ensemble_from_gap,
    usd_success,
)


def haar_ensemble(n, dim, seed):
    rng = np.random.default_rng(seed)
    states = np.array([haar_random_pure_state(dim, rng).vector for _ in range(n)])
    return Ensemble(states)


class TestUsdSuccess:
    def test_orthonormal_with_basis_measurement(self):
        ensemble = Ensemble(np.eye(3, dtype=complex))
        effects = [np.diag([1.0, 0, 0]), np.diag([0, 1.0, 0]), np.diag([0, 0, 1.0]),
                   np.zeros((3, 3))]
        result = usd_success(ensemble, Povm(effects))
        assert result.success == pytest.approx(1.0)
        assert result.unambiguous

    def test_always_inconclusive(self):
        ensemble = haar_ensemble(3, 3, 0)
        z = np.zeros((3, 3))
        result = usd_success(ensemble, Povm([z, z, z, np.eye(3)]))
        assert result.success == 0.0
        assert result.unambiguous

    def test_violation_reporting(self):
        ensemble = Ensemble(np.eye(2, dtype=complex))
        # detect state 0 with the wrong projector: cross terms fire
        effects = [np.diag([0.0, 1.0]), np.diag([1.0, 0.0]), np.zeros((2, 2))]
        result = usd_success(ensemble, Povm(effects))
        assert not result.unambiguous
        assert result.max_violation == pytest.approx(1.0)

    def test_outcome_count_mismatch(self):
        ensemble = Ensemble(np.eye(2, dtype=complex))
        with pytest.raises(ValueError, match="outcomes"):
            usd_success(ensemble, Povm([np.eye(2)]))


class TestEqualProbabilityMeasurement:
    def test_orthonormal_states(self):
        ensemble = Ensemble(np.eye(4, dtype=complex))
        povm = equal_probability_measurement(ensemble)
        for i in range(4):
            want = np.zeros((4, 4))
            want[i, i] = 1.0
            assert np.max(np.abs(povm.effects[i] - want)) < 1e-12
        assert np.max(np.abs(povm.effects[4])) < 1e-12
        assert usd_success(ensemble, povm).success == pytest.approx(1.0)

    def test_success_equals_min_gram_eigenvalue(self):
        for seed, (n, dim) in enumerate([(3, 3), (4, 4), (4, 7), (2, 2)]):
            ensemble = haar_ensemble(n, dim, seed)
            povm = equal_probability_measurement(ensemble)
            result = usd_success(ensemble, povm)
            assert result.unambiguous
            assert result.success == pytest.approx(min_eigenvalue(ensemble.gram()), abs=1e-10)

    def test_detection_probabilities_equal(self):
        ensemble = haar_ensemble(4, 5, 12)
        povm = equal_probability_measurement(ensemble)
        detections = [np.vdot(s, povm.effects[i] @ s).real
                      for i, s in enumerate(ensemble.states)]
        assert np.max(detections) - np.min(detections) < 1e-10

    def test_rejects_dependent_states(self):
        v = haar_random_pure_state(3, 1).vector
        states = np.array([v, v, haar_random_pure_state(3, 2).vector])
        ensemble = Ensemble(states)
        with pytest.raises(InvariantViolation, match="independence"):
            equal_probability_measurement(ensemble)

    def test_rejects_non_uniform_priors(self):
        ensemble = Ensemble(np.eye(2, dtype=complex), probs=[0.7, 0.3])
        with pytest.raises(ValueError, match="uniform"):
            equal_probability_measurement(ensemble)

    def test_dual_states_condition_number(self):
        ensemble = haar_ensemble(3, 3, 5)
        duals, cond = dual_states(ensemble)
        assert cond >= 1.0
        overlap = duals.conj() @ ensemble.states.T
        assert np.max(np.abs(overlap - np.eye(3))) < 1e-10


class TestProjectiveSimulableOptimum:
    def test_two_state_closed_form(self):
        for s in (0.2, 0.5, 0.9):
            states = np.array([[1, 0], [s, np.sqrt(1 - s**2)]], dtype=complex)
            value = projective_simulable_optimum(Ensemble(states))
            assert value == pytest.approx(0.5 * (1 - s**2), abs=1e-12)

    def test_uniform_caps_at_one_over_d(self):
        for seed in range(5):
            ensemble = haar_ensemble(4, 6, seed + 40)
            value = projective_simulable_optimum(ensemble)
            assert value <= 1 / 4 + 1e-9

    def test_bounded_by_max_prior(self):
        states = haar_ensemble(3, 4, 77).states
        ensemble = Ensemble(states, probs=[0.5, 0.3, 0.2])
        assert projective_simulable_optimum(ensemble) <= 0.5 + 1e-12

    def test_near_orthogonal_pair_rejected(self):
        eps = 1e-12
        states = np.array([[1, 0, 0], [eps, np.sqrt(1 - eps**2), 0],
                           [0.5, 0.5, np.sqrt(0.5)]], dtype=complex)
        with pytest.raises(ValueError, match="orthogonal"):
            projective_simulable_optimum(Ensemble(states))

    def test_agreement_with_structural_search(self):
        for seed in range(8):
            n = 2 + seed % 3
            ensemble = haar_ensemble(n, n + seed % 2, seed + 60)
            a = projective_simulable_optimum(ensemble)
            b = projective_simulable_optimum_by_search(ensemble)
            assert a == pytest.approx(b, abs=1e-10)


class TestSymmetricEnsembles:
    def test_fourier_case_is_orthonormal(self):
        ens = symmetric_ensemble(3, np.ones(3))
        assert np.max(np.abs(ens.gram() - np.eye(3))) < 1e-12
        assert ens.exact_optimum == pytest.approx(1.0)

    def test_explicit_magnitudes(self):
        ens = symmetric_ensemble(3, np.sqrt([0.9, 0.9, 1.2]))
        assert ens.exact_optimum == pytest.approx(0.9)
        assert usd_success(ens, equal_probability_measurement(ens)).success == \
            pytest.approx(0.9, abs=1e-10)

    def test_gap_parametrization(self):
        ens = symmetric_ensemble_from_gap(4, 0.1)
        assert ens.exact_optimum == pytest.approx(0.9)

    def test_gram_eigenvalues_are_coefficient_magnitudes(self):
        rng = np.random.default_rng(8)
        mags = rng.random(5) + 0.2
        mags *= 5 / mags.sum()
        ens = symmetric_ensemble(5, np.sqrt(mags))
        evs = np.sort(np.linalg.eigvalsh(ens.gram()))
        assert np.allclose(evs, np.sort(mags), atol=1e-10)

    def test_normalization_enforced(self):
        with pytest.raises(InvariantViolation, match="normalization"):
            symmetric_ensemble(3, np.ones(3) * 0.9)

    def test_zero_coefficient_rejected(self):
        with pytest.raises(ValueError, match="non-zero"):
            symmetric_ensemble(2, [np.sqrt(2), 0.0])

    def test_epsilon_range(self):
        with pytest.raises(ValueError, match="epsilon"):
            symmetric_ensemble_from_gap(3, 0.0)


class TestAdvantageBound:
    def test_symmetric_band(self):
        d, eps = 8, 0.05
        ens = symmetric_ensemble_from_gap(d, eps)
        bound = usd_advantage_bound(ens)
        assert bound.bound_ok
        assert d * (1 - eps) - 1e-9 <= bound.ratio <= d + 1e-9

    def test_orthonormal_ratio_one(self):
        bound = usd_advantage_bound(Ensemble(np.eye(4, dtype=complex)))
        assert bound.p_povm_lower == pytest.approx(1.0)
        assert bound.p_sp == pytest.approx(1.0)
        assert bound.ratio == pytest.approx(1.0)
        assert bound.bound_ok

    def test_haar_random_case(self):
        bound = usd_advantage_bound(haar_ensemble(10, 25, 3))
        assert bound.bound_ok
        assert 0 < bound.ratio <= 10 + 1e-9


class TestGluedPostselectionInvariant:
    def test_success_scales_by_one_over_d(self):
        # running the discrimination POVM through the postselection protocol
        # and merging failure with inconclusive costs exactly a factor 1/d
        for seed in range(4):
            n = 3
            ensemble = haar_ensemble(n, n, seed + 90)
            m_star = equal_probability_measurement(ensemble)
            d = m_star.dim
            mq = build_mq(m_star, 1 / d)  # n + 2 outcomes
            glued = apply_postprocessing(mq, PostProcessingMap.glue(n + 2, (n, n + 1)))
            direct = usd_success(ensemble, m_star)
            scaled = usd_success(ensemble, glued)
            assert scaled.success == pytest.approx(direct.success / d, abs=1e-10)
            assert scaled.unambiguous


class TestRandomEnsembleExperiment:
    def test_single_state_always_one(self):
        exp = random_ensemble_experiment(1, 5, trials=10, seed=0)
        assert np.allclose(exp.lambda_values, 1.0, atol=1e-10)

    def test_square_case_nearly_dependent(self):
        exp = random_ensemble_experiment(10, 10, trials=5, seed=1)
        assert exp.mean_lambda_min < 0.1
        assert exp.band_ok

    def test_rejects_too_many_states(self):
        with pytest.raises(ValueError):
            random_ensemble_experiment(6, 5, trials=1, seed=0)

    def test_determinism_and_csv(self):
        a = random_ensemble_experiment(4, 8, trials=6, seed=11)
        b = random_ensemble_experiment(4, 8, trials=6, seed=11)
        assert np.array_equal(a.lambda_values, b.lambda_values)
        csv_text = a.to_csv()
        header = csv_text.splitlines()[0]
        assert header == "d,D,gamma,trial,lambda_min,p_sp_upper,ratio_lower,ratio_upper,seed"
        assert len(csv_text.splitlines()) == 7


class TestEnsembleSerialization:
    def test_round_trip(self):
        ensemble = haar_ensemble(3, 4, 21)
        doc = json.loads(json.dumps(ensemble_to_document(ensemble)))
        back = ensemble_from_document(doc)
        assert np.max(np.abs(back.states - ensemble.states)) < 1e-12
        assert np.allclose(back.probs, ensemble.probs)
