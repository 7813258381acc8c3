import numpy as np
import pytest

from povmsim import fixtures
from povmsim.core import (
    QuantumState,
    born_probabilities,
    random_povm,
    random_rank_one_povm,
)
from povmsim.simulation import PostProcessingMap, apply_postprocessing
from povmsim.tomography import (
    TomographyRecord,
    bias_mitigated_statistics,
    operational_distance,
    probe_states,
    reconstruct_effect,
    reconstruct_povm,
)


class TestReconstructEffect:
    def test_tetrahedral_second_effect(self, tetrahedral):
        m2 = tetrahedral.effects[1]
        freqs = [np.vdot(p.vector, m2 @ p.vector).real for p in probe_states()]
        bloch = reconstruct_effect(freqs)
        assert bloch.alpha == pytest.approx(0.5, abs=1e-12)
        assert np.allclose(bloch.n, [2 * np.sqrt(2) / 3, 0.0, -1 / 3], atol=1e-12)

    def test_isotropic_effect(self):
        bloch = reconstruct_effect([0.5, 0.5, 0.5, 0.5])
        assert bloch.alpha == pytest.approx(1.0)
        assert np.max(np.abs(bloch.n)) < 1e-12

    def test_zero_projector(self):
        bloch = reconstruct_effect([1.0, 0.0, 0.5, 0.5])
        assert bloch.alpha == pytest.approx(1.0)
        assert np.allclose(bloch.n, [0, 0, 1], atol=1e-12)

    def test_no_counts_is_an_error(self):
        with pytest.raises(ValueError, match="alpha"):
            reconstruct_effect([0.0, 0.0, 0.5, 0.5])


class TestReconstructPovm:
    def test_trine_noiseless_round_trip(self, trine):
        record = TomographyRecord.from_born(trine)
        recon = reconstruct_povm(record)
        for got, want in zip(recon.effects, trine.effects):
            assert np.max(np.abs(got - want)) < 1e-12
        assert recon.completeness_defect < 1e-12
        assert recon.physical

    def test_round_trip_random_povms(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            povm = random_povm(2, int(rng.integers(2, 6)), rng, rank=1)
            record = TomographyRecord.from_born(povm)
            recon = reconstruct_povm(record)
            for got, want in zip(recon.effects, povm.effects):
                assert np.max(np.abs(got - want)) < 1e-10

    def test_fixture_reconstruction_identity(self):
        # feeding the bundled reconstruction's own statistics back through
        # the inversion must return those matrices exactly
        raw = fixtures.reconstruction("tetrahedral", "postselection")
        probes = probe_states()
        table = np.array([[np.vdot(p.vector, m @ p.vector).real for m in raw]
                          for p in probes])
        record = TomographyRecord(table, row_atol=5e-3)
        recon = reconstruct_povm(record)
        for got, want in zip(recon.effects, raw):
            assert np.max(np.abs(got - want)) < 1e-12

    def test_unphysical_is_warned_not_raised(self):
        table = np.array([
            [0.70, 0.15, 0.15],
            [0.20, 0.40, 0.40],
            [0.90, 0.05, 0.05],
            [0.55, 0.225, 0.225],
        ])  # first outcome reconstructs with |n| > 1
        recon = reconstruct_povm(TomographyRecord(table))
        assert recon.unphysical_outcomes == (0,)
        assert not recon.physical


class TestOperationalDistance:
    def test_self_distance_zero(self, all_fixture_povms):
        for povm in all_fixture_povms.values():
            assert operational_distance(povm, povm) == pytest.approx(0.0, abs=1e-12)

    def test_table1_values(self, tetrahedral, trine):
        d = operational_distance(tetrahedral,
                                 fixtures.reconstruction("tetrahedral", "postselection"))
        assert d == pytest.approx(0.023, abs=0.003)
        d = operational_distance(trine, fixtures.reconstruction("trine", "naimark"))
        assert d == pytest.approx(0.141, abs=0.003)

    def test_symmetry(self, tetrahedral):
        other = fixtures.reconstruction("tetrahedral", "naimark")
        assert operational_distance(tetrahedral, other) == \
            pytest.approx(operational_distance(other, tetrahedral), abs=1e-12)

    def test_triangle_inequality_on_fixtures(self, tetrahedral):
        a = tetrahedral
        b = fixtures.reconstruction("tetrahedral", "postselection")
        c = fixtures.reconstruction("tetrahedral", "naimark")
        ab = operational_distance(a, b)
        bc = operational_distance(b, c)
        ac = operational_distance(a, c)
        assert ac <= ab + bc + 1e-12

    def test_zero_iff_equal(self, trine):
        perturbed = [m.copy() for m in trine.effects]
        perturbed[0] = perturbed[0] + np.diag([1e-3, -1e-3])
        assert operational_distance(trine, perturbed) > 1e-4

    def test_subset_complement_symmetry(self):
        rng = np.random.default_rng(2)
        m = random_rank_one_povm(2, 4, rng)
        n = random_rank_one_povm(2, 4, rng)
        diffs = [a - b for a, b in zip(m.effects, n.effects)]
        from povmsim.tomography import operator_norm_hermitian
        for subset in ((0,), (0, 1), (1, 3), (2,)):
            comp = tuple(i for i in range(4) if i not in subset)
            a = operator_norm_hermitian(sum(diffs[i] for i in subset))
            b = operator_norm_hermitian(sum(diffs[i] for i in comp))
            assert a == pytest.approx(b, abs=1e-12)

    def test_padding_against_fewer_outcomes(self, trine):
        rec4 = fixtures.reconstruction("trine", "naimark")
        assert len(rec4) == 4
        d = operational_distance(trine, rec4)  # ideal padded with a zero effect
        assert d > 0.1

    def test_gluing_monotonicity(self, tetrahedral):
        rec = fixtures.reconstruction("tetrahedral", "naimark")
        base = operational_distance(tetrahedral, rec)
        glue = PostProcessingMap.glue(4, (2, 3))
        glued_ideal = apply_postprocessing(tetrahedral, glue)
        glued_rec = [rec[0], rec[1], rec[2] + rec[3]]
        assert operational_distance(glued_ideal, glued_rec) <= base + 1e-12

    def test_dimension_mismatch(self, trine):
        with pytest.raises(ValueError, match="dimension"):
            operational_distance(trine, [np.eye(3)])


class TestBiasMitigation:
    def test_unbiased_inputs_unchanged(self, trine):
        record = TomographyRecord.from_born(trine)
        # pad trine record to a 4-outcome register table
        table = np.hstack([record.frequencies, np.zeros((4, 1))])
        base = TomographyRecord(table)
        flipped = {mask: TomographyRecord(table[:, [i ^ mask for i in range(4)]])
                   for mask in range(4)}
        mitigated = bias_mitigated_statistics(flipped)
        assert np.max(np.abs(mitigated.frequencies - base.frequencies)) < 1e-12

    def test_asymmetric_bias_becomes_symmetric_confusion(self):
        # averaging the relabelled x-variant turns the one-sided readout bias
        # into the symmetric confusion (K + XKX)/2, removing the 0/1 skew
        truth = np.array([[0.3, 0.7], [0.7, 0.3], [0.5, 0.5], [0.2, 0.8]])
        b = 0.1

        def readout(p):
            return np.column_stack([p[:, 0] + b * p[:, 1], (1 - b) * p[:, 1]])

        mitigated = bias_mitigated_statistics({
            0: TomographyRecord(readout(truth)),
            1: TomographyRecord(readout(truth[:, ::-1])),
        })
        symmetric = np.array([[1 - b / 2, b / 2], [b / 2, 1 - b / 2]])
        want = truth @ symmetric.T
        assert np.max(np.abs(mitigated.frequencies - want)) < 1e-12
        # balanced rows are fixed points: no residual there at all
        assert np.max(np.abs(mitigated.frequencies[2] - truth[2])) < 1e-12

    def test_missing_variant_rejected(self):
        table = np.full((4, 4), 0.25)
        with pytest.raises(ValueError, match="mask"):
            bias_mitigated_statistics({0: TomographyRecord(table),
                                       1: TomographyRecord(table)})


class TestRecords:
    def test_row_sums_enforced(self):
        with pytest.raises(ValueError, match="sum to 1"):
            TomographyRecord(np.full((4, 3), 0.2))

    def test_postselection_renormalizes(self, tetrahedral):
        from povmsim.simulation import build_mq
        mq = build_mq(tetrahedral, 0.5)
        record = TomographyRecord.from_born(mq)
        kept = record.postselected(4)
        oracle = TomographyRecord.from_born(tetrahedral)
        assert np.max(np.abs(kept.frequencies - oracle.frequencies)) < 1e-12

    def test_csv_export(self, trine):
        text = TomographyRecord.from_born(trine).to_csv()
        lines = text.strip().splitlines()
        assert lines[0] == "probe,outcome,count,shots"
        assert len(lines) == 1 + 4 * 3

    def test_csv_export_with_shots(self, trine):
        record = TomographyRecord.from_born(trine)
        counted = TomographyRecord(record.frequencies, shots_per_probe=[300] * 4)
        rows = counted.to_csv().strip().splitlines()[1:]
        counts = [int(r.split(",")[2]) for r in rows]
        assert counts[0] == 200  # probe z0, outcome 1: frequency 2/3 of 300

    def test_distance_table_csv(self, tetrahedral):
        from povmsim.tomography import distance_table_csv
        d = operational_distance(tetrahedral,
                                 fixtures.reconstruction("tetrahedral", "naimark"))
        text = distance_table_csv([("tetrahedral", "naimark", d)])
        lines = text.strip().splitlines()
        assert lines[0] == "povm,method,distance"
        assert lines[1].startswith("tetrahedral,naimark,0.118")
