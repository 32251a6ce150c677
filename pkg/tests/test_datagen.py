import numpy as np
import pytest

from ndotomo.datagen import (
    Dataset,
    MeasurementProtocol,
    nine_bases,
    outcome_distribution,
    read_dataset,
    sample_dataset,
    write_dataset,
)
from ndotomo.qcore import (
    DensityMatrix,
    basis_rotation,
    canonical_state,
    depolarize,
    pure_density,
)

from helpers import random_density


class TestNineBases:
    def test_fixed_order(self):
        assert nine_bases() == ["ZZ", "ZX", "ZY", "XZ", "XX", "XY", "YZ", "YX", "YY"]

    def test_count_and_membership(self):
        bases = nine_bases()
        assert len(bases) == 9
        assert "ZZ" in bases and "YY" in bases
        assert len(set(bases)) == 9


class TestOutcomeDistribution:
    def test_bell_zz(self):
        rho = pure_density(canonical_state("bell_phi_plus"))
        assert np.allclose(outcome_distribution(rho, "ZZ"), [0.5, 0, 0, 0.5],
                           atol=1e-12)

    def test_bell_xx_perfect_correlation(self):
        rho = pure_density(canonical_state("bell_phi_plus"))
        assert np.allclose(outcome_distribution(rho, "XX"), [0.5, 0, 0, 0.5],
                           atol=1e-12)

    def test_maximally_mixed_basis_invariant(self):
        rho = DensityMatrix.from_matrix(np.eye(4) / 4.0)
        for basis in nine_bases():
            assert np.allclose(outcome_distribution(rho, basis), 0.25, atol=1e-12)

    def test_sums_to_one(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            rho = DensityMatrix.from_matrix(random_density(rng, 4))
            basis = "".join(rng.choice(list("XYZ"), size=2))
            assert outcome_distribution(rho, basis).sum() == pytest.approx(1.0, abs=1e-10)

    def test_pure_state_amplitude_oracle(self):
        # |U psi|^2 componentwise for pure targets
        rng = np.random.default_rng(29)
        for _ in range(10):
            psi = rng.normal(size=4) + 1j * rng.normal(size=4)
            psi /= np.linalg.norm(psi)
            basis = "".join(rng.choice(list("XYZ"), size=2))
            expected = np.abs(basis_rotation(basis) @ psi) ** 2
            got = outcome_distribution(pure_density(psi), basis)
            assert np.max(np.abs(got - expected)) <= 1e-10


class TestSampleDataset:
    def test_record_counts(self):
        rho = depolarize(canonical_state("bell_phi_plus"), 0.3)
        proto = MeasurementProtocol(tuple(nine_bases()), 250, seed=5)
        ds = sample_dataset(rho, proto)
        assert all(rec.shape == (250, 2) for rec in ds.groups.values())
        assert ds.n_records == 9 * 250

    def test_deterministic(self):
        rho = depolarize(canonical_state("bell_phi_plus"), 0.3)
        proto = MeasurementProtocol(tuple(nine_bases()), 100, seed=11)
        assert sample_dataset(rho, proto).equals(sample_dataset(rho, proto))

    def test_empirical_frequencies_converge(self):
        rho = depolarize(canonical_state("bell_phi_plus"), 0.4)
        proto = MeasurementProtocol(("ZZ", "XY", "YX"), 10**5, seed=3)
        ds = sample_dataset(rho, proto)
        for basis in proto.bases:
            probs = outcome_distribution(rho, basis)
            rec = ds.groups[basis]
            idx = rec.astype(int) @ np.array([2, 1])
            emp = np.bincount(idx, minlength=4) / rec.shape[0]
            assert 0.5 * np.abs(emp - probs).sum() < 0.01


class TestProtocolValidation:
    def test_empty_bases(self):
        with pytest.raises(ValueError):
            MeasurementProtocol((), 10, seed=0)

    def test_mixed_lengths(self):
        with pytest.raises(ValueError):
            MeasurementProtocol(("ZZ", "XYZ"), 10, seed=0)

    def test_zero_samples(self):
        with pytest.raises(ValueError):
            MeasurementProtocol(("ZZ",), 0, seed=0)


class TestDatasetIO:
    def test_roundtrip_random(self, tmp_path):
        rng = np.random.default_rng(41)
        for i in range(5):
            groups = {
                basis: rng.integers(0, 2, size=(int(rng.integers(1, 30)), 2)).astype(np.uint8)
                for basis in rng.choice(nine_bases(), size=4, replace=False)
            }
            ds = Dataset(2, groups)
            path = tmp_path / f"ds{i}.txt"
            write_dataset(ds, path)
            assert read_dataset(path).equals(ds)

    def test_single_line_parse(self, tmp_path):
        path = tmp_path / "one.txt"
        path.write_text("XY 01\n")
        ds = read_dataset(path)
        assert list(ds.groups) == ["XY"]
        assert np.array_equal(ds.groups["XY"], [[0, 1]])

    def test_count_table_expansion(self, tmp_path):
        path = tmp_path / "counts.txt"
        path.write_text("# counts\nZZ 00 3\nZZ 11 2\nXY 10 1\n")
        ds = read_dataset(path)
        assert ds.groups["ZZ"].shape == (5, 2)
        assert np.array_equal(ds.groups["ZZ"][:3], [[0, 0]] * 3)
        assert ds.groups["XY"].shape == (1, 2)

    def test_bad_basis_character(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("ZZ 00\nXQ 01\n")
        with pytest.raises(ValueError, match=r"line 2.*'Q'"):
            read_dataset(path)

    def test_bad_outcome_character(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("ZZ 0a\n")
        with pytest.raises(ValueError, match=r"line 1.*'a'"):
            read_dataset(path)

    def test_length_mismatch(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("ZZ 011\n")
        with pytest.raises(ValueError, match="line 1"):
            read_dataset(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("# nothing here\n")
        with pytest.raises(ValueError, match="no records"):
            read_dataset(path)
