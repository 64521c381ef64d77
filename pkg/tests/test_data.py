import numpy as np
import pytest

from setfusion.data import (
    DatasetSchema,
    apply_missingness,
    complete,
    export_text,
    generate,
    load_dataset,
    missing_fraction,
    save_dataset,
    split,
    to_set,
)
from setfusion.errors import DataFormatError


def schema2(r=8, bags=()):
    return DatasetSchema(
        num_modalities=2, modality_names=["m0", "m1"], payload_width=r,
        num_classes=2, bag_modalities=bags,
    )


def schema3(r=6):
    return DatasetSchema(
        num_modalities=3, modality_names=["a", "b", "c"], payload_width=r, num_classes=2,
    )


class TestSchema:
    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError):
            DatasetSchema(2, ["x", "x"], 4, 2)

    def test_bag_index_out_of_range(self):
        with pytest.raises(ValueError):
            DatasetSchema(2, ["a", "b"], 4, 2, bag_modalities=(2,))

    def test_roundtrip_dict(self):
        s = schema2(bags=(1,))
        assert DatasetSchema.from_dict(s.to_dict()) == s


class TestGenerate:
    def test_zero_noise_collapses_within_class(self):
        samples = generate(schema2(), n=8, seed=0, class_sep=5.0, noise_sigma=0.0)
        by_class = {}
        for s in samples:
            key = (s.label, 0)
            ref = by_class.setdefault(key, s.payloads[0])
            np.testing.assert_array_equal(s.payloads[0], ref)

    def test_same_seed_bitwise_identical(self):
        a = generate(schema2(bags=(1,)), n=12, seed=42, noise_sigma=0.5)
        b = generate(schema2(bags=(1,)), n=12, seed=42, noise_sigma=0.5)
        for sa, sb in zip(a, b):
            assert sa.label == sb.label and sa.sample_id == sb.sample_id
            np.testing.assert_array_equal(sa.payloads[0], sb.payloads[0])
            assert len(sa.payloads[1]) == len(sb.payloads[1])
            for ia, ib in zip(sa.payloads[1], sb.payloads[1]):
                np.testing.assert_array_equal(ia, ib)

    def test_balanced_classes(self):
        samples = generate(schema2(), n=101, seed=1)
        counts = np.bincount([s.label for s in samples])
        assert abs(counts[0] - counts[1]) <= 1

    def test_nearest_centroid_oracle_learnability(self):
        # fit class means on concatenated payloads, classify by distance
        samples = generate(schema2(r=32), n=400, seed=2, class_sep=10.0, noise_sigma=0.5)
        stacked = np.stack([np.concatenate(s.payloads) for s in samples])
        labels = np.array([s.label for s in samples])
        means = np.stack([stacked[labels == y].mean(axis=0) for y in (0, 1)])
        dists = np.stack([np.linalg.norm(stacked - means[y], axis=1) for y in (0, 1)])
        accuracy = float(np.mean(dists.argmin(axis=0) == labels))
        assert accuracy >= 0.99

    def test_bag_sizes_within_range(self):
        samples = generate(schema2(bags=(0,)), n=30, seed=3, bag_size_range=(2, 5))
        sizes = {len(s.payloads[0]) for s in samples}
        assert sizes <= {2, 3, 4, 5} and len(sizes) > 1

    def test_per_modality_noise_sigmas(self):
        samples = generate(schema2(), n=200, seed=4, class_sep=10.0, noise_sigma=[0.0, 2.0])
        zero_noise = [s.payloads[0] for s in samples if s.label == 0]
        assert all(np.array_equal(p, zero_noise[0]) for p in zero_noise)
        noisy = np.stack([s.payloads[1] for s in samples if s.label == 0])
        assert noisy.std(axis=0).mean() == pytest.approx(2.0, rel=0.15)

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            generate(schema2(), n=0, seed=0)
        with pytest.raises(ValueError):
            generate(schema2(), n=4, seed=0, class_sep=0.0)
        with pytest.raises(ValueError):
            generate(schema2(), n=4, seed=0, noise_sigma=-1.0)
        with pytest.raises(ValueError):
            generate(schema2(), n=4, seed=0, noise_sigma=[0.5])


class TestMissingness:
    def test_rate_zero_keeps_everything(self):
        samples = generate(schema2(), n=10, seed=5)
        masked = apply_missingness(samples, rate=0.0, mechanism="mcar", seed=0)
        for m, s in zip(masked, samples):
            assert m.mask.sum() == 0
            for slot, payload in zip(m.slots, s.payloads):
                np.testing.assert_array_equal(slot, payload)

    def test_identity_between_mask_and_slots(self):
        samples = generate(schema3(), n=50, seed=6)
        masked = apply_missingness(samples, rate=0.4, mechanism="mcar", seed=7)
        for m, s in zip(masked, samples):
            for i in range(3):
                if m.mask[i]:
                    assert m.slots[i] is None
                else:
                    np.testing.assert_array_equal(m.slots[i], s.payloads[i])

    def test_modality_k_only_frequency(self):
        samples = generate(schema2(r=2), n=10000, seed=8)
        masked = apply_missingness(samples, rate=0.5, mechanism="modality_k_only", seed=9, k=1)
        rates = missing_fraction(masked)
        assert rates[0] == 0.0
        assert abs(rates[1] - 0.5) < 0.02

    def test_mcar_empirical_rate_converges_to_p(self):
        schema4 = DatasetSchema(4, ["a", "b", "c", "d"], 2, 2)
        samples = generate(schema4, n=10000, seed=10)
        masked = apply_missingness(samples, rate=0.2, mechanism="mcar", seed=11)
        rates = missing_fraction(masked)
        assert np.all(np.abs(rates - 0.2) < 0.02)

    def test_mcar_rate_matches_redraw_conditional_formula(self):
        # with fully-missing draws redrawn, the per-modality rate is
        # p (1 - p^(d-1)) / (1 - p^d)
        samples = generate(schema3(r=2), n=10000, seed=10)
        masked = apply_missingness(samples, rate=0.3, mechanism="mcar", seed=11)
        expected = 0.3 * (1 - 0.3 ** 2) / (1 - 0.3 ** 3)
        rates = missing_fraction(masked)
        assert np.all(np.abs(rates - expected) < 0.015)

    def test_no_sample_fully_missing(self):
        samples = generate(schema2(r=2), n=5000, seed=12)
        masked = apply_missingness(samples, rate=0.9, mechanism="mcar", seed=13)
        assert all(m.q >= 1 for m in masked)

    def test_invalid_rate(self):
        samples = generate(schema2(), n=4, seed=14)
        with pytest.raises(ValueError):
            apply_missingness(samples, rate=1.0, mechanism="mcar", seed=0)

    def test_unknown_mechanism_and_missing_k(self):
        samples = generate(schema2(), n=4, seed=15)
        with pytest.raises(ValueError):
            apply_missingness(samples, rate=0.5, mechanism="nmar", seed=0)
        with pytest.raises(ValueError):
            apply_missingness(samples, rate=0.5, mechanism="modality_k_only", seed=0)


class TestToSet:
    def test_complete_sample_keeps_all_modalities(self):
        s = schema3()
        masked = complete(generate(s, n=1, seed=16))
        obs = to_set(masked[0], s)
        assert obs.q == 3
        assert [m.index for _, m in obs.elements] == [0, 1, 2]
        assert [m.name for _, m in obs.elements] == ["a", "b", "c"]

    def test_middle_modality_missing(self):
        s = schema3()
        masked = complete(generate(s, n=1, seed=17))[0]
        masked.mask = np.array([0, 1, 0], dtype=np.uint8)
        masked.slots[1] = None
        obs = to_set(masked, s)
        assert obs.q == 2
        assert [m.index for _, m in obs.elements] == [0, 2]

    def test_element_count_matches_mask_count(self):
        s = schema3()
        samples = generate(s, n=200, seed=18)
        masked = apply_missingness(samples, rate=0.5, mechanism="mcar", seed=19)
        total_q = sum(to_set(m, s).q for m in masked)
        total_observed = sum(3 - int(m.mask.sum()) for m in masked)
        assert total_q == total_observed

    def test_labels_and_ids_carried(self):
        s = schema2()
        masked = complete(generate(s, n=3, seed=20))
        for m in masked:
            obs = to_set(m, s)
            assert obs.label == m.label and obs.sample_id == m.sample_id


class TestSplit:
    def test_canonical_sizes(self):
        samples = list(range(100))
        train, val, test = split(samples, (0.6, 0.1, 0.3), seed=0)
        assert (len(train), len(val), len(test)) == (60, 10, 30)

    def test_disjoint_and_exhaustive(self):
        samples = [f"id{i}" for i in range(97)]
        train, val, test = split(samples, (0.6, 0.1, 0.3), seed=1)
        assert len(train) + len(val) + len(test) == 97
        assert set(train) | set(val) | set(test) == set(samples)
        assert not (set(train) & set(val) or set(train) & set(test) or set(val) & set(test))

    def test_seed_reproducibility(self):
        samples = list(range(50))
        assert split(samples, (0.6, 0.1, 0.3), seed=7) == split(samples, (0.6, 0.1, 0.3), seed=7)
        assert split(samples, (0.6, 0.1, 0.3), seed=7) != split(samples, (0.6, 0.1, 0.3), seed=8)

    def test_bad_ratios(self):
        with pytest.raises(ValueError):
            split([1, 2, 3], (0.5, 0.2), seed=0)
        with pytest.raises(ValueError):
            split([1, 2, 3], (0.5, 0.2, 0.2), seed=0)


class TestContainer:
    def test_roundtrip_bitwise(self, tmp_path):
        s = schema2(bags=(1,))
        samples = generate(s, n=20, seed=21)
        masked = apply_missingness(samples, rate=0.4, mechanism="mcar", seed=22)
        path = tmp_path / "data.sfds"
        save_dataset(path, s, masked)
        schema_back, loaded = load_dataset(path)
        assert schema_back == s
        assert len(loaded) == len(masked)
        for a, b in zip(masked, loaded):
            assert a.sample_id == b.sample_id and a.label == b.label
            np.testing.assert_array_equal(a.mask, b.mask)
            for i in range(2):
                if a.mask[i]:
                    assert b.slots[i] is None
                elif s.is_bag(i):
                    for ia, ib in zip(a.slots[i], b.slots[i]):
                        assert ia.tobytes() == ib.tobytes()
                else:
                    assert a.slots[i].tobytes() == b.slots[i].tobytes()

    def test_rewrite_is_byte_identical(self, tmp_path):
        s = schema2()
        masked = complete(generate(s, n=5, seed=23))
        p1, p2 = tmp_path / "a.sfds", tmp_path / "b.sfds"
        save_dataset(p1, s, masked)
        save_dataset(p2, s, masked)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.sfds"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(DataFormatError, match="magic"):
            load_dataset(path)

    def test_text_export_row_count(self, tmp_path):
        s = schema2(bags=(1,))
        masked = apply_missingness(generate(s, n=6, seed=24), 0.3, "mcar", seed=25)
        out = tmp_path / "dump.csv"
        export_text(out, s, masked)
        lines = out.read_text().strip().splitlines()
        expected_rows = sum(
            1 if m.mask[i] else (len(m.slots[i]) if s.is_bag(i) else 1)
            for m in masked for i in range(2)
        )
        assert len(lines) == expected_rows + 1  # header
