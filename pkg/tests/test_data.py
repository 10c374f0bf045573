from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fusetl.data import (
    AugmentConfig,
    DatasetManifest,
    augment,
    batch_iter,
    denormalize,
    fuse_datasets,
    generate_synthetic,
    hflip,
    load_image,
    normalize,
    resize_bilinear,
    split_dataset,
    split_sizes,
    write_ppm,
)
from fusetl.data.manifest import SampleRecord
from fusetl.errors import (
    CollisionError,
    DecodeError,
    FormatError,
    InsufficientDataError,
    ValidationError,
)


def make_tree(root, counts):
    """Touch ``counts`` empty .ppm files in the four class/modality folders."""
    dirs = []
    for (modality, label), n in zip(
            [("CT", "COVID"), ("CT", "NonCOVID"), ("XRAY", "COVID"), ("XRAY", "NonCOVID")], counts):
        d = root / modality / label
        d.mkdir(parents=True)
        for i in range(n):
            (d / f"img_{i:05d}.ppm").touch()
        dirs.append(d)
    return dirs


def toy_manifest(n_pos, n_neg):
    recs = [SampleRecord(f"p/{i:05d}.ppm", "COVID", "CT") for i in range(n_pos)]
    recs += [SampleRecord(f"n/{i:05d}.ppm", "NonCOVID", "XRAY") for i in range(n_neg)]
    return DatasetManifest(recs)


class TestFuse:
    def test_one_per_folder(self, tmp_path):
        m = fuse_datasets(*make_tree(tmp_path, (1, 1, 1, 1)))
        assert len(m) == 4
        assert m.counts(("label",)) == Counter({("COVID",): 2, ("NonCOVID",): 2})
        assert {r.split for r in m} == {"unassigned"}

    def test_full_size_counts(self, tmp_path):
        m = fuse_datasets(*make_tree(tmp_path, (5427, 2628, 4044, 5500)))
        by_label = m.counts(("label",))
        assert by_label[("COVID",)] == 9471
        assert by_label[("NonCOVID",)] == 8128
        assert len(m) == 17599
        assert m.counts()[("COVID", "XRAY")] == 4044

    def test_deterministic_bytes(self, tmp_path):
        dirs = make_tree(tmp_path, (3, 2, 2, 4))
        fuse_datasets(*dirs).save(tmp_path / "a.csv")
        fuse_datasets(*dirs).save(tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_same_folder_twice(self, tmp_path):
        dirs = make_tree(tmp_path, (1, 1, 1, 1))
        with pytest.raises(CollisionError):
            fuse_datasets(dirs[0], dirs[1], dirs[0], dirs[3])

    def test_empty_folder(self, tmp_path):
        dirs = make_tree(tmp_path, (1, 0, 1, 1))
        with pytest.raises(ValidationError, match="no images"):
            fuse_datasets(*dirs)

    def test_save_load_round_trip(self, tmp_path):
        m = fuse_datasets(*make_tree(tmp_path, (2, 2, 2, 2)))
        m.save(tmp_path / "sub" / "manifest.csv")
        back = DatasetManifest.load(tmp_path / "sub" / "manifest.csv")
        assert len(back) == 8
        assert all((back.root / r.path).resolve().exists() for r in back)

    def test_bad_header(self, tmp_path):
        (tmp_path / "m.csv").write_text("file,class\n")
        with pytest.raises(FormatError):
            DatasetManifest.load(tmp_path / "m.csv")

    def test_bad_label(self):
        with pytest.raises(ValidationError):
            SampleRecord("a.ppm", "Pneumonia", "CT")


class TestSplit:
    @pytest.mark.parametrize("n,sizes", [(100, (60, 20, 20)), (5, (3, 1, 1)),
                                         (9471, (5683, 1894, 1894)), (8128, (4878, 1625, 1625))])
    def test_sizes(self, n, sizes):
        assert split_sizes(n) == sizes

    def test_stratified_counts(self):
        m = split_dataset(toy_manifest(100, 5), seed=3)
        c = m.split_counts()
        assert (c["train", "COVID"], c["val", "COVID"], c["test", "COVID"]) == (60, 20, 20)
        assert (c["train", "NonCOVID"], c["val", "NonCOVID"], c["test", "NonCOVID"]) == (3, 1, 1)

    def test_too_small(self):
        with pytest.raises(InsufficientDataError):
            split_dataset(toy_manifest(10, 2), seed=0)

    def test_seed_determinism(self):
        a = split_dataset(toy_manifest(40, 30), seed=11).to_csv()
        assert a == split_dataset(toy_manifest(40, 30), seed=11).to_csv()
        assert a != split_dataset(toy_manifest(40, 30), seed=12).to_csv()

    @settings(max_examples=40, deadline=None)
    @given(st.integers(3, 200), st.integers(3, 200), st.integers(0, 2**32 - 1))
    def test_partition(self, n_pos, n_neg, seed):
        m = toy_manifest(n_pos, n_neg)
        out = split_dataset(m, seed=seed)
        assert sorted(r.path for r in out) == sorted(r.path for r in m)
        assert {r.split for r in out} <= {"train", "val", "test"}
        for label, n in (("COVID", n_pos), ("NonCOVID", n_neg)):
            tr, va, te = split_sizes(n)
            c = out.split_counts()
            assert (c["train", label], c["val", label], c["test", label]) == (tr, va, te)


class TestImages:
    def test_white_p6(self, tmp_path):
        write_ppm(tmp_path / "w.ppm", np.full((4, 5, 3), 255, np.uint8))
        img = load_image(tmp_path / "w.ppm")
        assert img.shape == (3, 4, 5)
        np.testing.assert_array_equal(img, 1.0)

    def test_gray_p5_replicated(self, tmp_path):
        write_ppm(tmp_path / "g.pgm", np.full((3, 3), 128, np.uint8))
        img = load_image(tmp_path / "g.pgm")
        assert img.shape == (3, 3, 3)
        np.testing.assert_array_equal(img, 128 / 255)

    def test_comment_in_header(self, tmp_path):
        (tmp_path / "c.ppm").write_bytes(b"P5\n# made by hand\n2 1\n255\n\x00\xff")
        np.testing.assert_array_equal(load_image(tmp_path / "c.ppm")[0], [[0.0, 1.0]])

    def test_truncated(self, tmp_path):
        write_ppm(tmp_path / "t.ppm", np.zeros((4, 4, 3), np.uint8))
        raw = (tmp_path / "t.ppm").read_bytes()
        (tmp_path / "t.ppm").write_bytes(raw[:-5])
        with pytest.raises(DecodeError, match="t.ppm"):
            load_image(tmp_path / "t.ppm")

    def test_garbage(self, tmp_path):
        (tmp_path / "x.ppm").write_bytes(b"\x89PNG....")
        with pytest.raises(DecodeError):
            load_image(tmp_path / "x.ppm")

    def test_sixteen_bit_rejected(self, tmp_path):
        (tmp_path / "d.pgm").write_bytes(b"P5 1 1 65535\n\x00\x00")
        with pytest.raises(DecodeError, match="8-bit"):
            load_image(tmp_path / "d.pgm")

    def test_resize_constant_and_identity(self, rng):
        img = np.full((3, 7, 9), 0.25)
        np.testing.assert_allclose(resize_bilinear(img, 4), 0.25)
        x = rng.random((3, 5, 5))
        np.testing.assert_array_equal(resize_bilinear(x, 5), x)

    def test_resize_downsample_by_two_averages(self, rng):
        # half-pixel centers land exactly between source pixel pairs
        x = rng.random((1, 4, 4))
        expected = x.reshape(1, 2, 2, 2, 2).mean(axis=(2, 4))
        np.testing.assert_allclose(resize_bilinear(x, 2), expected, atol=1e-15)


class TestAugment:
    cfg = AugmentConfig(target_size=8)

    def test_mean_image_maps_to_zero(self):
        img = np.broadcast_to(np.array(self.cfg.mean)[:, None, None], (3, 8, 8))
        np.testing.assert_allclose(augment(img, self.cfg), 0.0, atol=1e-12)

    def test_white_red_channel(self):
        out = augment(np.ones((3, 8, 8)), self.cfg)
        np.testing.assert_allclose(out[0], (1 - 0.485) / 0.229, atol=1e-12)
        assert out[0, 0, 0] == pytest.approx(2.24891, abs=1e-5)

    def test_flip_involution(self, rng):
        x = rng.random((3, 6, 7))
        np.testing.assert_array_equal(hflip(hflip(x)), x)
        np.testing.assert_array_equal(hflip(x)[:, :, 0], x[:, :, -1])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_normalize_inverse(self, seed):
        x = np.random.default_rng(seed).random((3, 5, 5))
        assert np.max(np.abs(denormalize(normalize(x, self.cfg), self.cfg) - x)) <= 1e-12

    def test_eval_is_pure(self, rng):
        x = rng.random((3, 8, 8))
        a = augment(x, self.cfg, np.random.default_rng(0), training=False)
        b = augment(x, self.cfg, np.random.default_rng(1), training=False)
        np.testing.assert_array_equal(a, b)

    def test_training_flips_with_probability_one(self, rng):
        x = rng.random((3, 8, 8))
        cfg = AugmentConfig(target_size=8, hflip_prob=1.0)
        np.testing.assert_array_equal(augment(x, cfg, rng, training=True), normalize(hflip(x), cfg))


class TestSynthetic:
    def test_layout_and_determinism(self, tmp_path):
        m = generate_synthetic(tmp_path / "a", 5, size=8, seed=2)
        generate_synthetic(tmp_path / "b", 5, size=8, seed=2)
        assert len(m) == 10
        assert m.counts()[("COVID", "CT")] == 3 and m.counts()[("COVID", "XRAY")] == 2
        a = (tmp_path / "a" / "manifest.csv").read_bytes()
        assert a == (tmp_path / "b" / "manifest.csv").read_bytes()
        for r in m:
            assert (tmp_path / "a" / r.path).read_bytes() == (tmp_path / "b" / r.path).read_bytes()

    def test_classes_separable_on_average(self, tmp_path):
        m = generate_synthetic(tmp_path, 300, size=16, seed=0)
        means = {"COVID": [], "NonCOVID": []}
        for r in m:
            means[r.label].append(load_image(tmp_path / r.path).mean())
        assert np.mean(means["COVID"]) > np.mean(means["NonCOVID"])

    def test_too_few(self, tmp_path):
        with pytest.raises(ValidationError):
            generate_synthetic(tmp_path, 2)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    m = generate_synthetic(root, 35, size=8, seed=1)
    return DatasetManifest([SampleRecord(r.path, r.label, r.modality, "train") for r in m],
                           root=root)


class TestBatching:

    def test_batch_sizes(self, corpus):
        cfg = AugmentConfig(target_size=8)
        sizes = [len(y) for _, y in batch_iter(corpus, "train", 32, config=cfg)]
        assert sizes == [32, 32, 6]

    def test_shapes_and_labels(self, corpus):
        cfg = AugmentConfig(target_size=4)
        x, y = next(batch_iter(corpus, "train", 10, config=cfg))
        assert x.shape == (10, 3, 4, 4)
        assert set(np.unique(y)) <= {0.0, 1.0}

    def test_same_seed_same_epoch(self, corpus):
        cfg = AugmentConfig(target_size=8)
        a = [y for _, y in batch_iter(corpus, "train", 16, 5, 3, cfg)]
        b = [y for _, y in batch_iter(corpus, "train", 16, 5, 3, cfg)]
        for ya, yb in zip(a, b):
            np.testing.assert_array_equal(ya, yb)

    def test_epochs_reshuffle(self, corpus):
        def order(seed, epoch):
            xs = [x for x, _ in batch_iter(corpus, "train", 70, seed, epoch,
                                           AugmentConfig(target_size=8, hflip_prob=0.0))]
            return xs[0][:, 0, 0, 0]
        same = sum(np.array_equal(order(s, 0), order(s, 1)) for s in range(100))
        assert same == 0

    def test_empty_split(self, corpus):
        with pytest.raises(ValidationError):
            next(batch_iter(corpus, "test"))
