"""Descriptor extraction, redundancy masking, fusion, and gallery files."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hffd.dataset import FaceImage
from hffd.descriptor import (FreqFeature, Hffd, enroll_class,
                             extract_freq_features, fuse_hffd,
                             gallery_from_bytes, gallery_to_bytes,
                             load_gallery, probe_hffd, redundancy_mask,
                             save_gallery)

RNG = np.random.default_rng(99)


def face(pixels, class_id=0, pose_index=0):
    return FaceImage(pixels=np.asarray(pixels, dtype=np.float64),
                     class_id=class_id, pose_index=pose_index, source_path="mem")


def feat(values, class_id=0, pose_index=0):
    return FreqFeature(values=np.asarray(values, dtype=np.float64),
                       class_id=class_id, pose_index=pose_index)


def random_face(class_id=0, pose_index=0, n=32):
    return face(RNG.random((n, n)), class_id, pose_index)


class TestExtract:
    def test_constant_image_only_dc(self):
        v = 0.3
        f = extract_freq_features(face(np.full((128, 128), v)), k_coeff=60)
        # ll band is the constant 2v, so its DC is 64 * 2v; every other
        # coefficient of every band vanishes
        assert f.values[0] == pytest.approx(128 * v, rel=1e-12)
        assert np.max(np.abs(f.values[1:])) <= 1e-12

    def test_identical_inputs_identical_features(self):
        img = random_face()
        a = extract_freq_features(img, k_coeff=16)
        b = extract_freq_features(img, k_coeff=16)
        assert np.array_equal(a.values, b.values)

    def test_default_k_gives_240(self):
        f = extract_freq_features(face(np.zeros((128, 128))))
        assert len(f) == 240

    def test_band_concatenation_order(self):
        img = random_face(n=8)
        f = extract_freq_features(img, k_coeff=4)
        from hffd.transforms import dct2, dwt_haar_2d, zigzag_take
        bands = dwt_haar_2d(img.pixels)
        expected = np.concatenate([zigzag_take(dct2(b), 4) for b in
                                   (bands.ll, bands.lh, bands.hl, bands.hh)])
        assert np.array_equal(f.values, expected)

    def test_provenance_carried(self):
        f = extract_freq_features(random_face(class_id=7, pose_index=3), 8)
        assert (f.class_id, f.pose_index) == (7, 3)

    def test_k_too_large_propagates(self):
        with pytest.raises(ValueError):
            extract_freq_features(face(np.zeros((8, 8))), k_coeff=17)


class TestRedundancyMask:
    def test_self_fully_redundant(self):
        f = feat(RNG.normal(size=12))
        assert np.all(redundancy_mask(f, f, 0.05) == 0)

    def test_tau_zero_distinct_all_kept(self):
        base = feat([1.0, 2.0, 3.0])
        other = feat([1.5, 2.5, 3.5])
        assert np.all(redundancy_mask(other, base, 0.0) == 1)

    def test_threshold_worked_example(self):
        base = feat([10.0, 10.0])
        other = feat([10.4, 12.0])
        assert redundancy_mask(other, base, 0.05).tolist() == [0, 1]

    def test_near_zero_base_uses_absolute_floor(self):
        base = feat([0.0])
        other = feat([5e-8])  # within tau * 1e-6 of zero
        assert redundancy_mask(other, base, 0.1).tolist() == [0]

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="length"):
            redundancy_mask(feat([1.0]), feat([1.0, 2.0]), 0.05)

    def test_negative_tau_rejected(self):
        with pytest.raises(ValueError):
            redundancy_mask(feat([1.0]), feat([1.0]), -0.1)


class TestFuse:
    def test_identical_aux_zeroed(self):
        base = feat(RNG.normal(size=6))
        d = fuse_hffd(base, [feat(base.values.copy())], n_p=3, tau_rel=0.05)
        assert np.array_equal(d.base, base.values)
        assert np.all(d.slots[6:] == 0.0)
        assert np.all(d.masks == 0)

    def test_worked_example(self):
        d = fuse_hffd(feat([1.0, 2.0]), [feat([1.0, 5.0])], n_p=2, tau_rel=0.0)
        assert d.slots.tolist() == [1.0, 2.0, 0.0, 5.0]
        assert d.masks.tolist() == [[0, 1]]

    def test_unused_slots_zero(self):
        base = feat(RNG.normal(size=4))
        aux = [feat(RNG.normal(size=4)) for _ in range(2)]
        d = fuse_hffd(base, aux, n_p=5, tau_rel=0.05)
        assert np.all(d.slots[3 * 4:] == 0.0)
        assert np.all(d.masks[2:] == 0)

    def test_too_many_aux_rejected(self):
        base = feat([1.0])
        with pytest.raises(ValueError, match="exceed"):
            fuse_hffd(base, [feat([2.0]), feat([3.0])], n_p=2, tau_rel=0.0)

    def test_class_mismatch_rejected(self):
        with pytest.raises(ValueError, match="class"):
            fuse_hffd(feat([1.0], class_id=0), [feat([2.0], class_id=1)],
                      n_p=3, tau_rel=0.0)

    def test_tau_infinite_zeroes_all_aux(self):
        base = feat(RNG.normal(size=5))
        aux = [feat(RNG.normal(size=5)) for _ in range(3)]
        d = fuse_hffd(base, aux, n_p=4, tau_rel=np.inf)
        assert np.all(d.slots[5:] == 0.0)

    def test_tau_zero_generic_preserves_aux(self):
        base = feat(RNG.normal(size=5))
        aux = feat(base.values + RNG.uniform(0.5, 1.0, size=5))
        d = fuse_hffd(base, [aux], n_p=2, tau_rel=0.0)
        assert np.array_equal(d.slot(1), aux.values)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1), st.floats(0.0, 2.0))
    def test_masked_entries_are_exactly_zero(self, seed, tau_rel):
        rng = np.random.default_rng(seed)
        n_f = int(rng.integers(1, 9))
        base = feat(rng.normal(size=n_f))
        aux = [feat(rng.normal(size=n_f)) for _ in range(int(rng.integers(0, 3)))]
        d = fuse_hffd(base, aux, n_p=4, tau_rel=tau_rel)
        for s in range(1, d.n_p):
            slot = d.slot(s)
            mask = d.masks[s - 1]
            assert np.all(slot[mask == 0] == 0.0)
            # nonzero entries only where the mask kept them
            assert np.all(mask[slot != 0.0] == 1)


class TestEnroll:
    def test_rotation_produces_t_samples(self):
        images = [random_face(class_id=4, pose_index=i) for i in range(3)]
        samples = enroll_class(images, n_p=5, k_coeff=8, tau_rel=0.05)
        assert len(samples) == 3
        feats = [extract_freq_features(im, 8) for im in images]
        for r, d in enumerate(samples):
            assert d.class_id == 4
            assert np.array_equal(d.base, feats[r].values)

    def test_single_image_single_slot(self):
        d, = enroll_class([random_face()], n_p=5, k_coeff=8, tau_rel=0.05)
        assert np.all(d.slots[d.n_f:] == 0.0)

    def test_identical_images_fully_redundant(self):
        img = random_face()
        twin = face(img.pixels.copy(), pose_index=1)
        for d in enroll_class([img, twin], n_p=3, k_coeff=8, tau_rel=0.05):
            assert np.all(d.slots[d.n_f:] == 0.0)
            assert np.all(d.masks == 0)

    def test_uniform_dimension(self):
        images = [random_face(pose_index=i) for i in range(4)]
        samples = enroll_class(images, n_p=5, k_coeff=8, tau_rel=0.05)
        assert {d.slots.shape for d in samples} == {(5 * 32,)}

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="no training images"):
            enroll_class([], n_p=5)

    def test_overfull_rejected(self):
        images = [random_face(pose_index=i) for i in range(3)]
        with pytest.raises(ValueError, match="exceed"):
            enroll_class(images, n_p=2, k_coeff=8)

    def test_mixed_classes_rejected(self):
        with pytest.raises(ValueError, match="classes"):
            enroll_class([random_face(class_id=0), random_face(class_id=1)],
                         n_p=5, k_coeff=8)


class TestProbe:
    def test_single_slot_layout(self):
        f = feat(RNG.normal(size=6), class_id=2)
        p = probe_hffd(f, n_p=4)
        assert np.array_equal(p.base, f.values)
        assert np.all(p.slots[6:] == 0.0)
        assert p.class_id == 2


class TestGalleryFormat:
    def make_samples(self):
        out = []
        for class_id in (3, 1):
            for _ in range(2):
                base = feat(RNG.normal(size=6), class_id=class_id)
                aux = [feat(RNG.normal(size=6), class_id=class_id)
                       for _ in range(2)]
                out.append(fuse_hffd(base, aux, n_p=4, tau_rel=0.05))
        return out

    def test_roundtrip_bytes(self):
        samples = self.make_samples()
        back = gallery_from_bytes(gallery_to_bytes(samples))
        assert len(back) == len(samples)
        # file orders classes ascending
        assert [h.class_id for h in back] == [1, 1, 3, 3]
        by_class = {1: [], 3: []}
        for h in samples:
            by_class[h.class_id].append(h)
        for h in back:
            orig = by_class[h.class_id].pop(0)
            assert np.array_equal(h.slots, orig.slots)
            assert np.array_equal(h.masks, orig.masks)
            assert (h.n_p, h.n_f) == (orig.n_p, orig.n_f)

    def test_header_layout(self):
        blob = gallery_to_bytes(self.make_samples())
        assert blob[:4] == b"HFFD"
        assert int.from_bytes(blob[4:6], "little") == 1  # version
        assert int.from_bytes(blob[6:10], "little") == 2  # classes
        assert int.from_bytes(blob[10:14], "little") == 4  # n_p
        assert int.from_bytes(blob[14:18], "little") == 6  # n_f

    def test_file_roundtrip(self, tmp_path):
        samples = self.make_samples()
        path = tmp_path / "g.hffd"
        n = save_gallery(path, samples)
        assert path.stat().st_size == n
        assert len(load_gallery(path)) == len(samples)

    def test_bad_magic_rejected(self):
        blob = bytearray(gallery_to_bytes(self.make_samples()))
        blob[:4] = b"JUNK"
        with pytest.raises(ValueError, match="magic"):
            gallery_from_bytes(bytes(blob))

    def test_truncation_rejected(self):
        blob = gallery_to_bytes(self.make_samples())
        with pytest.raises(ValueError, match="truncated"):
            gallery_from_bytes(blob[:-5])

    def test_trailing_garbage_rejected(self):
        blob = gallery_to_bytes(self.make_samples())
        with pytest.raises(ValueError, match="trailing"):
            gallery_from_bytes(blob + b"\x00")

    def test_mixed_layout_rejected(self):
        a = probe_hffd(feat(RNG.normal(size=4)), n_p=2)
        b = probe_hffd(feat(RNG.normal(size=6)), n_p=2)
        with pytest.raises(ValueError, match="layout"):
            gallery_to_bytes([a, b])

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            gallery_to_bytes([])
