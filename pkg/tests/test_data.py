import struct

import numpy as np
import pytest

from fedimb import (ConfigError, Dataset, FormatError, InputError,
                    SynthConfig, load_cifar10_bin, load_mnist_idx, synth_blobs)


def write_idx_pair(tmp_path, images, labels):
    """images: (n, rows, cols) uint8, labels: (n,) uint8."""
    n, rows, cols = images.shape
    img_path = tmp_path / "images-idx3-ubyte"
    lab_path = tmp_path / "labels-idx1-ubyte"
    img_path.write_bytes(struct.pack(">iiii", 0x803, n, rows, cols) + images.tobytes())
    lab_path.write_bytes(struct.pack(">ii", 0x801, n) + labels.tobytes())
    return img_path, lab_path


def test_dataset_validation():
    with pytest.raises(InputError):
        Dataset(np.zeros((3, 2)), np.array([0, 1]), C=2, name="x")
    with pytest.raises(InputError):
        Dataset(np.zeros((2, 2)), np.array([0, 5]), C=2, name="x")
    with pytest.raises(InputError):
        Dataset(np.full((2, 2), 1.5), np.array([0, 1]), C=2, name="x")
    ds = Dataset(np.zeros((2, 3)), np.array([0, 1]), C=2, name="x")
    assert ds.n == 2 and ds.d == 3


def test_dataset_sha256_tracks_content():
    a = Dataset(np.zeros((2, 2)), np.array([0, 1]), C=2, name="a")
    b = Dataset(np.zeros((2, 2)), np.array([0, 1]), C=2, name="b")
    assert a.sha256() == b.sha256()  # name does not affect the fingerprint
    c = Dataset(np.zeros((2, 2)), np.array([1, 1]), C=2, name="a")
    assert a.sha256() != c.sha256()
    d = Dataset(np.full((2, 2), 0.5), np.array([0, 1]), C=2, name="a")
    assert a.sha256() != d.sha256()


def test_idx_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, size=(7, 4, 3), dtype=np.uint8)
    labels = rng.integers(0, 10, size=7, dtype=np.uint8)
    ds = load_mnist_idx(*write_idx_pair(tmp_path, images, labels))
    assert ds.name == "mnist" and ds.C == 10
    assert ds.features.shape == (7, 12)
    assert np.array_equal(ds.labels, labels.astype(np.int64))
    assert np.array_equal(ds.features, images.reshape(7, 12) / 255.0)


def test_idx_bad_magic(tmp_path):
    images = np.zeros((2, 2, 2), dtype=np.uint8)
    labels = np.zeros(2, dtype=np.uint8)
    img_path, lab_path = write_idx_pair(tmp_path, images, labels)
    img_path.write_bytes(b"\x00\x00\x08\x04" + img_path.read_bytes()[4:])
    with pytest.raises(FormatError, match="magic"):
        load_mnist_idx(img_path, lab_path)


def test_idx_truncated_and_mismatched(tmp_path):
    images = np.zeros((3, 2, 2), dtype=np.uint8)
    labels = np.zeros(3, dtype=np.uint8)
    img_path, lab_path = write_idx_pair(tmp_path, images, labels)

    img_path.write_bytes(img_path.read_bytes()[:-1])
    with pytest.raises(FormatError, match="bytes"):
        load_mnist_idx(img_path, lab_path)

    img_path, _ = write_idx_pair(tmp_path, images, labels)
    lab_path.write_bytes(struct.pack(">ii", 0x801, 2) + labels[:2].tobytes())
    with pytest.raises(FormatError, match="mismatch"):
        load_mnist_idx(img_path, lab_path)


def test_idx_label_out_of_range(tmp_path):
    images = np.zeros((2, 2, 2), dtype=np.uint8)
    labels = np.array([0, 11], dtype=np.uint8)
    with pytest.raises(FormatError, match="label"):
        load_mnist_idx(*write_idx_pair(tmp_path, images, labels))


def test_idx_missing_file(tmp_path):
    with pytest.raises(FormatError, match="cannot read"):
        load_mnist_idx(tmp_path / "nope", tmp_path / "nope2")


def make_cifar_batch(path, labels, pixels):
    records = np.concatenate([labels[:, None], pixels], axis=1).astype(np.uint8)
    path.write_bytes(records.tobytes())


def test_cifar_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    lab1 = rng.integers(0, 10, size=4, dtype=np.uint8)
    pix1 = rng.integers(0, 256, size=(4, 3072), dtype=np.uint8)
    lab2 = rng.integers(0, 10, size=2, dtype=np.uint8)
    pix2 = rng.integers(0, 256, size=(2, 3072), dtype=np.uint8)
    p1, p2 = tmp_path / "b1.bin", tmp_path / "b2.bin"
    make_cifar_batch(p1, lab1, pix1)
    make_cifar_batch(p2, lab2, pix2)
    ds = load_cifar10_bin([p1, p2])
    assert ds.name == "cifar10" and ds.n == 6 and ds.d == 3072
    assert np.array_equal(ds.labels, np.concatenate([lab1, lab2]).astype(np.int64))
    assert np.array_equal(ds.features[:4], pix1 / 255.0)


def test_cifar_bad_record_size(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"\x00" * 3072)  # one byte short of a record
    with pytest.raises(FormatError, match="multiple"):
        load_cifar10_bin([p])
    with pytest.raises(InputError):
        load_cifar10_bin([])


def test_cifar_label_out_of_range(tmp_path):
    p = tmp_path / "bad.bin"
    make_cifar_batch(p, np.array([10], dtype=np.uint8),
                     np.zeros((1, 3072), dtype=np.uint8))
    with pytest.raises(FormatError, match="label"):
        load_cifar10_bin([p])


def test_synth_blobs_deterministic():
    cfg = SynthConfig(C=3, per_class=20, d=4, spread=0.05, seed=9)
    a, b = synth_blobs(cfg), synth_blobs(cfg)
    assert a.sha256() == b.sha256()
    assert a.name == "synth-c3-n20-d4"
    assert a.n == 60 and a.d == 4
    assert np.array_equal(a.labels, np.repeat(np.arange(3), 20))
    assert a.features.min() >= 0.0 and a.features.max() <= 1.0
    c = synth_blobs(SynthConfig(C=3, per_class=20, d=4, spread=0.05, seed=10))
    assert a.sha256() != c.sha256()


def test_synth_blobs_separable_means():
    # class means should sit apart along their assigned axes
    cfg = SynthConfig(C=4, per_class=200, d=2, spread=0.02, seed=3)
    ds = synth_blobs(cfg)
    for c in range(4):
        spot = ds.features[ds.labels == c].mean(axis=0)
        expect = np.full(2, 0.5)
        expect[c % 2] += 0.25 if c < 2 else -0.25
        assert np.allclose(spot, expect, atol=0.02)


def test_synth_config_validation():
    with pytest.raises(ConfigError):
        SynthConfig(C=1, per_class=5, d=2, spread=0.1, seed=0)
    with pytest.raises(ConfigError):
        SynthConfig(C=2, per_class=0, d=2, spread=0.1, seed=0)
    with pytest.raises(ConfigError):
        SynthConfig(C=2, per_class=5, d=2, spread=0.0, seed=0)
    with pytest.raises(ConfigError):
        SynthConfig(C=10, per_class=5, d=4, spread=0.1, seed=0)  # C > 2*d
