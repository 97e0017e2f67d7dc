import numpy as np
import pytest

from distillab.nets import (
    AdamState,
    CorruptCheckpointError,
    DenseNet,
    VersionError,
    load_arrays,
    load_checkpoint,
    save_arrays,
    save_checkpoint,
)
from distillab.nets.checkpoint import FORMAT_VERSION, MAGIC


def trained_pair(seed=0):
    rng = np.random.default_rng(seed)
    net = DenseNet.create([6, 16, 3], "tanh", rng=rng)
    opt = AdamState.for_params(net.params(), learning_rate=1e-3)
    for _ in range(5):
        net.forward(rng.normal(size=(4, 6)).astype(np.float32))
        tape = net.backward(rng.normal(size=(4, 3)).astype(np.float32))
        opt.step(net.params(), tape.arrays())
    return net, opt


def test_round_trip_is_bitwise_identical(tmp_path):
    net, opt = trained_pair()
    path = tmp_path / "net.ckpt"
    save_checkpoint(net, opt, path)
    loaded, loaded_opt = load_checkpoint(path)
    assert loaded.widths == net.widths and loaded.activations == net.activations
    for a, b in zip(loaded.params(), net.params()):
        assert a.dtype == b.dtype
        assert a.tobytes() == b.tobytes()
    assert loaded_opt.step_count == opt.step_count
    for a, b in zip(loaded_opt.m + loaded_opt.v, opt.m + opt.v):
        assert a.tobytes() == b.tobytes()


def test_round_trip_forward_identical_on_random_inputs(tmp_path):
    net, _ = trained_pair(3)
    path = tmp_path / "net.ckpt"
    save_checkpoint(net, None, path)
    loaded, loaded_opt = load_checkpoint(path)
    assert loaded_opt is None
    x = np.random.default_rng(5).normal(size=(100, 6)).astype(np.float32)
    np.testing.assert_array_equal(loaded.forward(x), net.forward(x))


def test_truncated_file_raises_corrupt(tmp_path):
    net, opt = trained_pair()
    path = tmp_path / "net.ckpt"
    save_checkpoint(net, opt, path)
    blob = path.read_bytes()
    for cut in (len(blob) - 1, len(blob) // 2, 6):
        path.write_bytes(blob[:cut])
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)


def test_flipped_payload_byte_fails_crc(tmp_path):
    net, _ = trained_pair()
    path = tmp_path / "net.ckpt"
    save_checkpoint(net, None, path)
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(path)


def test_future_version_raises_version_error(tmp_path):
    net, _ = trained_pair()
    path = tmp_path / "net.ckpt"
    save_checkpoint(net, None, path)
    blob = bytearray(path.read_bytes())
    import struct
    import zlib

    struct.pack_into("<I", blob, len(MAGIC), FORMAT_VERSION + 1)
    body = bytes(blob[:-4])
    path.write_bytes(body + struct.pack("<I", zlib.crc32(body)))
    with pytest.raises(VersionError):
        load_checkpoint(path)


def test_non_checkpoint_file_raises(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"definitely not a checkpoint, not even close")
    with pytest.raises(CorruptCheckpointError):
        load_arrays(path)


def test_array_container_round_trips_meta_and_dtypes(tmp_path):
    arrays = {
        "f32": np.arange(6, dtype=np.float32).reshape(2, 3),
        "f64": np.random.default_rng(0).normal(size=4),
        "i64": np.array([[1, -2], [3, 4]], dtype=np.int64),
        "scalar": np.float32(7.5).reshape(()),
    }
    meta = {"stage": "unit", "nested": {"k": [1, 2, 3]}}
    path = tmp_path / "bundle.ckpt"
    save_arrays(path, meta, arrays)
    got_meta, got = load_arrays(path)
    assert got_meta == meta
    assert set(got) == set(arrays)
    for k in arrays:
        assert got[k].dtype == arrays[k].dtype
        assert got[k].shape == arrays[k].shape
        assert got[k].tobytes() == arrays[k].tobytes()
