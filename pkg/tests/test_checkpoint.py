import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from beacnet.ndkernel.checkpoint import (
    MAGIC,
    CheckpointError,
    dumps,
    load_checkpoint,
    loads,
    save_checkpoint,
)

dtypes = st.sampled_from([np.float32, np.float64, np.int64])


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(st.text("abcxyz._", min_size=1, max_size=8),
                       dtypes.flatmap(lambda d: arrays(d, array_shapes(min_dims=0, max_dims=3, max_side=5))),
                       max_size=4))
def test_round_trip_bit_exact(tensors):
    back, meta = loads(dumps(tensors, {"epoch": 3}))
    assert meta == {"epoch": 3}
    assert sorted(back) == sorted(tensors)
    for k, v in tensors.items():
        assert back[k].dtype == v.dtype and back[k].shape == v.shape
        assert back[k].tobytes() == v.tobytes()


def test_file_round_trip_and_determinism(tmp_path):
    t = {"w": np.arange(6, dtype=np.float32).reshape(2, 3), "b": np.zeros(3)}
    save_checkpoint(tmp_path / "a.ckpt", t, {"variant": "full"})
    save_checkpoint(tmp_path / "b.ckpt", dict(reversed(t.items())), {"variant": "full"})
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
    back, meta = load_checkpoint(tmp_path / "a.ckpt")
    assert meta["variant"] == "full"
    np.testing.assert_array_equal(back["w"], t["w"])


def test_big_endian_input_is_stored_little_endian():
    arr = np.arange(4, dtype=">f8")
    back, _ = loads(dumps({"x": arr}))
    assert back["x"].dtype == np.dtype("=f8")
    np.testing.assert_array_equal(back["x"], arr)


def _blob():
    return dumps({"w": np.ones((3, 3))}, {})


@pytest.mark.parametrize("mutate, match", [
    (lambda b: b"NOTACKPT" + b[8:], "magic"),
    (lambda b: b[:10], "truncated"),
    (lambda b: b[:-1], "truncated"),
    (lambda b: b[:12] + b"}" + b[13:], "corrupt"),
])
def test_errors(mutate, match):
    with pytest.raises(CheckpointError, match=match):
        loads(mutate(_blob()))


def test_unsupported_version():
    blob = _blob()
    (hlen,) = struct.unpack("<I", blob[8:12])
    header = blob[12:12 + hlen].replace(b'"format_version": 1', b'"format_version": 9')
    with pytest.raises(CheckpointError, match="version"):
        loads(MAGIC + struct.pack("<I", len(header)) + header + blob[12 + hlen:])
