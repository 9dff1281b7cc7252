"""Checkpoint wire format: byte-exact round trips and error taxonomy."""

import numpy as np
import pytest

from eventseg import (
    BadMagicError,
    EncoderPair,
    FormatError,
    MemoryQueue,
    Reconstructor,
    TruncatedError,
    VersionError,
    deserialize_records,
    load_model,
    save_model,
    serialize_records,
)


def _records():
    rng = np.random.default_rng(0)
    return [
        ("alpha", rng.normal(size=(3, 4)).astype(np.float32)),
        ("beta.bias", rng.normal(size=7).astype(np.float32)),
        ("scalar", np.float32(2.5)),
        ("empty", np.zeros((0, 5), dtype=np.float32)),
    ]


def test_round_trip_is_byte_exact():
    blob = serialize_records(_records())
    parsed = deserialize_records(blob)
    assert list(parsed) == ["alpha", "beta.bias", "scalar", "empty"]
    blob2 = serialize_records(list(parsed.items()))
    assert blob == blob2
    for (name, value), (name2, value2) in zip(_records(), parsed.items()):
        assert name == name2
        np.testing.assert_array_equal(np.asarray(value, dtype=np.float32), value2)


def test_bad_magic():
    blob = bytearray(serialize_records(_records()))
    blob[:4] = b"XXXX"
    with pytest.raises(BadMagicError):
        deserialize_records(bytes(blob))


def test_version_mismatch():
    blob = bytearray(serialize_records(_records()))
    blob[4:6] = (99).to_bytes(2, "little")
    with pytest.raises(VersionError):
        deserialize_records(bytes(blob))


def test_truncated_payload():
    blob = serialize_records(_records())
    with pytest.raises(TruncatedError):
        deserialize_records(blob[:-3])


def test_trailing_garbage_rejected():
    blob = serialize_records(_records())
    with pytest.raises(FormatError):
        deserialize_records(blob + b"\x00")


def test_model_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    enc = EncoderPair(6, 8, 0.99, rng)
    rec = Reconstructor(8, 4, 2, rng)
    queue = MemoryQueue(16)
    for _ in range(5):
        v = rng.normal(size=8).astype(np.float32)
        queue.push(v / np.linalg.norm(v))
    meta = {
        "input_dim": 6, "embedding_dim": 8, "heads": 4, "layers": 2,
        "window": 5, "queue_capacity": 16, "alpha": 0.99,
    }
    path = tmp_path / "model.bin"
    save_model(path, enc, rec, queue, meta)
    first_bytes = path.read_bytes()

    enc2, rec2, queue2, meta2 = load_model(path)
    for p, q in zip(enc.parameters() + rec.parameters(),
                    enc2.parameters() + rec2.parameters()):
        assert p.name == q.name
        np.testing.assert_array_equal(p.data, q.data)
    np.testing.assert_array_equal(queue.as_array(8), queue2.as_array(8))
    assert int(meta2["window"]) == 5

    save_model(path, enc2, rec2, queue2, {k: meta2[k] for k in meta})
    assert path.read_bytes() == first_bytes


def test_checkpoint_names_follow_scheme():
    rng = np.random.default_rng(2)
    enc = EncoderPair(6, 8, 0.999, rng)
    rec = Reconstructor(8, 4, 2, rng)
    names = [p.name for p in enc.parameters() + rec.parameters()]
    assert all(n.startswith(("ctfe.query.", "ctfe.key.", "ffr.")) for n in names)
    assert "ffr.mask_token" in names
    assert any(n.startswith("ffr.layer0.msa.") for n in names)
    assert any(n.startswith("ffr.layer1.mlp.") for n in names)
    assert any(n.startswith("ffr.layer0.ln1.") for n in names)
    assert any(n.startswith("ffr.head.") for n in names)
