import json

import numpy as np
import pytest

from crossfp.binio import load_descriptor, save_descriptor
from crossfp.errors import CorruptModelError, UnsupportedFormatError, VersionMismatchError


class TestDescriptorFiles:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        values = rng.normal(size=768).astype(np.float32)
        path = tmp_path / "d.desc"
        save_descriptor(path, values, "coror", {"offsets": [5, 10, 15], "directions": [0, 45, 90, 135]})
        back, header = load_descriptor(path)
        assert np.array_equal(back, values)
        assert header["kind"] == "coror"
        assert header["length"] == 768
        assert header["offsets"] == [5, 10, 15]

    def test_header_is_one_json_line(self, tmp_path):
        path = tmp_path / "d.desc"
        save_descriptor(path, np.zeros(4, np.float32), "gaborhog", {"bins": 9})
        first_line = path.read_bytes().split(b"\n", 1)[0]
        header = json.loads(first_line)
        assert header["version"] == 1 and header["kind"] == "gaborhog"

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "d.desc"
        save_descriptor(path, np.zeros(16, np.float32), "coror", {})
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(CorruptModelError):
            load_descriptor(path)

    def test_version_bump_rejected(self, tmp_path):
        path = tmp_path / "d.desc"
        save_descriptor(path, np.zeros(2, np.float32), "coror", {})
        raw = path.read_bytes()
        path.write_bytes(raw.replace(b'"version": 1', b'"version": 99'))
        with pytest.raises(VersionMismatchError):
            load_descriptor(path)

    def test_unknown_kind_rejected(self, tmp_path):
        path = tmp_path / "d.desc"
        save_descriptor(path, np.zeros(2, np.float32), "coror", {})
        raw = path.read_bytes()
        path.write_bytes(raw.replace(b'"kind": "coror"', b'"kind": "other"'))
        with pytest.raises(UnsupportedFormatError):
            load_descriptor(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "d.desc"
        save_descriptor(path, np.zeros(2, np.float32), "coror", {})
        path.write_bytes(path.read_bytes() + b"x")
        with pytest.raises(CorruptModelError):
            load_descriptor(path)
