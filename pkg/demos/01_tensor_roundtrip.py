#!/usr/bin/env python3
"""Walk through the binary tensor format: write, inspect, read back.

Every tensor crossing the engine boundary uses one little-endian layout:
magic "RTNS", version, dtype code, ndim, dims, then raw float32 payload.
"""

import tempfile
from pathlib import Path

import numpy as np

from reco import read_tensor_array, write_tensor, write_tensor_array

workdir = Path(tempfile.mkdtemp(prefix="reco_demo_"))
path = workdir / "toy.rtns"

# a 2x2 identity: 31 bytes total (7 header + 8 dims + 16 payload)
write_tensor([2, 2], [1.0, 0.0, 0.0, 1.0], path)
raw = path.read_bytes()
print(f"wrote {path} ({len(raw)} bytes)")
print(f"  magic={raw[:4]!r} version={raw[4]} dtype={raw[5]} ndim={raw[6]}")
print(f"  payload={raw[15:].hex(' ')}")

back = read_tensor_array(path)
print(f"read back shape={back.shape} values={back.ravel().tolist()}")

# round-trips are bit-exact, which is what makes pipeline runs reproducible
rng = np.random.default_rng(0)
arr = rng.standard_normal((3, 4, 4)).astype(np.float32)
write_tensor_array(arr, workdir / "feat.rtns")
again = read_tensor_array(workdir / "feat.rtns")
print(f"random (3,4,4) tensor round-trip bit-exact: "
      f"{arr.tobytes() == again.astype(np.float32).tobytes()}")
