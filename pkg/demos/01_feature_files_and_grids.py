"""Feature files and patch grids.

Builds a tiny feature store, round-trips it through the MDPM-FEAT v1 binary
format, and shows the dense patch grid used to sample images.
"""

import io

import numpy as np

from mdpm import FeatureStore, PatchGeometry, PatchRecord, read_featfile, write_featfile
from mdpm.featstore import sample_patch_grid

# 25 patch positions cover a 256x256 image at patch 128 / stride 32
grid = sample_patch_grid(256, 256, 128, 32)
print(f"grid on 256x256: {len(grid)} patches, first three:")
for g in grid[:3]:
    print(f"  x={g.x:3d} y={g.y:3d} {g.w}x{g.h}")

# a store of 4-d activations for two of those patches
records = [
    PatchRecord(image_id=0, class_label=1, geometry=grid[0],
                activation=np.array([0.5, 0.0, 2.0, 0.1], np.float32)),
    PatchRecord(image_id=0, class_label=1, geometry=grid[1],
                activation=np.array([0.0, 1.5, 0.0, 0.0], np.float32)),
]
store = FeatureStore(4, records)

buf = io.BytesIO()
n_bytes = write_featfile(store, buf)
print(f"\nserialized {len(store)} records (dim {store.dim}) in {n_bytes} bytes")
print(f"header + per-record cost: 20 + n * (20 + 4*dim) = 20 + 2*36 = {20 + 2 * 36}")

buf.seek(0)
again = read_featfile(buf)
print(f"round-trip equality: {again == store}")
