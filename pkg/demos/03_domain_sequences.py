"""
Domain sequences
================

Three ways to build a gradually shifting sequence: rotating two-moons,
shifted Gaussian blobs, and rotated images read from IDX files.
"""
# %%
import tempfile
from pathlib import Path

import numpy as np

from stdw import gen_intensity_shift, gen_rotating_moons
from stdw.domains import (
    export_sequence, load_idx_images, load_sequence, make_rotated_sequence,
    write_idx_images, write_idx_labels,
)

seq = gen_rotating_moons(5, 0, 60, samples_per_domain=200, seed=1)
print("shifts:", seq.shifts)
print("only the source is labelled:", [d.y is not None for d in seq.domains])

# %%
blobs = gen_intensity_shift(4, 0.0, 1.5, samples_per_domain=150, seed=1, k=3)
print("blob means per domain:", [dom.x.mean(axis=0).round(2).tolist() for dom in blobs.domains])

# %%
# Rotated images.  Here a synthetic IDX pair stands in for a real dataset.
tmp = Path(tempfile.mkdtemp())
rng = np.random.default_rng(2)
pixels = (rng.random((120, 8, 8)) * 255).astype(np.uint8)
write_idx_images(tmp / "images.idx", pixels)
write_idx_labels(tmp / "labels.idx", rng.integers(0, 10, 120).astype(np.uint8))
images, labels = load_idx_images(tmp / "images.idx", tmp / "labels.idx")
rot = make_rotated_sequence(images, labels, 3, 0, 45, per_domain=30, seed=0)
print("rotated sequence:", len(rot), "domains of dim", rot.d)

# %%
# Sequences can be written to CSV and read back.
out = export_sequence(seq, tmp / "moons")
print(sorted(p.name for p in out.iterdir())[:4], "...")
print("reloaded shifts:", load_sequence(out).shifts)
