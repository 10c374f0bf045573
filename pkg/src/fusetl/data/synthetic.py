"""Seeded, learnably separable stand-in corpus.

NonCOVID images are i.i.d. uniform noise in [0.3, 0.7] per pixel and
channel.  COVID images are the same kind of noise plus a Gaussian bright
blob added to all channels (peak 0.3, sigma = size/6, centre uniform over
the image), clipped to [0, 1].  Even-indexed images of each class are
written under ``CT/``, odd-indexed under ``XRAY/``, so the tree has the
same four-folder layout that :func:`fuse_datasets` expects::

    <out>/CT/COVID/COVID_0000.ppm
    <out>/XRAY/NonCOVID/NonCOVID_0001.ppm
"""

from pathlib import Path

import numpy as np

from ..errors import ValidationError
from .images import to_bytes, write_ppm
from .manifest import LABELS, DatasetManifest, fuse_datasets

BLOB_PEAK = 0.3
NOISE_LOW, NOISE_HIGH = 0.3, 0.7


def synthetic_image(rng, size, covid):
    img = rng.uniform(NOISE_LOW, NOISE_HIGH, size=(size, size, 3))
    if covid:
        cy, cx = rng.uniform(0, size, size=2)
        sigma = size / 6.0
        yy, xx = np.mgrid[0:size, 0:size]
        blob = BLOB_PEAK * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma * sigma))
        img = np.clip(img + blob[:, :, None], 0.0, 1.0)
    return img


def generate_synthetic(out_dir, n_per_class, size=64, seed=0):
    """Write the corpus and ``manifest.csv`` under ``out_dir``; return the manifest."""
    if n_per_class < 3:
        raise ValidationError(f"n_per_class must be >= 3, got {n_per_class}")
    out = Path(out_dir)
    rng = np.random.default_rng(seed)
    dirs = {}
    for modality in ("CT", "XRAY"):
        for label in LABELS:
            d = out / modality / label
            d.mkdir(parents=True, exist_ok=True)
            dirs[modality, label] = d
    width = max(4, len(str(n_per_class - 1)))
    for label in LABELS:
        for i in range(n_per_class):
            img = synthetic_image(rng, size, covid=label == "COVID")
            modality = "CT" if i % 2 == 0 else "XRAY"
            write_ppm(dirs[modality, label] / f"{label}_{i:0{width}d}.ppm", to_bytes(img))
    manifest = fuse_datasets(dirs["CT", "COVID"], dirs["CT", "NonCOVID"],
                             dirs["XRAY", "COVID"], dirs["XRAY", "NonCOVID"], root=out)
    manifest = DatasetManifest(manifest.records, root=out, seed=seed)
    manifest.save(out / "manifest.csv")
    return manifest
