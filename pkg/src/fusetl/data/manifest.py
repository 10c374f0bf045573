"""Sample records, corpus fusion and stratified splitting."""

import csv
import io
import math
import os
from collections import Counter
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..errors import CollisionError, FormatError, InsufficientDataError, ValidationError

LABELS = ("COVID", "NonCOVID")
MODALITIES = ("CT", "XRAY")
SPLITS = ("train", "val", "test", "unassigned")
IMAGE_EXTENSIONS = (".ppm", ".pgm", ".png")
HEADER = ("path", "label", "modality", "split")

POSITIVE_LABEL = "COVID"


def encode_label(label):
    return 1.0 if label == POSITIVE_LABEL else 0.0


@dataclass(frozen=True)
class SampleRecord:
    path: str
    label: str
    modality: str
    split: str = "unassigned"

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValidationError(f"{self.path}: label must be one of {LABELS}, got {self.label!r}")
        if self.modality not in MODALITIES:
            raise ValidationError(
                f"{self.path}: modality must be one of {MODALITIES}, got {self.modality!r}")
        if self.split not in SPLITS:
            raise ValidationError(f"{self.path}: split must be one of {SPLITS}, got {self.split!r}")


class DatasetManifest:
    """Records sorted by path; ``root`` is the directory paths are relative to."""

    def __init__(self, records, root=".", seed=None):
        records = sorted(records, key=lambda r: r.path)
        paths = [r.path for r in records]
        dupes = [p for p, n in Counter(paths).items() if n > 1]
        if dupes:
            raise CollisionError(f"duplicate paths in manifest: {dupes[:5]}")
        self.records = records
        self.root = Path(root)
        self.seed = seed

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def split(self, name):
        return [r for r in self.records if r.split == name]

    def counts(self, by=("label", "modality")):
        return Counter(tuple(getattr(r, f) for f in by) for r in self.records)

    def split_counts(self):
        return Counter((r.split, r.label) for r in self.records)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(HEADER)
        for r in self.records:
            writer.writerow((r.path, r.label, r.modality, r.split))
        return buf.getvalue()

    def relocated(self, new_root):
        """Same files, with paths rewritten relative to ``new_root``."""
        new_root = Path(new_root)
        old, new = self.root.resolve(), new_root.resolve()
        if old == new:
            return DatasetManifest(self.records, root=new_root, seed=self.seed)
        records = [replace(r, path=Path(os.path.relpath(old / r.path, new)).as_posix())
                   for r in self.records]
        return DatasetManifest(records, root=new_root, seed=self.seed)

    def save(self, path):
        """Write CSV; paths are rebased onto the file's directory if needed."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.relocated(path.parent).to_csv().encode("utf-8"))

    @classmethod
    def load(cls, path, root=None):
        path = Path(path)
        text = path.read_bytes().decode("utf-8")
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if tuple(header or ()) != HEADER:
            raise FormatError(f"{path}: manifest header must be {','.join(HEADER)}, got {header}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            records.append(SampleRecord(*row))
        return cls(records, root=path.parent if root is None else root)


def _list_images(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise ValidationError(f"not a directory: {directory}")
    return sorted(p for p in directory.iterdir()
                  if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS)


def fuse_datasets(ct_covid_dir, ct_noncovid_dir, xray_covid_dir, xray_noncovid_dir, root=None):
    """Merge the four class/modality folders into one two-class manifest.

    Paths are stored relative to ``root`` (default: the deepest common
    parent of the four folders).
    """
    sources = [
        (ct_covid_dir, "COVID", "CT"),
        (ct_noncovid_dir, "NonCOVID", "CT"),
        (xray_covid_dir, "COVID", "XRAY"),
        (xray_noncovid_dir, "NonCOVID", "XRAY"),
    ]
    dirs = [Path(d).resolve() for d, _, _ in sources]
    root = Path(root).resolve() if root is not None else Path(os.path.commonpath(dirs))
    records, seen = [], set()
    for (d, label, modality), resolved in zip(sources, dirs):
        files = _list_images(resolved)
        if not files:
            raise ValidationError(f"no images with extensions {IMAGE_EXTENSIONS} in {d}")
        for f in files:
            try:
                rel = f.relative_to(root).as_posix()
            except ValueError:
                raise ValidationError(f"{f} is not under root {root}") from None
            if rel in seen:
                raise CollisionError(f"duplicate relative path {rel!r} (folder {d} given twice?)")
            seen.add(rel)
            records.append(SampleRecord(rel, label, modality))
    return DatasetManifest(records, root=root)


def split_sizes(n, test_frac=0.2, val_frac_of_train=0.25):
    """(train, val, test) for one class of ``n`` samples under the floor rule."""
    n_test = math.floor(Fraction(str(test_frac)) * n)
    rest = n - n_test
    n_val = math.floor(Fraction(str(val_frac_of_train)) * rest)
    return rest - n_val, n_val, n_test


def split_dataset(manifest, seed, test_frac=0.2, val_frac_of_train=0.25):
    """Stratified train/val/test assignment.

    Per label (in sorted label order) the path-sorted records are permuted
    by a generator seeded with ``seed``; the first ``n_test`` go to test, the
    next ``n_val`` to val, the rest to train.
    """
    for name, frac in (("test_frac", test_frac), ("val_frac_of_train", val_frac_of_train)):
        if not 0.0 < frac < 1.0:
            raise ValidationError(f"{name} must lie in (0, 1), got {frac}")
    rng = np.random.default_rng(seed)
    out = []
    for label in LABELS:
        group = [r for r in manifest.records if r.label == label]
        if not group:
            continue
        if len(group) < 3:
            raise InsufficientDataError(
                f"class {label} has {len(group)} samples; at least 3 are needed to split")
        _, n_val, n_test = split_sizes(len(group), test_frac, val_frac_of_train)
        order = rng.permutation(len(group))
        for rank, idx in enumerate(order):
            split = "test" if rank < n_test else "val" if rank < n_test + n_val else "train"
            out.append(replace(group[idx], split=split))
    return DatasetManifest(out, root=manifest.root, seed=seed)
