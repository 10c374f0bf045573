"""Deterministic mini-batching over a manifest split."""

import numpy as np

from ..errors import ValidationError
from .images import AugmentConfig, hflip, load_image, normalize, resize_bilinear
from .manifest import encode_label


class ImageCache:
    """Decoded and resized images keyed by manifest path.

    Resizing is deterministic, so it is done once; flips and normalization
    are applied per batch.
    """

    def __init__(self, root, size):
        self.root = root
        self.size = size
        self._store = {}

    def get(self, rel_path):
        img = self._store.get(rel_path)
        if img is None:
            img = resize_bilinear(load_image(self.root / rel_path), self.size)
            self._store[rel_path] = img
        return img


def _epoch_rng(seed, epoch, stream):
    return np.random.default_rng([seed, epoch, stream])


def batch_iter(manifest, split, batch_size=32, shuffle_seed=0, epoch=0, config=None,
               training=None, cache=None, shuffle=True):
    """Yield ``(images B x 3 x S x S, labels B)`` for one pass over ``split``.

    Order and flips depend only on ``(shuffle_seed, epoch)``.  The last
    batch may be short.  ``training`` defaults to ``split == "train"`` and
    turns on random flips.
    """
    records = manifest.split(split)
    if not records:
        raise ValidationError(f"split {split!r} is empty")
    if batch_size < 1:
        raise ValidationError(f"batch_size must be >= 1, got {batch_size}")
    config = config or AugmentConfig()
    training = split == "train" if training is None else training
    cache = cache or ImageCache(manifest.root, config.target_size)
    order = (_epoch_rng(shuffle_seed, epoch, 0).permutation(len(records)) if shuffle
             else np.arange(len(records)))
    flips = _epoch_rng(shuffle_seed, epoch, 1).random(len(records)) < config.hflip_prob
    for start in range(0, len(records), batch_size):
        idx = order[start:start + batch_size]
        images = []
        for i in idx:
            img = cache.get(records[i].path)
            if training and flips[i]:
                img = hflip(img)
            images.append(normalize(img, config))
        labels = np.array([encode_label(records[i].label) for i in idx])
        yield np.stack(images), labels


class SplitLoader:
    """Re-iterable :func:`batch_iter` bound to one split, with a shared cache."""

    def __init__(self, manifest, split, batch_size=32, seed=0, config=None, training=None,
                 shuffle=True):
        self.manifest = manifest
        self.split = split
        self.batch_size = batch_size
        self.seed = seed
        self.config = config or AugmentConfig()
        self.training = split == "train" if training is None else training
        self.shuffle = shuffle
        self.cache = ImageCache(manifest.root, self.config.target_size)
        self.n_samples = len(manifest.split(split))
        if self.n_samples == 0:
            raise ValidationError(f"split {split!r} is empty")

    def __len__(self):
        return -(-self.n_samples // self.batch_size)

    def batches(self, epoch=0):
        return batch_iter(self.manifest, self.split, self.batch_size, self.seed, epoch,
                          self.config, self.training, self.cache, self.shuffle)

    def __iter__(self):
        return self.batches(0)
