"""Corpus fusion, splitting, image loading, augmentation and batching."""

from .images import (
    IMAGENET_MEAN,
    IMAGENET_STD,
    AugmentConfig,
    augment,
    denormalize,
    hflip,
    load_image,
    normalize,
    resize_bilinear,
    write_ppm,
)
from .loader import ImageCache, SplitLoader, batch_iter
from .manifest import (
    LABELS,
    MODALITIES,
    DatasetManifest,
    SampleRecord,
    encode_label,
    fuse_datasets,
    split_dataset,
    split_sizes,
)
from .synthetic import generate_synthetic

__all__ = [
    "IMAGENET_MEAN", "IMAGENET_STD", "LABELS", "MODALITIES", "AugmentConfig", "DatasetManifest",
    "ImageCache", "SampleRecord", "SplitLoader", "augment", "batch_iter", "denormalize",
    "encode_label", "fuse_datasets", "generate_synthetic", "hflip", "load_image", "normalize",
    "resize_bilinear", "split_dataset", "split_sizes", "write_ppm",
]
