"""Image decoding (PPM/PGM, optional PNG) and augmentation."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DecodeError

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class AugmentConfig:
    target_size: int = 64
    hflip_prob: float = 0.5
    mean: tuple = IMAGENET_MEAN
    std: tuple = IMAGENET_STD

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(float(v) for v in self.mean))
        object.__setattr__(self, "std", tuple(float(v) for v in self.std))
        if len(self.mean) != 3 or len(self.std) != 3:
            raise ConfigError("mean and std need one value per RGB channel")
        if min(self.std) <= 0:
            raise ConfigError(f"normalization stds must be positive, got {self.std}")
        if self.target_size < 1:
            raise ConfigError(f"target_size must be positive, got {self.target_size}")
        if not 0.0 <= self.hflip_prob <= 1.0:
            raise ConfigError(f"hflip_prob must lie in [0, 1], got {self.hflip_prob}")

    def to_dict(self):
        return {"target_size": self.target_size, "hflip_prob": self.hflip_prob,
                "mean": list(self.mean), "std": list(self.std)}


def _pnm_header(buf, path):
    """Parse magic, width, height, maxval; return them and the raster offset."""
    fields, i, n = [], 0, len(buf)
    while len(fields) < 4:
        while i < n and buf[i:i + 1].isspace():
            i += 1
        if i < n and buf[i:i + 1] == b"#":
            while i < n and buf[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not buf[i:i + 1].isspace() and buf[i:i + 1] != b"#":
            i += 1
        if start == i:
            raise DecodeError(f"{path}: truncated PNM header")
        fields.append(buf[start:i])
    if i >= n:
        raise DecodeError(f"{path}: missing raster data")
    magic = fields[0].decode("ascii", "replace")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise DecodeError(f"{path}: non-numeric PNM header fields {fields[1:]}") from None
    return magic, width, height, maxval, i + 1


def _decode_pnm(buf, path):
    if buf[:2] not in (b"P5", b"P6"):
        raise DecodeError(f"{path}: unsupported or corrupt header {buf[:2]!r} (need P5 or P6)")
    magic, width, height, maxval, offset = _pnm_header(buf, path)
    if width < 1 or height < 1:
        raise DecodeError(f"{path}: invalid size {width}x{height}")
    if not 0 < maxval <= 255:
        raise DecodeError(f"{path}: only 8-bit images are supported (maxval={maxval})")
    channels = 3 if magic == "P6" else 1
    need = width * height * channels
    raster = buf[offset:offset + need]
    if len(raster) != need:
        raise DecodeError(f"{path}: truncated raster ({len(raster)} of {need} bytes)")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels)
    return arr, maxval


def _decode_png(path):
    try:
        from PIL import Image
    except ImportError:
        raise DecodeError(f"{path}: PNG support needs Pillow (pip install fusetl[png])") from None
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise DecodeError(f"{path}: {exc}") from None
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr, 255


def load_image(path):
    """Decode to a float64 array of shape 3 x H x W with values raw/255.

    Grayscale images are replicated to three channels.
    """
    path = Path(path)
    if path.suffix.lower() == ".png":
        arr, _ = _decode_png(path)
    else:
        try:
            buf = path.read_bytes()
        except OSError as exc:
            raise DecodeError(f"{path}: {exc}") from None
        arr, _ = _decode_pnm(buf, path)
    img = arr.astype(np.float64) / 255.0
    if img.shape[2] == 1:
        img = np.repeat(img, 3, axis=2)
    return np.ascontiguousarray(img.transpose(2, 0, 1))


def to_bytes(img):
    """Quantize an H x W x 3 float image in [0, 1] to uint8."""
    return np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)


def write_ppm(path, pixels):
    """Write ``pixels`` (H x W x 3 uint8, or H x W for P5) as binary PNM."""
    pixels = np.asarray(pixels, dtype=np.uint8)
    if pixels.ndim == 2:
        magic = b"P5"
    elif pixels.ndim == 3 and pixels.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"pixels must be H x W or H x W x 3, got {pixels.shape}")
    h, w = pixels.shape[:2]
    Path(path).write_bytes(magic + b"\n%d %d\n255\n" % (w, h) + pixels.tobytes())


def resize_bilinear(img, size):
    """Resize C x H x W to C x size x size with half-pixel sample centers."""
    c, h, w = img.shape
    if h == size and w == size:
        return img.copy()

    def axis(n_in):
        src = (np.arange(size) + 0.5) * (n_in / size) - 0.5
        src = np.clip(src, 0.0, n_in - 1)
        lo = np.floor(src).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = axis(h)
    x0, x1, fx = axis(w)
    top = img[:, y0][:, :, x0] * (1 - fx) + img[:, y0][:, :, x1] * fx
    bottom = img[:, y1][:, :, x0] * (1 - fx) + img[:, y1][:, :, x1] * fx
    return top * (1 - fy)[:, None] + bottom * fy[:, None]


def hflip(img):
    return np.ascontiguousarray(img[:, :, ::-1])


def normalize(img, config):
    mean = np.asarray(config.mean)[:, None, None]
    std = np.asarray(config.std)[:, None, None]
    return (img - mean) / std


def denormalize(img, config):
    mean = np.asarray(config.mean)[:, None, None]
    std = np.asarray(config.std)[:, None, None]
    return img * std + mean


def augment(img, config, rng=None, training=False):
    """Resize, random horizontal flip (training only), then normalize."""
    out = resize_bilinear(np.asarray(img, dtype=np.float64), config.target_size)
    if training and rng is not None and rng.random() < config.hflip_prob:
        out = hflip(out)
    return normalize(out, config)
