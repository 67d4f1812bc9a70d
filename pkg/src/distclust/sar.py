"""SAR images as distributional data.

Each 16-bit grayscale image becomes one empirical distribution record:
either the discretized gray level of every pixel (univariate), or pairs of
(gray level, Sobel gradient norm) over interior pixels (bivariate). The
gradient norm is discretized against its theoretical maximum so that all
images share one scale.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .distributions import DistributionRecord, EmpiricalDistribution
from .errors import InputError

logger = logging.getLogger(__name__)

INTENSITY_MAX = 65535

# Largest gradient norm a 16-bit image can produce under the quarter-scaled
# Sobel matrices: 65535 * sqrt(5) / 2, reached e.g. by a corner step.
SOBEL_MAX = float(np.sqrt(65535.0**2 + 32767.5**2))


@dataclass(frozen=True)
class SarImage:
    """Pixel matrix in [0, 65535] plus provenance."""

    pixels: np.ndarray
    source: str = ""
    label: str | None = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 3 or px.shape[1] < 3:
            raise InputError(f"image must be at least 3x3, got shape {px.shape}")
        if px.min() < 0 or px.max() > INTENSITY_MAX:
            raise InputError("pixel values must lie in [0, 65535]")
        px = px.astype(np.int64)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True)
class SarFeatureConfig:
    """Discretization levels and channel selection."""

    intensity_levels: int = 256
    filter_levels: int = 200
    include_derivative: bool = False
    pixel_cap: int | None = None  # optional uniform subsample per image

    def __post_init__(self):
        if self.intensity_levels < 2 or self.filter_levels < 2:
            raise InputError("discretization levels must be >= 2")


def load_image(path, label=None) -> SarImage:
    """Read a single-channel PNG; 8-bit inputs are upscaled by 257."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            arr = np.asarray(img)
    except Exception as exc:
        raise InputError(f"cannot decode image {path}: {exc}") from exc
    if arr.ndim != 2:
        raise InputError(f"{path}: expected single-channel image, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise InputError(f"{path}: expected integer pixels, got dtype {arr.dtype}")
    if arr.dtype == np.uint8:
        logger.warning("%s is 8-bit; upscaling values by 257 to the 16-bit range", path)
        arr = arr.astype(np.int64) * 257
    return SarImage(arr, source=str(path), label=label)


def discretize_intensity(img: SarImage, levels: int) -> np.ndarray:
    """Integer part of value * levels / 65535, row-major over all pixels.

    The full-scale value 65535 maps to ``levels`` itself, so the output
    range has levels + 1 distinct values.
    """
    return (img.pixels.reshape(-1) * levels) // INTENSITY_MAX


def sobel_gradient_norm(img: SarImage) -> np.ndarray:
    """Euclidean norm of the quarter-scaled Sobel gradient, valid region only.

    Border pixels are dropped: the output has shape (H-2) x (W-2).
    """
    p = img.pixels.astype(float)
    gx = (
        (p[:-2, 2:] - p[:-2, :-2])
        + 2.0 * (p[1:-1, 2:] - p[1:-1, :-2])
        + (p[2:, 2:] - p[2:, :-2])
    ) / 4.0
    gy = (
        (p[2:, :-2] - p[:-2, :-2])
        + 2.0 * (p[2:, 1:-1] - p[:-2, 1:-1])
        + (p[2:, 2:] - p[:-2, 2:])
    ) / 4.0
    return np.sqrt(gx * gx + gy * gy)


def discretize_filter(values: np.ndarray, levels: int) -> np.ndarray:
    """Bin gradient norms into [0, levels] against the theoretical maximum."""
    values = np.asarray(values, dtype=float)
    if values.size and values.min() < 0:
        raise InputError("gradient norms must be nonnegative")
    # Dividing by SOBEL_MAX first keeps the full-scale value exactly at
    # ``levels`` (x / x == 1.0), immune to double-rounding.
    return np.floor(values / SOBEL_MAX * levels).astype(np.int64)


def extract_record(img: SarImage, config: SarFeatureConfig,
                   rng: np.random.Generator | None = None) -> DistributionRecord:
    """Distributional record of one image.

    Univariate mode uses every pixel; bivariate mode pairs the intensity
    with the gradient norm on interior pixels, so both channels are defined
    at every row of the sample.
    """
    if config.include_derivative:
        interior = (img.pixels[1:-1, 1:-1].reshape(-1) * config.intensity_levels) // INTENSITY_MAX
        grad = discretize_filter(sobel_gradient_norm(img), config.filter_levels).reshape(-1)
        data = np.column_stack([interior.astype(float), grad.astype(float)])
    else:
        data = discretize_intensity(img, config.intensity_levels).astype(float)[:, None]
    if config.pixel_cap is not None and data.shape[0] > config.pixel_cap:
        if rng is None:
            raise InputError("pixel_cap subsampling needs a generator")
        keep = rng.choice(data.shape[0], size=config.pixel_cap, replace=False)
        data = data[np.sort(keep)]
    return DistributionRecord(EmpiricalDistribution(data), label=img.label)


def ingest_dataset(root, classes, per_class: int, config: SarFeatureConfig,
                   rng: np.random.Generator, manifest_out=None) -> list[DistributionRecord]:
    """Sample ``per_class`` PNG files per class directory and extract records.

    File selection is uniform without replacement over the sorted listing,
    so a fixed seed reproduces the same choice. The list of chosen files is
    written as JSON next to the data (or to ``manifest_out``).
    """
    root = Path(root)
    chosen: dict[str, list[str]] = {}
    records = []
    for cls in classes:
        cdir = root / cls
        if not cdir.is_dir():
            raise InputError(f"class directory not found: {cdir}")
        files = sorted(cdir.glob("*.png"))
        if len(files) < per_class:
            raise InputError(
                f"class {cls}: requested {per_class} images, found {len(files)}")
        idx = rng.choice(len(files), size=per_class, replace=False)
        picks = [files[i] for i in np.sort(idx)]
        chosen[cls] = [str(p.relative_to(root)) for p in picks]
        for path in picks:
            records.append(extract_record(load_image(path, label=cls), config, rng))
    manifest_path = Path(manifest_out) if manifest_out else root / "ingest_manifest.json"
    try:
        manifest_path.write_text(json.dumps({"root": str(root), "chosen": chosen},
                                            indent=1) + "\n")
    except OSError as exc:  # read-only dataset roots should not abort ingestion
        logger.warning("could not write ingest manifest %s: %s", manifest_path, exc)
    return records
