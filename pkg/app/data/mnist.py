"""MNIST acquisition and the digit-pair preprocessing pipeline.

Each image is binarized, cropped to the bounding box of its white pixels,
split into a patch grid (2x2 by default) and every patch is mapped to
-1, 0 or +1 by the fraction of white pixels it contains::

    ratio <  T1          -> -1
    T1 <= ratio < T2     ->  0
    ratio >= T2          -> +1

The first digit of the pair is labelled +1, the second -1.
"""

from __future__ import annotations

import gzip
import hashlib
import logging
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import requests

from app.config import settings
from app.data.dataset import QuantizedDataset
from app.errors import DataError
from app.schemas.data import MnistConfig

LOGGER = logging.getLogger(__name__)

PathLike = Union[str, Path]

MNIST_FILES: Dict[str, str] = {
    "train-images-idx3-ubyte.gz": "f68b3c2dcbeaaa9fbdd348bbdeb94873",
    "train-labels-idx1-ubyte.gz": "d53e105ee54ea40749a09fcbcd1e9432",
    "t10k-images-idx3-ubyte.gz": "9fb629c4189551a2d022fa330f9573f3",
    "t10k-labels-idx1-ubyte.gz": "ec29112dd5afa0611ce80d1b7f02629c",
}
SPLITS = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}

IDX_DTYPES = {
    0x08: np.dtype("u1"),
    0x09: np.dtype("i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


def read_idx(path: PathLike) -> np.ndarray:
    """Parse an IDX file (optionally gzip-compressed) into an array of its declared shape."""

    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0:
        raise DataError(f"{path}: not an IDX file (bad magic number)")
    code, ndim = raw[2], raw[3]
    if code not in IDX_DTYPES:
        raise DataError(f"{path}: unknown IDX element type 0x{code:02X}")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise DataError(f"{path}: truncated IDX header")
    dims = tuple(int.from_bytes(raw[4 + 4 * d: 8 + 4 * d], "big") for d in range(ndim))
    dtype = IDX_DTYPES[code]
    count = int(np.prod(dims, dtype=np.int64)) if dims else 1
    if len(raw) - header != count * dtype.itemsize:
        raise DataError(f"{path}: expected {count} elements of {dtype}, file holds {len(raw) - header} bytes")
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=header)
    return data.reshape(dims).astype(dtype.newbyteorder("="))


def _md5(path: Path) -> str:
    digest = hashlib.md5()
    with path.open("rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def fetch_mnist(data_dir: Optional[PathLike] = None, timeout: float = settings.http_timeout) -> List[Path]:
    """Download the four MNIST IDX files into ``data_dir`` unless valid copies exist."""

    target = Path(data_dir or settings.data_dir)
    target.mkdir(parents=True, exist_ok=True)
    session = requests.Session()
    headers = {"User-Agent": "ising-learn/0.1"}
    paths: List[Path] = []
    for name, checksum in MNIST_FILES.items():
        path = target / name
        if path.exists() and _md5(path) == checksum:
            LOGGER.info("Using cached %s", path)
            paths.append(path)
            continue
        url = settings.mnist_base_url.rstrip("/") + "/" + name
        try:
            response = session.get(url, headers=headers, timeout=timeout)
            response.raise_for_status()
        except requests.RequestException as exc:
            raise DataError(f"Failed to download {url}: {exc}") from exc
        path.write_bytes(response.content)
        if _md5(path) != checksum:
            path.unlink()
            raise DataError(f"Checksum mismatch for {url}")
        LOGGER.info("Downloaded %s (%s bytes)", path, len(response.content))
        paths.append(path)
    return paths


def _locate(data_dir: Path, stem: str) -> Path:
    for candidate in (data_dir / f"{stem}.gz", data_dir / stem):
        if candidate.exists():
            return candidate
    raise DataError(f"{stem} not found in {data_dir}; run fetch_mnist or set ISING_LEARN_DATA_DIR")


def mnist_available(data_dir: Optional[PathLike] = None, split: str = "test") -> bool:
    directory = Path(data_dir or settings.data_dir)
    return all(
        (directory / f"{stem}.gz").exists() or (directory / stem).exists() for stem in SPLITS[split]
    )


def load_mnist_split(data_dir: Optional[PathLike] = None, split: str = "train") -> Tuple[np.ndarray, np.ndarray]:
    """``(images, labels)`` of the ``train`` or ``test`` split."""

    if split not in SPLITS:
        raise DataError(f"Unknown MNIST split {split!r}; expected train or test")
    directory = Path(data_dir or settings.data_dir)
    image_stem, label_stem = SPLITS[split]
    images = read_idx(_locate(directory, image_stem))
    labels = read_idx(_locate(directory, label_stem))
    if images.ndim != 3 or labels.ndim != 1 or images.shape[0] != labels.shape[0]:
        raise DataError(f"MNIST {split} files have inconsistent shapes {images.shape} / {labels.shape}")
    return images, labels


def _tri_level(count: int, area: int, low: Fraction, high: Fraction) -> int:
    ratio = Fraction(count, area) if area else Fraction(0)
    if ratio < low:
        return -1
    if ratio < high:
        return 0
    return 1


def preprocess_image(image: np.ndarray, cfg: Optional[MnistConfig] = None) -> Tuple[int, ...]:
    """Tri-level patch values of one grayscale image, row-major over the patch grid.

    Patches left empty by a crop narrower than the grid count as dark.
    """

    cfg = cfg or MnistConfig()
    mask = np.asarray(image) > cfg.binarize_threshold
    if not mask.any():
        raise DataError("Degenerate image: no pixel above the binarize threshold")
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    crop = mask[rows[0]: rows[-1] + 1, cols[0]: cols[-1] + 1]
    low, high = Fraction(str(cfg.tri_level_low)), Fraction(str(cfg.tri_level_high))
    values = []
    for band in np.array_split(crop, cfg.patch_grid[0], axis=0):
        for patch in np.array_split(band, cfg.patch_grid[1], axis=1):
            values.append(_tri_level(int(patch.sum()), int(patch.size), low, high))
    return tuple(values)


def preprocess_mnist(
    images: np.ndarray,
    labels: np.ndarray,
    cfg: Optional[MnistConfig] = None,
    source: str = "mnist",
) -> QuantizedDataset:
    """Keep the configured digit pair and map every image to tri-level patch features."""

    cfg = cfg or MnistConfig()
    positive, negative = cfg.digits
    keep = np.flatnonzero(np.isin(labels, cfg.digits))
    inputs = []
    targets = []
    for index in keep:
        try:
            inputs.append(preprocess_image(images[index], cfg))
        except DataError as exc:
            raise DataError(f"Image {int(index)}: {exc}") from exc
        targets.append((Fraction(1) if int(labels[index]) == positive else Fraction(-1),))
    if not inputs:
        raise DataError(f"No images of digits {positive} or {negative}")
    LOGGER.info(
        "Preprocessed %s images of digits %s/%s into %s patch features",
        len(inputs),
        positive,
        negative,
        cfg.patch_grid[0] * cfg.patch_grid[1],
    )
    provenance = {
        "source": source,
        "digits": f"{positive},{negative}",
        "binarize_threshold": cfg.binarize_threshold,
        "patch_grid": f"{cfg.patch_grid[0]}x{cfg.patch_grid[1]}",
        "tri_level_low": cfg.tri_level_low,
        "tri_level_high": cfg.tri_level_high,
    }
    return QuantizedDataset(
        inputs=tuple(inputs),
        labels=tuple(targets),
        input_bits=0,
        provenance={key: str(value) for key, value in provenance.items()},
    )


def select_training_subset(dataset: QuantizedDataset, per_class: int, seed: int = 0) -> QuantizedDataset:
    """Seeded stratified pick of ``per_class`` samples per class, positive class first."""

    if per_class < 1:
        raise DataError("per_class must be >= 1; an empty training set cannot be compiled")
    rng = np.random.default_rng(seed)
    picked: List[int] = []
    for positive in (True, False):
        members = [i for i, row in enumerate(dataset.labels) if (row[0] >= 0) == positive]
        if len(members) < per_class:
            raise DataError(
                f"Only {len(members)} samples of the {'positive' if positive else 'negative'} class, need {per_class}"
            )
        picked.extend(sorted(int(i) for i in rng.choice(members, size=per_class, replace=False)))
    LOGGER.info("Selected %s training samples (seed %s)", len(picked), seed)
    return dataset.subset(picked).with_provenance(per_class=per_class, subset_seed=seed)
