from app.data.dataset import QuantizedDataset, read_dataset, write_dataset
from app.data.moons import two_moon, two_moon_raw
from app.data.quantize import quantize

__all__ = [
    "QuantizedDataset",
    "quantize",
    "read_dataset",
    "two_moon",
    "two_moon_raw",
    "write_dataset",
]
