"""Binary encoding of decision variables onto spin bits."""

from app.encoding.budget import complexity_term, spin_counts, total_spins
from app.encoding.manifest import read_manifest, write_manifest
from app.encoding.registry import (
    VariableRegistry,
    build_registry,
    closed_form_shortfalls,
    encode_variable,
    range_encoding,
    row_label,
)
from app.encoding.variables import (
    PARAMETER_KINDS,
    PER_SAMPLE_KINDS,
    AffineEncoding,
    VariableKey,
    VariableKind,
    decode_value,
)

__all__ = [
    "PARAMETER_KINDS",
    "PER_SAMPLE_KINDS",
    "AffineEncoding",
    "VariableKey",
    "VariableKind",
    "VariableRegistry",
    "build_registry",
    "closed_form_shortfalls",
    "complexity_term",
    "decode_value",
    "encode_variable",
    "range_encoding",
    "read_manifest",
    "row_label",
    "spin_counts",
    "total_spins",
    "write_manifest",
]
