"""Registry manifest: the decode-side record of every variable's encoding.

Format (UTF-8, one record per line)::

    meta <key> <value>
    <kind> <layer> <sample|-> <element|-> <scale_num>/<scale_den> <offset_num>/<offset_den> <first_bit> <num_bits>

``element`` indices are joined with dots (``0.3``).  ``meta`` lines carry
run defaults and derived bounds so a compiled run is auditable.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Tuple, Union

from app.encoding.variables import AffineEncoding, VariableKey, VariableKind
from app.encoding.registry import VariableRegistry
from app.errors import EncodingError, FormatError
from app.poly.textio import format_rational, parse_rational

PathLike = Union[str, Path]

HEADER = "manifest/1"


def dumps_manifest(registry: VariableRegistry, meta: Optional[Mapping[str, object]] = None) -> str:
    lines = [HEADER, f"meta layers {registry.layers}", f"meta original_bits {registry.num_original_bits}"]
    for key, value in (meta or {}).items():
        if key in ("layers", "original_bits"):
            continue
        lines.append(f"meta {key} {value}")
    for key, enc in registry.items():
        sample = "-" if key.sample is None else str(key.sample)
        element = ".".join(str(idx) for idx in key.element) or "-"
        lines.append(
            " ".join(
                [
                    key.kind.value,
                    str(key.layer),
                    sample,
                    element,
                    format_rational(enc.scale),
                    format_rational(enc.offset),
                    str(enc.first_bit),
                    str(enc.num_bits),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def loads_manifest(
    lines: Iterable[str], source: Optional[PathLike] = None
) -> Tuple[VariableRegistry, Dict[str, str]]:
    meta: Dict[str, str] = {}
    entries: Dict[VariableKey, AffineEncoding] = {}
    seen_header = False
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        if not seen_header:
            if text != HEADER:
                raise FormatError(f"Expected header {HEADER!r}", path=source, line=lineno)
            seen_header = True
            continue
        if text.startswith("meta "):
            parts = text.split(" ", 2)
            if len(parts) < 3:
                raise FormatError("meta line needs a key and a value", path=source, line=lineno)
            meta[parts[1]] = parts[2]
            continue
        tokens = text.split()
        if len(tokens) != 8:
            raise FormatError(f"Expected 8 fields, got {len(tokens)}", path=source, line=lineno)
        try:
            key = VariableKey(
                VariableKind(tokens[0]),
                int(tokens[1]),
                None if tokens[2] == "-" else int(tokens[2]),
                () if tokens[3] == "-" else tuple(int(idx) for idx in tokens[3].split(".")),
            )
            enc = AffineEncoding.offset_binary(
                int(tokens[6]), int(tokens[7]), parse_rational(tokens[5]), parse_rational(tokens[4])
            )
        except (ValueError, TypeError, EncodingError) as exc:
            raise FormatError(str(exc), path=source, line=lineno) from exc
        if key in entries:
            raise FormatError(f"Duplicate variable {key.label()}", path=source, line=lineno)
        entries[key] = enc
    if not seen_header:
        raise FormatError("Empty manifest", path=source)
    num_bits = sum(enc.num_bits for enc in entries.values())
    original = sum(enc.num_bits for key, enc in entries.items() if key.kind != VariableKind.REDUCTION_AUX)
    try:
        registry = VariableRegistry(entries, num_bits, original, int(meta.get("layers", 2)))
    except Exception as exc:
        raise FormatError(f"Inconsistent manifest: {exc}", path=source) from exc
    return registry, meta


def write_manifest(registry: VariableRegistry, path: PathLike, meta: Optional[Mapping[str, object]] = None) -> None:
    Path(path).write_text(dumps_manifest(registry, meta), encoding="utf-8")


def read_manifest(path: PathLike) -> Tuple[VariableRegistry, Dict[str, str]]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        return loads_manifest(handle, source=path)
