"""File formats: time tags, histograms and JSON reports.

Text files start with ``# key=value`` header lines, the first of which is
always the format tag (``# format=qdcascade-timetags/1`` and so on).
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Any

import numpy as np

from .streams import CoincidenceHistogram, TimeTagStream

TIMETAG_FORMAT = "qdcascade-timetags/1"
HISTOGRAM_FORMAT = "qdcascade-histogram/1"
BINARY_MAGIC = b"QDTT"
BINARY_VERSION = 1


class FormatError(ValueError):
    def __init__(self, message: str, line: int | None = None, path=None):
        prefix = f"{path}:" if path is not None else ""
        prefix += f"line {line}: " if line is not None else (" " if prefix else "")
        super().__init__(prefix + message)
        self.line = line


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _header(fields: dict[str, Any]) -> str:
    return "".join(f"# {k}={_fmt(v)}\n" for k, v in fields.items())


def _read_header(lines, path, expected_format):
    header, n = {}, 0
    for n, line in enumerate(lines, 1):
        if not line.startswith("#"):
            return header, n - 1
        body = line[1:].strip()
        if "=" not in body:
            raise FormatError(f"malformed header line {line.rstrip()!r}", n, path)
        k, v = body.split("=", 1)
        header[k.strip()] = v.strip()
    if header.get("format") != expected_format:
        raise FormatError(f"expected format {expected_format!r}, got {header.get('format')!r}", 1, path)
    return header, n


def _check_format(header, path, expected):
    if header.get("format") != expected:
        raise FormatError(f"expected format {expected!r}, got {header.get('format')!r}", 1, path)


def _meta_fields(meta: dict) -> dict:
    return {f"meta.{k}": v for k, v in sorted(meta.items())}


def _parse_meta(header: dict) -> dict:
    out = {}
    for k, v in header.items():
        if k.startswith("meta."):
            out[k[5:]] = _literal(v)
    return out


def _literal(s: str):
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    if s in ("True", "False"):
        return s == "True"
    return s


# -- time tags -------------------------------------------------------------------


def write_timetags(stream: TimeTagStream, path) -> None:
    """CSV with a metadata header, rows ``detector_id,timestamp_ps`` in time order."""
    if not stream.is_sorted():
        raise ValueError("stream is not sorted by timestamp")
    head = {"format": TIMETAG_FORMAT, "t_start": stream.t_start, "t_end": stream.t_end, "count": len(stream)}
    head.update(_meta_fields(stream.meta))
    rows = np.column_stack([stream.detector_ids.astype(np.int64), stream.timestamps])
    with open(path, "w", newline="\n") as fh:
        fh.write(_header(head))
        fh.write("detector_id,timestamp_ps\n")
        if rows.size:
            np.savetxt(fh, rows, fmt="%d", delimiter=",")


def read_timetags(path, sort: bool = False) -> TimeTagStream:
    """Inverse of :func:`write_timetags`.

    Unsorted rows are rejected unless ``sort`` is true.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    header, n_head = _read_header(lines, path, TIMETAG_FORMAT)
    _check_format(header, path, TIMETAG_FORMAT)
    if n_head >= len(lines) or lines[n_head].strip() != "detector_id,timestamp_ps":
        raise FormatError("missing column header 'detector_id,timestamp_ps'", n_head + 1, path)
    body = lines[n_head + 1 :]
    ids = np.empty(len(body), dtype=np.int64)
    ts = np.empty(len(body), dtype=np.int64)
    for i, line in enumerate(body):
        parts = line.split(",")
        try:
            if len(parts) != 2:
                raise ValueError
            ids[i], ts[i] = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(f"malformed row {line!r}", n_head + 2 + i, path) from None
    if "count" in header and int(header["count"]) != len(body):
        raise FormatError(f"header announces {header['count']} rows, found {len(body)}", None, path)
    s = TimeTagStream(ts, ids.astype(np.int16), int(header.get("t_start", 0)), int(header.get("t_end", 0)), _parse_meta(header))
    if not s.is_sorted():
        if not sort:
            bad = int(np.flatnonzero(np.diff(ts) < 0)[0]) + 1
            raise FormatError("timestamps not sorted (pass sort=True to accept)", n_head + 2 + bad, path)
        s = s.sorted()
    return s


def write_timetags_binary(stream: TimeTagStream, path) -> None:
    """Length-prefixed binary variant: magic, version, header JSON, then n int16 ids and n int64 timestamps."""
    if not stream.is_sorted():
        raise ValueError("stream is not sorted by timestamp")
    head = json.dumps({"t_start": stream.t_start, "t_end": stream.t_end, "meta": stream.meta}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC + struct.pack("<HI", BINARY_VERSION, len(head)) + head)
        fh.write(struct.pack("<Q", len(stream)))
        fh.write(stream.detector_ids.astype("<i2").tobytes())
        fh.write(stream.timestamps.astype("<i8").tobytes())


def read_timetags_binary(path, sort: bool = False) -> TimeTagStream:
    data = Path(path).read_bytes()
    if data[:4] != BINARY_MAGIC:
        raise FormatError("not a binary time-tag file", None, path)
    version, hlen = struct.unpack_from("<HI", data, 4)
    if version != BINARY_VERSION:
        raise FormatError(f"unsupported version {version}", None, path)
    off = 10
    head = json.loads(data[off : off + hlen])
    off += hlen
    (n,) = struct.unpack_from("<Q", data, off)
    off += 8
    if len(data) != off + 10 * n:
        raise FormatError(f"truncated file: expected {off + 10 * n} bytes, found {len(data)}", None, path)
    ids = np.frombuffer(data, "<i2", n, off).astype(np.int16)
    ts = np.frombuffer(data, "<i8", n, off + 2 * n).astype(np.int64)
    s = TimeTagStream(ts, ids, head["t_start"], head["t_end"], head["meta"])
    if not s.is_sorted():
        if not sort:
            raise FormatError("timestamps not sorted (pass sort=True to accept)", None, path)
        s = s.sorted()
    return s


# -- histograms ----------------------------------------------------------------


def write_histogram(h: CoincidenceHistogram, path) -> None:
    head = {
        "format": HISTOGRAM_FORMAT,
        "bin_width": h.bin_width,
        "origin": h.origin,
        "integration_time": h.integration_time,
        "singles_rate_0": h.singles_rates[0],
        "singles_rate_1": h.singles_rates[1],
        "period": h.period,
        "bins": len(h),
    }
    head.update(_meta_fields(h.meta))
    with open(path, "w", newline="\n") as fh:
        fh.write(_header(head))
        fh.write("bin_start_ps,count\n")
        for start, c in zip(h.edges[:-1], h.counts):
            fh.write(f"{_fmt(float(start))},{int(c)}\n")


def read_histogram(path) -> CoincidenceHistogram:
    with open(path) as fh:
        lines = fh.read().splitlines()
    header, n_head = _read_header(lines, path, HISTOGRAM_FORMAT)
    _check_format(header, path, HISTOGRAM_FORMAT)
    if n_head >= len(lines) or lines[n_head].strip() != "bin_start_ps,count":
        raise FormatError("missing column header 'bin_start_ps,count'", n_head + 1, path)
    try:
        width = float(header["bin_width"])
        origin = float(header["origin"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad or missing header field {exc}", None, path) from None
    body = lines[n_head + 1 :]
    counts = np.empty(len(body), dtype=np.int64)
    for i, line in enumerate(body):
        n = n_head + 2 + i
        parts = line.split(",")
        try:
            if len(parts) != 2:
                raise ValueError
            start, c = float(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(f"malformed row {line!r}", n, path) from None
        if c < 0:
            raise FormatError("negative count", n, path)
        if not np.isclose(start, origin + i * width, rtol=0, atol=1e-6 * width):
            raise FormatError(f"bin start {start} does not follow origin + i * bin_width", n, path)
        counts[i] = c
    if "bins" in header and int(header["bins"]) != len(body):
        raise FormatError(f"header announces {header['bins']} bins, found {len(body)}", None, path)
    if width == int(width):
        width = int(width)
    return CoincidenceHistogram(
        bin_width=width,
        origin=origin,
        counts=counts,
        integration_time=float(header.get("integration_time", 0.0)),
        singles_rates=(float(header.get("singles_rate_0", 0.0)), float(header.get("singles_rate_1", 0.0))),
        period=_literal(header.get("period", "0")),
        meta=_parse_meta(header),
    )


# -- reports and plot data -------------------------------------------------------


def canonical_json(obj) -> str:
    """Sorted keys, two-space indent, floats rounded to 10 significant digits."""
    return json.dumps(_round(obj), sort_keys=True, indent=2, allow_nan=True) + "\n"


def _round(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.10g}") if np.isfinite(x) else x
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_round(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(obj, path) -> None:
    Path(path).write_text(canonical_json(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


def write_table(path, columns: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Plot-data CSV: ``# key=value`` header, then one named column per series."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names]) if names else np.empty((0, 0))
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(_header({"format": "qdcascade-table/1", **(meta or {})}))
        fh.write(",".join(names) + "\n")
        for row in data:
            fh.write(",".join(f"{v:.10g}" for v in row) + "\n")
