"""On-disk formats: CFI images, experiment CSVs, PPM renders and run manifests.

CFI layout (little endian)::

    b"CFI1" | uint32 rows | uint32 cols | rows*cols*(float32 re, float32 im)

Measurement vectors are stored with ``rows = 1``; masks as 0/1 real parts.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import os
from pathlib import Path

import numpy as np

MAGIC = b"CFI1"
_HEADER = np.dtype([("rows", "<u4"), ("cols", "<u4")])
SCHEMA_VERSION = 1


def write_cfi(path, arr) -> None:
    arr = np.asarray(arr)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError("CFI holds 2D arrays (or 1D vectors as a single row)")
    rows, cols = arr.shape
    data = np.empty((rows, cols, 2), dtype="<f4")
    data[..., 0] = arr.real
    data[..., 1] = arr.imag if np.iscomplexobj(arr) else 0.0
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.array([(rows, cols)], dtype=_HEADER).tobytes())
        fh.write(data.tobytes())


def read_cfi(path) -> np.ndarray:
    """Read a CFI file into a ``complex64`` array of shape ``(rows, cols)``."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a CFI file")
    hdr = np.frombuffer(raw, dtype=_HEADER, count=1, offset=4)[0]
    rows, cols = int(hdr["rows"]), int(hdr["cols"])
    expected = 12 + rows * cols * 8
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=12).reshape(rows, cols, 2)
    out = np.empty((rows, cols), dtype=np.complex64)
    out.real = data[..., 0]
    out.imag = data[..., 1]
    return out


def read_vector(path) -> np.ndarray:
    arr = read_cfi(path)
    if arr.shape[0] != 1:
        raise ValueError(f"{path}: expected a single-row measurement file")
    return arr[0]


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

ATTACK_FIELDS = [
    "image_id", "lines", "m", "n", "noise_rel", "mu1", "mu2", "sigma",
    "e_l2", "r_inf", "rho_inf", "alpha",
]


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def append_rows(path, fields, rows) -> None:
    path = Path(path)
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if new:
            writer.writerow(fields)
        for row in rows:
            writer.writerow([fmt(row[f]) for f in fields])


def write_rows(path, fields, rows) -> None:
    path = Path(path)
    if path.exists():
        path.unlink()
    append_rows(path, fields, rows)


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def render_rgb(img, vmax_excess: float = 1.0) -> np.ndarray:
    """Map ``|img|`` to RGB: [0, 1] as grayscale, values above 1 fading from white to red.

    The red saturation is ``min(1, (v - 1) / vmax_excess)``.
    """
    if vmax_excess <= 0:
        raise ValueError("vmax_excess must be positive")
    v = np.abs(np.asarray(img))
    gray = np.floor(255.0 * np.clip(v, 0.0, 1.0) + 0.5).astype(np.uint8)
    rgb = np.repeat(gray[..., None], 3, axis=-1)
    over = v > 1.0
    if over.any():
        s = np.minimum(1.0, (v[over] - 1.0) / vmax_excess)
        gb = np.floor(255.0 * (1.0 - s) + 0.5).astype(np.uint8)
        rgb[over, 0] = 255
        rgb[over, 1] = gb
        rgb[over, 2] = gb
    return rgb


def write_ppm(path, rgb: np.ndarray) -> None:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def read_ppm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError(f"{path}: not a binary PPM")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)


def render(img, path, vmax_excess: float = 1.0) -> None:
    write_ppm(path, render_rgb(img, vmax_excess))


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def record_run(out_dir, command: dict, seed: int, inputs, outputs, started: str, extra=None) -> Path:
    """Append one run to ``out_dir/manifest.json`` with SHA-256 digests of its files."""
    out_dir = Path(out_dir)
    path = out_dir / "manifest.json"
    if path.exists():
        manifest = json.loads(path.read_text())
    else:
        manifest = {"schema_version": SCHEMA_VERSION, "runs": []}
    run = {
        "command": command,
        "seed": seed,
        "timestamps": {"started": started, "finished": now()},
        "inputs": {str(p): sha256(p) for p in inputs},
        "outputs": {os.path.relpath(p, out_dir): sha256(p) for p in outputs},
    }
    if extra:
        run["extra"] = extra
    manifest["runs"].append(run)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
