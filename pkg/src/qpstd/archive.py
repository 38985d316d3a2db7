"""On-disk artifacts: the phasor archive, angular-scan CSVs, manifests.

Phasor archive layout (little-endian):

    8 bytes   magic  b"QPSTDPH1"
    4 bytes   uint32 header length
    N bytes   UTF-8 JSON header: lattice dims, spacings, box window,
              frequency list, face order, per-frequency incident phasor,
              sample count, plus free-form run metadata
    raw data  for each frequency, for each face in FACE order:
              psi plane then normal-derivative plane, complex128 stored as
              interleaved float64 (re, im) in row-major plane order

A human-readable sidecar ``<archive>.meta.txt`` mirrors the header.  CSV
columns use 17 significant digits so regression diffs are meaningful.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .ntdf import FACES, FACE_NAMES, SurfacePhasors

MAGIC = b"QPSTDPH1"
_FMT = "%.17g"


def write_phasor_archive(
    path,
    phasors_by_omega: Dict[float, SurfacePhasors],
    meta: Optional[dict] = None,
) -> Path:
    path = Path(path)
    omegas = sorted(phasors_by_omega)
    first = phasors_by_omega[omegas[0]]
    n = tuple(c.size for c in first.coords)
    header = {
        "format": MAGIC.decode(),
        "n": list(n),
        "spacing": [float(h) for h in first.spacing],
        "box_window": [list(bw) for bw in first.box_window],
        "omegas": [float(w) for w in omegas],
        "faces": [FACE_NAMES[f] for f in FACES],
        "scaled": bool(first.scaled),
        "n_samples": int(first.n_samples),
        "incident_phasor": {
            str(float(w)): [
                float(np.real(phasors_by_omega[w].incident_phasor)),
                float(np.imag(phasors_by_omega[w].incident_phasor)),
            ]
            for w in omegas
        },
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for w in omegas:
            ph = phasors_by_omega[w]
            for face in FACES:
                psi, dpsi = ph.planes[face]
                for plane in (psi, dpsi):
                    arr = np.ascontiguousarray(plane, dtype=np.complex128)
                    fh.write(arr.astype("<c16").tobytes())
    sidecar = path.with_name(path.name + ".meta.txt")
    with open(sidecar, "w", encoding="utf-8") as fh:
        fh.write("phasor archive metadata\n")
        for k in ("format", "n", "spacing", "box_window", "omegas", "faces",
                  "scaled", "n_samples"):
            fh.write(f"{k}: {header[k]}\n")
        for k, v in (meta or {}).items():
            fh.write(f"meta.{k}: {v}\n")
    return path


def read_phasor_archive(path) -> Dict[float, SurfacePhasors]:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValueError(f"{path} is not a phasor archive")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        n = tuple(int(m) for m in header["n"])
        spacing = tuple(float(h) for h in header["spacing"])
        box_window = tuple(tuple(int(i) for i in bw) for bw in header["box_window"])
        coords = tuple(
            (np.arange(m) - 0.5 * (m - 1)) * h for m, h in zip(n, spacing)
        )
        out = {}
        for w in header["omegas"]:
            planes = {}
            for face in FACES:
                axis, _ = face
                u_ax, v_ax = tuple(a for a in range(3) if a != axis)
                shape = (n[u_ax], n[v_ax])
                count = shape[0] * shape[1]
                pair = []
                for _ in range(2):
                    buf = fh.read(16 * count)
                    pair.append(np.frombuffer(buf, dtype="<c16").reshape(shape).copy())
                planes[face] = (pair[0], pair[1])
            inc = header["incident_phasor"][str(float(w))]
            out[float(w)] = SurfacePhasors(
                omega=float(w),
                spacing=spacing,
                coords=coords,
                box_window=box_window,
                planes=planes,
                incident_phasor=complex(inc[0], inc[1]),
                scaled=bool(header["scaled"]),
                n_samples=int(header["n_samples"]),
            )
        return out


def read_archive_meta(path) -> dict:
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError(f"{path} is not a phasor archive")
        (hlen,) = struct.unpack("<I", fh.read(4))
        return json.loads(fh.read(hlen).decode("utf-8"))


def write_scan_csv(path, gamma_deg: np.ndarray, values: np.ndarray) -> Path:
    """Angular scan: gamma_deg, re, im, abs2."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("gamma_deg,re,im,abs2\n")
        for g, v in zip(gamma_deg, values):
            fh.write(
                f"{_FMT % g},{_FMT % v.real},{_FMT % v.imag},{_FMT % abs(v) ** 2}\n"
            )
    return path


def write_cross_section_csv(path, gamma_deg: np.ndarray, dsdo: np.ndarray) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("gamma_deg,dsigma_domega\n")
        for g, v in zip(gamma_deg, dsdo):
            fh.write(f"{_FMT % g},{_FMT % v}\n")
    return path


def write_joined_csv(
    path, gamma_deg: np.ndarray, solver: np.ndarray, reference: np.ndarray
) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("gamma_deg,dsigma_domega_solver,dsigma_domega_oracle\n")
        for g, a, b in zip(gamma_deg, solver, reference):
            fh.write(f"{_FMT % g},{_FMT % a},{_FMT % b}\n")
    return path


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    path,
    config_text: str,
    outputs: Sequence[Path],
    extra: Optional[dict] = None,
) -> Path:
    """Run manifest: config snapshot, version, timings, file checksums."""
    from . import __version__

    path = Path(path)
    manifest = {
        "version": f"qpstd-{__version__}",
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
        "config": config_text,
        "outputs": [
            {"path": str(Path(p).name), "sha256": sha256_of(p)} for p in outputs
        ],
    }
    if extra:
        manifest.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
