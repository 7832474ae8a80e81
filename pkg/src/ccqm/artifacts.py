"""On-disk artifact formats: snapshots, traces, event logs, reports, manifests.

All writers are deterministic: given identical inputs they produce
byte-identical files.  Floats are serialized with ``repr`` (shortest
round-trip), JSON objects with sorted keys.

Wavefunction snapshot (text, versioned):

    ccqm-wavefunction 1
    {json header: particles, spatial_dims, extents, cell_lengths, f0,
     theta0, cell_mode, encoding, amp_scale, seed, time}
    <one row-major line per cell>

Quantized states store integer rows ``n_f n_theta`` (exact round-trip);
continuous states store ``re im`` float rows.

Volume trace CSV: ``time,relative_volume,max_cell_magnitude_over_f0`` with
a ``# config_hash=...`` comment line first.

Event log: JSON lines; first line a meta record with seed and config hash,
then one record per event.

Spectrum CSV: ``nu_Hz,u,N,N_fixed,N_variable,magnification``.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .astro import SpectrumTable
from .errors import ConfigError
from .evolution import VolumeTraceRow
from .wavefunction import (
    DiscreteWavefunction,
    FixedCell,
    ParticleMeta,
    QuantizationParams,
    Statistics,
    VariableCell,
)

SNAPSHOT_MAGIC = "ccqm-wavefunction 1"


def _cell_mode_to_json(mode) -> dict:
    if isinstance(mode, FixedCell):
        return {"kind": "fixed", "length": mode.length}
    return {"kind": "variable", "wavelength_ratio": mode.wavelength_ratio}


def _cell_mode_from_json(obj):
    if obj["kind"] == "fixed":
        return FixedCell(obj["length"])
    return VariableCell(obj["wavelength_ratio"])


def write_wavefunction_snapshot(
    path, psi: DiscreteWavefunction, *, seed: int | None = None, time: float | None = None
) -> None:
    encoding = "steps" if psi.quantized else "complex"
    header = {
        "n_particles": psi.n_particles,
        "spatial_dims": psi.spatial_dims,
        "extents": list(psi.grid_extents),
        "cell_lengths": list(psi.cell_lengths),
        "f0": psi.quant.base_magnitude,
        "theta0": psi.quant.base_phase,
        "cell_mode": _cell_mode_to_json(psi.quant.cell_mode),
        "quantize_during_evolution": psi.quant.quantize_during_evolution,
        "particles": [
            {
                "mass": p.mass,
                "species_id": p.species_id,
                "statistics": p.statistics.value,
                "mean_de_broglie_wavelength": p.mean_de_broglie_wavelength,
            }
            for p in psi.particles
        ],
        "encoding": encoding,
        "amp_scale": psi.amp_scale,
        "seed": seed,
        "time": time,
    }
    lines = [SNAPSHOT_MAGIC, json.dumps(header, sort_keys=True)]
    if encoding == "steps":
        for nf, nt in zip(psi.magnitude_steps.ravel(), psi.phase_steps.ravel()):
            lines.append(f"{int(nf)} {int(nt)}")
    else:
        for value in psi.amplitudes.ravel():
            lines.append(f"{value.real!r} {value.imag!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_wavefunction_snapshot(path) -> DiscreteWavefunction:
    text = Path(path).read_text().splitlines()
    if not text or text[0] != SNAPSHOT_MAGIC:
        raise ConfigError(f"{path} is not a wavefunction snapshot (bad magic line)")
    header = json.loads(text[1])
    extents = tuple(header["extents"])
    count = int(np.prod(extents))
    rows = text[2 : 2 + count]
    if len(rows) != count:
        raise ConfigError(f"snapshot holds {len(rows)} cells, header promises {count}")
    quant = QuantizationParams(
        base_magnitude=header["f0"],
        base_phase=header["theta0"],
        cell_mode=_cell_mode_from_json(header["cell_mode"]),
        quantize_during_evolution=header.get("quantize_during_evolution", False),
    )
    particles = tuple(
        ParticleMeta(
            mass=p["mass"],
            species_id=p["species_id"],
            statistics=Statistics(p["statistics"]),
            mean_de_broglie_wavelength=p["mean_de_broglie_wavelength"],
        )
        for p in header["particles"]
    )
    magnitude_steps = phase_steps = None
    amp_scale = header["amp_scale"]
    if header["encoding"] == "steps":
        data = np.array([[int(v) for v in row.split()] for row in rows], dtype=np.int64)
        magnitude_steps = data[:, 0].reshape(extents)
        phase_steps = data[:, 1].reshape(extents)
        amplitudes = (
            amp_scale
            * magnitude_steps
            * quant.base_magnitude
            * np.exp(1j * quant.base_phase * phase_steps)
        )
    else:
        data = np.array([[float(v) for v in row.split()] for row in rows])
        amplitudes = (data[:, 0] + 1j * data[:, 1]).reshape(extents)
    return DiscreteWavefunction(
        particles=particles,
        spatial_dims=header["spatial_dims"],
        amplitudes=amplitudes,
        quant=quant,
        cell_lengths=tuple(header["cell_lengths"]),
        magnitude_steps=magnitude_steps,
        phase_steps=phase_steps,
        amp_scale=amp_scale,
    )


def write_volume_trace_csv(path, rows: list[VolumeTraceRow], config_hash: str) -> None:
    lines = [f"# config_hash={config_hash}", "time,relative_volume,max_cell_magnitude_over_f0"]
    for row in rows:
        lines.append(f"{row.time!r},{row.volume},{row.peak_magnitude_over_f0!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_volume_trace_csv(path) -> list[VolumeTraceRow]:
    rows = []
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#") or line.startswith("time,"):
            continue
        t, v, peak = line.split(",")
        rows.append(VolumeTraceRow(float(t), int(v), float(peak)))
    return rows


def write_event_log(path, records: list[dict], *, seed: int, config_hash: str) -> None:
    meta = {"record": "meta", "seed": seed, "config_hash": config_hash}
    lines = [json.dumps(meta, sort_keys=True)]
    lines.extend(json.dumps(r, sort_keys=True) for r in records)
    Path(path).write_text("\n".join(lines) + "\n")


def read_event_log(path) -> tuple[dict, list[dict]]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ConfigError(f"{path} is empty")
    meta = json.loads(lines[0])
    return meta, [json.loads(line) for line in lines[1:]]


def write_spectrum_csv(path, table: SpectrumTable, config_hash: str) -> None:
    lines = [f"# config_hash={config_hash}", "nu_Hz,u,N,N_fixed,N_variable,magnification"]
    mag = table.magnification
    for nu, u, n0, nf, nv in zip(
        table.nu_hz, table.u, table.n_planck, table.n_fixed, table.n_variable
    ):
        lines.append(f"{nu!r},{u!r},{n0!r},{nf!r},{nv!r},{mag!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_spectrum_csv(path) -> SpectrumTable:
    data = []
    mag = 1.0
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#") or line.startswith("nu_Hz"):
            continue
        parts = [float(v) for v in line.split(",")]
        data.append(parts[:5])
        mag = parts[5]
    arr = np.array(data)
    return SpectrumTable(
        nu_hz=arr[:, 0],
        u=arr[:, 1],
        n_planck=arr[:, 2],
        n_fixed=arr[:, 3],
        n_variable=arr[:, 4],
        magnification=mag,
    )


def write_json_report(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def write_manifest(
    path,
    *,
    config_hash: str,
    tool_version: str,
    started_utc: str,
    finished_utc: str,
    files,
) -> None:
    base = Path(path).parent
    entries = []
    for f in sorted(Path(p) for p in files):
        entries.append(
            {
                "path": str(f.relative_to(base)) if f.is_relative_to(base) else str(f),
                "sha256": sha256_file(f),
                "bytes": f.stat().st_size,
            }
        )
    payload = {
        "config_hash": config_hash,
        "tool_version": tool_version,
        "started_utc": started_utc,
        "finished_utc": finished_utc,
        "files": entries,
    }
    write_json_report(path, payload)


def write_world_snapshot(
    path, snapshot_files: list, event_log_path, config_hash: str
) -> None:
    """Manifest tying a world's wavefunction snapshots to its event log."""
    base = Path(path).parent

    def rel(p):
        p = Path(p)
        return str(p.relative_to(base)) if p.is_relative_to(base) else str(p)

    payload = {
        "config_hash": config_hash,
        "wavefunctions": [rel(p) for p in snapshot_files],
        "event_log": rel(event_log_path),
    }
    write_json_report(path, payload)


def nan_guard(value: float, label: str) -> float:
    if not math.isfinite(value):
        raise ConfigError(f"{label} is not finite")
    return value
