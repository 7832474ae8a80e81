"""Matplotlib renderings written alongside the delimited outputs.

Every CLI command that emits a CSV also drops a PNG of the same data so a
run directory is inspectable at a glance.  The CSV stays the authoritative
artifact; figures are a convenience layer and contain nothing that is not
in the delimited files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .astro import SpectrumTable
from .evolution import VolumeTraceRow


def render_volume_trace(rows: list[VolumeTraceRow], path, critical_volume: int | None = None):
    fig, ax = plt.subplots(figsize=(7, 4))
    times = [r.time for r in rows]
    volumes = [r.volume for r in rows]
    ax.step(times, volumes, where="post", lw=1.2)
    if critical_volume is not None:
        ax.axhline(critical_volume, color="crimson", ls="--", lw=0.9, label="critical volume")
        ax.legend(loc="lower right")
    ax.set_xlabel("time (natural units)")
    ax.set_ylabel("relative volume (cells)")
    ax.set_title("Relative volume trace")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_spectrum(table: SpectrumTable, path):
    """Planck curve plus the two perturbed spectra, differences magnified."""
    mag = table.magnification
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(table.nu_hz, table.n_planck, color="tab:blue", lw=1.4, label="Planck")
    ax.plot(
        table.nu_hz,
        table.n_planck + mag * (table.n_fixed - table.n_planck),
        color="tab:red",
        lw=1.1,
        label=f"fixed cell (diff x{mag:g})",
    )
    ax.plot(
        table.nu_hz,
        table.n_planck + mag * (table.n_variable - table.n_planck),
        color="tab:green",
        lw=1.1,
        label=f"variable cell (diff x{mag:g})",
    )
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel(r"photon number density (m$^{-3}$ Hz$^{-1}$)")
    ax.set_title("CMB photon number density")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_histogram(observed, expected, path):
    observed = np.asarray(observed)
    expected = np.asarray(expected)
    cells = np.arange(observed.size)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(cells, observed, width=1.0, alpha=0.6, label="observed")
    ax.plot(cells, expected, color="black", lw=1.0, label="expected")
    ax.set_xlabel("cell index")
    ax.set_ylabel("draw count")
    ax.set_title("Collapse-center histogram")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_deviation_curve(counts, deviations, resolution, path):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(counts, deviations, lw=1.2, label="accumulated deviation")
    ax.axhline(resolution, color="crimson", ls="--", lw=0.9, label="telescope resolution")
    ax.set_xlabel("collapse count n")
    ax.set_ylabel("angular deviation (rad)")
    ax.set_title("Starlight deviation vs collapse count")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_world_trace(times, wavefunction_counts, total_volumes, path):
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    ax1.step(times, wavefunction_counts, where="post", lw=1.2)
    ax1.set_ylabel("wavefunctions")
    ax2.step(times, total_volumes, where="post", lw=1.2, color="tab:orange")
    ax2.set_ylabel("summed volume")
    ax2.set_xlabel("time (natural units)")
    fig.suptitle("World evolution")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
