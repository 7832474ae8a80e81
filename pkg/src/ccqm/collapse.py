"""Stochastic collapse mechanisms.

Two mechanisms share the Born-weighted center draw:

* GRW baseline: at Poisson-timed hits a single particle is multiplied by a
  position-space Gaussian of width 1/sqrt(alpha) and the state is
  renormalized.  Localizing one particle of an exchange-symmetric pair
  breaks the symmetry — kept here deliberately as the contrast case.
* Critical-volume collapse: when the quantized relative volume reaches the
  critical value v_c, the whole configuration-space state is multiplied by
  an exchange-symmetric product of per-particle Gaussians exp(-eps*x^2/2),
  with eps solved so the post-collapse volume is the fraction F of the
  pre-collapse volume.  Because the multiplier is exchange-invariant over
  every identical-particle group, bosonic symmetry and fermionic
  antisymmetry survive the collapse.

Quantization is applied immediately after either multiplication, so
Gaussian tails become exact zeros and the post-collapse volume is
unambiguous.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.signal

from .errors import ConfigError, EpsilonBracketError, VanishingWavefunctionError
from .wavefunction import (
    DiscreteWavefunction,
    QuantizationParams,
    identical_groups,
    normalize,
    project_density,
    quantize,
    relative_volume,
)


@dataclass(frozen=True)
class GRWParams:
    """Localization accuracy alpha (1/length^2) and per-particle hit rate.

    Defaults are the conventional SI choices 1/sqrt(alpha) = 1e-7 m and
    lambda = 1e-16 s^-1; rescale when working in natural grid units.
    """

    localization_alpha: float = 1e14
    hit_rate: float = 1e-16

    def __post_init__(self):
        if not self.localization_alpha > 0:
            raise ConfigError("localization alpha must be positive")
        if not self.hit_rate > 0:
            raise ConfigError("hit rate must be positive")


@dataclass(frozen=True)
class CCQMParams:
    """Critical-volume collapse parameters."""

    critical_volume: int
    collapse_fraction: float = 0.5
    split_attempt_probability: float = 0.5
    epsilon_bracket: tuple[float, float] = (1e-12, 1e12)

    def __post_init__(self):
        if self.critical_volume < 2:
            raise ConfigError(f"critical volume must be >= 2, got {self.critical_volume}")
        if not 0.0 < self.collapse_fraction < 1.0:
            raise ConfigError("collapse fraction must lie in (0, 1)")
        if not 0.0 <= self.split_attempt_probability <= 1.0:
            raise ConfigError("split attempt probability must lie in [0, 1]")
        lo, hi = self.epsilon_bracket
        if not (0.0 < lo < hi):
            raise ConfigError("epsilon bracket must satisfy 0 < lo < hi")


@dataclass(frozen=True)
class CollapseEvent:
    """Record of one stochastic event, serializable to a JSON-lines row."""

    time: float
    kind: str  # "grw_hit" | "ccqm_collapse" | "merge" | "split"
    v_pre: int
    v_post: int
    center: tuple[float, ...] | None = None
    center_index: tuple[int, ...] | None = None
    width_param: float | None = None
    particle: int | None = None
    fidelity: float | None = None
    rng_draws: int = 0

    def to_record(self) -> dict:
        return {
            "record": "event",
            "time": self.time,
            "kind": self.kind,
            "v_pre": self.v_pre,
            "v_post": self.v_post,
            "center": list(self.center) if self.center is not None else None,
            "center_index": list(self.center_index) if self.center_index is not None else None,
            "width_param": self.width_param,
            "particle": self.particle,
            "fidelity": self.fidelity,
            "rng_draws": self.rng_draws,
        }


def _cell_coordinates(psi: DiscreteWavefunction, index: tuple[int, ...]) -> tuple[float, ...]:
    return tuple(float(psi.axis_coordinates(ax)[i]) for ax, i in enumerate(index))


def sample_collapse_center(
    psi: DiscreteWavefunction, rng: np.random.Generator
) -> tuple[tuple[int, ...], tuple[float, ...]]:
    """Draw a configuration-space cell with probability |psi|^2 * cell measure."""
    weights = np.abs(psi.amplitudes.ravel()) ** 2
    total = weights.sum()
    if total <= 0.0:
        raise VanishingWavefunctionError("cannot sample a center from a zero state")
    cdf = np.cumsum(weights / total)
    u = rng.random()
    flat = int(np.searchsorted(cdf, u, side="right"))
    flat = min(flat, weights.size - 1)
    index = tuple(int(i) for i in np.unravel_index(flat, psi.grid_extents))
    return index, _cell_coordinates(psi, index)


def grw_center_distribution(psi: DiscreteWavefunction, k: int, alpha: float) -> np.ndarray:
    """GRW center law on particle k's grid: P(x') = ||j(x'-x_k) psi||^2.

    Equals the particle marginal convolved with the squared jump Gaussian
    (alpha/pi)^(d/2) exp(-alpha r^2).  Returned normalized to sum 1.
    The convolution kernel is built on the (2n-1)-point offset grid so the
    alignment is exact for even and odd extents alike.
    """
    g = project_density(psi, k)
    a = psi.cell_lengths[k]
    offsets = [
        (np.arange(-(n - 1), n)) * a  # offset grid per axis
        for n in g.shape
    ]
    r2 = np.zeros(tuple(2 * n - 1 for n in g.shape))
    for j, off in enumerate(offsets):
        shape = [1] * g.ndim
        shape[j] = len(off)
        r2 = r2 + off.reshape(shape) ** 2
    kernel = np.exp(-alpha * r2)
    p = scipy.signal.fftconvolve(g, kernel, mode="valid")
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if total <= 0.0:
        raise VanishingWavefunctionError("degenerate center distribution")
    return p / total


def sample_grw_center(
    psi: DiscreteWavefunction, k: int, alpha: float, rng: np.random.Generator
) -> tuple[tuple[int, ...], tuple[float, ...]]:
    """Draw a hit center on particle k's position grid from the GRW law."""
    p = grw_center_distribution(psi, k, alpha)
    cdf = np.cumsum(p.ravel())
    u = rng.random()
    flat = min(int(np.searchsorted(cdf, u, side="right")), p.size - 1)
    index = tuple(int(i) for i in np.unravel_index(flat, p.shape))
    coords = tuple(
        float(psi.axis_coordinates(ax)[i]) for ax, i in zip(psi.particle_axes(k), index)
    )
    return index, coords


def _particle_gaussian(
    psi: DiscreteWavefunction, k: int, center: tuple[float, ...], strength: float
) -> np.ndarray:
    """exp(-strength * |x_k - c|^2 / 2) broadcast over the full grid."""
    ndim = psi.amplitudes.ndim
    r2 = 0.0
    for j, axis in enumerate(psi.particle_axes(k)):
        x = psi.axis_coordinates(axis)
        shape = [1] * ndim
        shape[axis] = len(x)
        r2 = r2 + (x.reshape(shape) - center[j]) ** 2
    return np.exp(-0.5 * strength * r2)


def grw_localize(
    psi: DiscreteWavefunction,
    k: int,
    center: tuple[float, ...],
    alpha: float,
    *,
    time: float = 0.0,
    rng_draws: int = 0,
) -> tuple[DiscreteWavefunction, CollapseEvent]:
    """Multiply particle k by the jump Gaussian at ``center``, renormalize, quantize.

    Quantization zeroes the Gaussian tails exactly, so the localized state
    has finite support.  Raises VanishingWavefunctionError when alpha is so
    large (or f0 so coarse) that nothing survives the rounding.
    """
    pre = psi if psi.quantized else quantize(psi)
    v_pre = relative_volume(pre)
    mult = _particle_gaussian(psi, k, center, alpha)
    hit = psi.amplitudes * mult
    if not np.any(hit):
        raise VanishingWavefunctionError("jump factor annihilated the state")
    cont = replace(psi, amplitudes=hit, magnitude_steps=None, phase_steps=None, amp_scale=1.0)
    try:
        out = quantize(normalize(cont))
    except VanishingWavefunctionError as exc:
        raise VanishingWavefunctionError(
            f"post-hit state vanished under quantization; alpha={alpha:g} is too "
            "large for this grid's base magnitude"
        ) from exc
    event = CollapseEvent(
        time=time,
        kind="grw_hit",
        v_pre=v_pre,
        v_post=relative_volume(out),
        center=tuple(center),
        width_param=alpha,
        particle=k,
        rng_draws=rng_draws,
    )
    return out, event


def grw_hit(
    psi: DiscreteWavefunction,
    k: int,
    params: GRWParams,
    rng: np.random.Generator,
    *,
    time: float = 0.0,
) -> tuple[DiscreteWavefunction, CollapseEvent]:
    """Sample a center from the GRW law and localize particle k there."""
    _, coords = sample_grw_center(psi, k, params.localization_alpha, rng)
    return grw_localize(psi, k, coords, params.localization_alpha, time=time, rng_draws=1)


def mean_hit_interval(n_particles: float, hit_rate: float) -> float:
    """Mean time between hits anywhere in an N-particle system: 1/(N*lambda)."""
    return 1.0 / (n_particles * hit_rate)


def grw_schedule(
    n_particles: int, hit_rate: float, horizon: float, rng: np.random.Generator
) -> list[tuple[float, int]]:
    """Poisson hit schedule of rate N*lambda over [0, horizon), sorted times."""
    if horizon < 0:
        raise ConfigError("horizon must be >= 0")
    if n_particles < 1:
        raise ConfigError("need at least one particle")
    rate = n_particles * hit_rate
    events: list[tuple[float, int]] = []
    t = rng.exponential(1.0 / rate)
    while t < horizon:
        events.append((float(t), int(rng.integers(n_particles))))
        t += rng.exponential(1.0 / rate)
    return events


def ccqm_jump_factor(
    psi: DiscreteWavefunction, center: tuple[float, ...], epsilon: float
) -> np.ndarray:
    """Exchange-symmetrized product of per-particle Gaussians at ``center``.

    For fully distinguishable particles this is the plain product
    prod_k exp(-eps |x_k - c_k|^2 / 2).  For each identical-particle group
    the product is averaged over permutations of the group's center blocks,
    which makes the multiplier exchange-invariant — the property that lets
    the collapse preserve bosonic symmetry and fermionic antisymmetry.
    Normalization prefactors are dropped; they cancel on renormalization.
    """
    if not epsilon > 0:
        raise ConfigError("epsilon must be positive")
    d = psi.spatial_dims
    centers = [tuple(center[k * d : (k + 1) * d]) for k in range(psi.n_particles)]
    groups = identical_groups(psi.particles)

    def product_for(assigned: list[tuple[float, ...]]) -> np.ndarray:
        out = np.ones((1,) * psi.amplitudes.ndim)
        for k in range(psi.n_particles):
            out = out * _particle_gaussian(psi, k, assigned[k], epsilon)
        return out

    if not groups:
        return product_for(centers)
    group_perms = [list(itertools.permutations(members)) for members, _ in groups]
    acc = np.zeros(psi.grid_extents)
    count = 0
    for combo in itertools.product(*group_perms):
        assigned = list(centers)
        for (members, _), perm in zip(groups, combo):
            for dst, src in zip(members, perm):
                assigned[dst] = centers[src]
        acc = acc + product_for(assigned)
        count += 1
    return acc / count


def collapse_volume_at(
    psi: DiscreteWavefunction,
    center: tuple[float, ...],
    epsilon: float,
    quant: QuantizationParams | None = None,
) -> int:
    """Relative volume of quantize(normalize(jump * psi)) without building the state."""
    q = quant if quant is not None else psi.quant
    hit = psi.amplitudes * ccqm_jump_factor(psi, center, epsilon)
    norm = math.sqrt(float(np.sum(np.abs(hit) ** 2)) * psi.cell_measure)
    if norm == 0.0:
        return 0
    return int(np.count_nonzero(np.abs(hit) >= 0.5 * q.base_magnitude * norm))


def ccqm_solve_epsilon(
    psi: DiscreteWavefunction,
    center: tuple[float, ...],
    params: CCQMParams,
    quant: QuantizationParams | None = None,
    *,
    iterations: int = 60,
) -> float:
    """Find eps so the post-collapse volume is round(F * v_pre) within one cell.

    Bisection on log(eps) over params.epsilon_bracket: post-volume is
    nonincreasing in eps, and the enormous dynamic range between few- and
    many-particle collapse widths makes log space the robust choice.  When
    integer volumes jump past the target between adjacent eps, the nearest
    achievable volume below the target is accepted, keeping the result
    strictly under the critical volume.  Among evaluations tied on volume
    the smallest eps wins.
    """
    pre = psi if psi.quantized else quantize(psi, quant)
    v_pre = relative_volume(pre)
    target = int(math.floor(params.collapse_fraction * v_pre + 0.5))
    lo, hi = params.epsilon_bracket
    seen: dict[float, int] = {}

    def vol(eps: float) -> int:
        if eps not in seen:
            seen[eps] = collapse_volume_at(psi, center, eps, quant)
        return seen[eps]

    v_lo, v_hi = vol(lo), vol(hi)
    if v_lo < target:
        raise EpsilonBracketError(
            f"volume at eps_min={lo:g} is already {v_lo} < target {target} "
            f"(v_pre={v_pre}); shrink eps_min"
        )
    if v_hi > target:
        raise EpsilonBracketError(
            f"volume at eps_max={hi:g} is still {v_hi} > target {target} "
            f"(v_pre={v_pre}); grow eps_max"
        )
    log_lo, log_hi = math.log(lo), math.log(hi)
    for _ in range(iterations):
        mid = math.exp(0.5 * (log_lo + log_hi))
        if vol(mid) >= target:
            log_lo = math.log(mid)
        else:
            log_hi = math.log(mid)
    exact = [e for e, v in seen.items() if v == target]
    if exact:
        return min(exact)
    close = [e for e, v in seen.items() if abs(v - target) <= 1]
    if close:
        return min(close)
    below = {e: v for e, v in seen.items() if v < target}
    best = max(below.values())
    return min(e for e, v in below.items() if v == best)


def ccqm_collapse(
    psi: DiscreteWavefunction,
    params: CCQMParams,
    quant: QuantizationParams | None = None,
    rng: np.random.Generator | None = None,
    *,
    time: float = 0.0,
) -> tuple[DiscreteWavefunction, CollapseEvent]:
    """One critical-volume collapse: Born-sampled center, solved width, quantize.

    Requires the (quantized) relative volume to be at least the critical
    volume.  The center is drawn from |psi|^2 exactly as in the GRW
    baseline; renormalization follows the multiplication and quantization
    zeroes the tails, which defines v_post unambiguously.
    """
    if rng is None:
        raise ConfigError("ccqm_collapse needs a random generator")
    pre = psi if psi.quantized else quantize(psi, quant)
    v_pre = relative_volume(pre)
    if v_pre < params.critical_volume:
        raise ValueError(
            f"collapse triggered below critical volume: v={v_pre} < v_c={params.critical_volume}"
        )
    index, coords = sample_collapse_center(pre, rng)
    eps = ccqm_solve_epsilon(pre, coords, params, quant)
    hit = pre.amplitudes * ccqm_jump_factor(pre, coords, eps)
    cont = replace(pre, amplitudes=hit, magnitude_steps=None, phase_steps=None, amp_scale=1.0)
    out = quantize(normalize(cont), quant)
    event = CollapseEvent(
        time=time,
        kind="ccqm_collapse",
        v_pre=v_pre,
        v_post=relative_volume(out),
        center=coords,
        center_index=index,
        width_param=eps,
        rng_draws=1,
    )
    return out, event
