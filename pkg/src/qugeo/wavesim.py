"""2D constant-density acoustic forward modeling and dataset scaling.

The pressure field obeys ``lap(p) - p_tt / c**2 = s``. Time is advanced by
second-order leapfrog with a fourth-order Laplacian. The top edge is a
pressure-release free surface one cell above row 0; the other three edges
are extended by a damping sponge of ``sponge_width`` cells whose damping
rate ramps up quadratically, so waves decay exponentially in time inside it.
With damping ``eta`` the update is

    (1 + eta dt) p[n+1] = 2 p[n] - (1 - eta dt) p[n-1] + (c dt)**2 (lap p[n] + s[n])

which keeps the discrete energy non-increasing once the source is off.
Arrays are indexed ``[row, col]``; row is depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigurationError, StabilityError

# full-resolution acquisition
FULL_SHAPE = (70, 70)
FULL_DX = 10.0
FULL_DT = 1e-3  # trace sampling interval
FULL_SUBSTEPS = 2  # simulation steps per recorded sample
FULL_NT = 1000
FULL_FREQ = 15.0
FULL_SOURCES = 5
FULL_SPONGE = 20

# physics-guided coarse re-simulation
SMALL_SHAPE = (8, 8)
SMALL_NT = 32
SMALL_FREQ = 8.0
SMALL_SPONGE = 3
SMALL_DEPTH = 1  # source/receiver row below the free surface
SMALL_VREF = 4000.0

V_RANGE = (1500.0, 4000.0)
SPONGE_STRENGTH = 6.0


@dataclass(frozen=True)
class SimGrid:
    nx: int
    ny: int
    dx: float
    dt: float
    nt: int
    sponge_width: int = FULL_SPONGE
    sponge_strength: float = SPONGE_STRENGTH
    free_surface: bool = True

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1 or self.nt < 1:
            raise ConfigurationError("grid needs nx, ny, nt >= 1")
        if not (self.dx > 0 and self.dt > 0):
            raise ConfigurationError("dx and dt must be positive")
        if not 0 <= self.sponge_width < min(self.nx, self.ny) / 2:
            raise ConfigurationError(
                f"sponge width {self.sponge_width} must be in [0, {min(self.nx, self.ny) / 2})")

    def max_stable_dt(self, c_max: float) -> float:
        return 0.5 * self.dx / (math.sqrt(2.0) * c_max)

    def check_cfl(self, c_max: float) -> None:
        limit = self.max_stable_dt(c_max)
        if self.dt > limit * (1 + 1e-12):
            raise ConfigurationError(
                f"CFL violated: dt={self.dt:g} s exceeds {limit:g} s for c_max={c_max:g} m/s")


@dataclass(frozen=True)
class SourceConfig:
    position: tuple  # (row, col)
    peak_frequency: float
    delay: float | None = None
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.peak_frequency > 0:
            raise ConfigurationError("peak frequency must be positive")

    @property
    def t0(self) -> float:
        return 1.5 / self.peak_frequency if self.delay is None else self.delay


@dataclass(frozen=True)
class ShotGather:
    traces: np.ndarray  # (nt, n_receivers)
    receiver_row: int
    receiver_cols: tuple
    energy: np.ndarray | None = None


def ricker(peak_frequency, t, delay=0.0):
    """Ricker wavelet, unit peak at ``t = delay``."""
    a = (np.pi * peak_frequency * (np.asarray(t, dtype=np.float64) - delay)) ** 2
    return (1.0 - 2.0 * a) * np.exp(-a)


@njit(cache=True)
def _propagate(c2dt2, damp, free_surface, src_r, src_c, src_term, rec_r, rec_c, nt,
               inv_dx2, want_energy):
    ny, nx = c2dt2.shape
    p_old = np.zeros((ny + 4, nx + 4))
    p = np.zeros((ny + 4, nx + 4))
    p_new = np.zeros((ny + 4, nx + 4))
    n_rec = rec_c.shape[0]
    traces = np.zeros((nt, n_rec))
    energy = np.zeros(nt)
    a1 = 4.0 / 3.0
    a2 = -1.0 / 12.0
    for n in range(nt - 1):
        if free_surface:
            for j in range(nx + 4):
                p[1, j] = 0.0
                p[0, j] = -p[2, j]
        e = 0.0
        for i in range(ny):
            ii = i + 2
            for j in range(nx):
                jj = j + 2
                lap = (a2 * (p[ii, jj - 2] + p[ii, jj + 2] + p[ii - 2, jj] + p[ii + 2, jj])
                       + a1 * (p[ii, jj - 1] + p[ii, jj + 1] + p[ii - 1, jj] + p[ii + 1, jj])
                       - 5.0 * p[ii, jj]) * inv_dx2
                d = damp[i, j]
                val = (2.0 * p[ii, jj] - (1.0 - d) * p_old[ii, jj] + c2dt2[i, j] * lap) / (1.0 + d)
                p_new[ii, jj] = val
                if want_energy:
                    dp = val - p[ii, jj]
                    e += dp * dp / c2dt2[i, j] - val * lap
        si = src_r + 2
        sj = src_c + 2
        p_new[si, sj] += c2dt2[src_r, src_c] * src_term[n] * inv_dx2 / (1.0 + damp[src_r, src_c])
        if want_energy:
            energy[n + 1] = e
        for r in range(n_rec):
            traces[n + 1, r] = p_new[rec_r + 2, rec_c[r] + 2]
        if not math.isfinite(traces[n + 1, 0] + p_new[si, sj]) or not math.isfinite(e):
            return traces, energy, n + 1
        tmp = p_old
        p_old = p
        p = p_new
        p_new = tmp
    return traces, energy, -1


def _sponge_profile(n_inner: int, w: int, lo: bool, hi: bool) -> np.ndarray:
    """Normalized damping ramp (0 inside, up to 1 at the outer edge)."""
    n = n_inner + (w if lo else 0) + (w if hi else 0)
    prof = np.zeros(n)
    if w:
        ramp = (np.arange(1, w + 1) / w) ** 2
        if lo:
            prof[:w] = ramp[::-1]
        if hi:
            prof[n - w:] = ramp
    return prof


def padded_model(c: np.ndarray, grid: SimGrid) -> tuple[np.ndarray, np.ndarray, tuple]:
    """Velocity and damping on the computational grid, plus the index offset."""
    w = grid.sponge_width
    top = 0 if grid.free_surface else w
    cp = np.pad(c, ((top, w), (w, w)), mode="edge")
    rows = _sponge_profile(c.shape[0], w, not grid.free_surface, True)
    cols = _sponge_profile(c.shape[1], w, True, True)
    prof = np.maximum(rows[:, None], cols[None, :])
    eta_max = grid.sponge_strength * float(c.max()) / (max(w, 1) * grid.dx)
    return cp, prof * eta_max * grid.dt, (top, w)


def simulate_shot(c, grid: SimGrid, src: SourceConfig, receivers, receiver_depth: int = 0,
                  record_energy: bool = False) -> ShotGather:
    """Record pressure at ``receivers`` (columns at ``receiver_depth``) for
    ``grid.nt`` samples; sample ``n`` is the field at ``t = n * dt``."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (grid.ny, grid.nx):
        raise ConfigurationError(f"velocity shape {c.shape} does not match grid ({grid.ny}, {grid.nx})")
    if not np.all(np.isfinite(c)) or c.min() <= 0:
        raise ConfigurationError("velocities must be positive and finite")
    grid.check_cfl(float(c.max()))
    r0, c0 = src.position
    cols = np.asarray(receivers, dtype=np.int64).reshape(-1)
    if not (0 <= r0 < grid.ny and 0 <= c0 < grid.nx):
        raise ConfigurationError(f"source {src.position} outside the grid")
    if cols.size == 0 or cols.min() < 0 or cols.max() >= grid.nx or not 0 <= receiver_depth < grid.ny:
        raise ConfigurationError("receiver outside the grid")

    cp, damp, (top, left) = padded_model(c, grid)
    t = np.arange(grid.nt) * grid.dt
    src_term = src.amplitude * ricker(src.peak_frequency, t, src.t0)
    traces, energy, bad = _propagate(
        cp ** 2 * grid.dt ** 2, damp, grid.free_surface, r0 + top, c0 + left, src_term,
        receiver_depth + top, cols + left, grid.nt, 1.0 / grid.dx ** 2, record_energy)
    if bad < 0 and not np.all(np.isfinite(traces)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(traces), axis=1))[0])
    if bad >= 0:
        raise StabilityError(f"non-finite pressure at time step {bad}")
    return ShotGather(traces, receiver_depth, tuple(int(x) for x in cols),
                      energy if record_energy else None)


# -- synthetic flat-layer models -------------------------------------------

def generate_flatvel(n_samples: int, seed, shape=FULL_SHAPE, v_range=V_RANGE,
                     n_layers=(2, 5), min_thickness: int = 5, swap_prob: float = 0.2):
    """Flat layered velocity maps, velocities mostly increasing with depth."""
    if n_samples < 1:
        raise ConfigurationError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    ny, nx = shape
    maps = np.empty((n_samples, ny, nx))
    for k in range(n_samples):
        n = int(rng.integers(n_layers[0], n_layers[1] + 1))
        spare = ny - n * min_thickness
        if spare < 0:
            raise ConfigurationError("grid too shallow for the requested layers")
        cuts = np.sort(rng.integers(0, spare + 1, size=n - 1))
        extra = np.diff(np.concatenate(([0], cuts, [spare])))
        thickness = min_thickness + extra
        vel = np.sort(rng.uniform(v_range[0], v_range[1], size=n))
        if n > 1 and rng.random() < swap_prob:
            i = int(rng.integers(0, n - 1))
            vel[i], vel[i + 1] = vel[i + 1], vel[i]
        maps[k] = np.repeat(vel, thickness)[:, None]
    return list(maps)


def layer_count(vmap) -> int:
    col = np.asarray(vmap)[:, 0]
    return int(1 + np.count_nonzero(np.diff(col)))


# -- full-resolution gathers -------------------------------------------------

def source_columns(n_sources: int = FULL_SOURCES, nx: int = FULL_SHAPE[1]) -> np.ndarray:
    return np.rint(np.linspace(0, nx - 1, n_sources)).astype(int)


def full_grid() -> SimGrid:
    return SimGrid(FULL_SHAPE[1], FULL_SHAPE[0], FULL_DX, FULL_DT / FULL_SUBSTEPS,
                   FULL_NT * FULL_SUBSTEPS, FULL_SPONGE)


def simulate_full(c_full) -> np.ndarray:
    """All shots of one map: ``(5, 1000, 70)`` sampled every 1 ms."""
    grid = full_grid()
    receivers = np.arange(FULL_SHAPE[1])
    out = np.empty((FULL_SOURCES, FULL_NT, FULL_SHAPE[1]))
    for s, col in enumerate(source_columns()):
        shot = simulate_shot(c_full, grid, SourceConfig((0, int(col)), FULL_FREQ), receivers)
        out[s] = shot.traces[::FULL_SUBSTEPS]
    return out


# -- scaling ------------------------------------------------------------------

def area_weights(n_src: int, n_dst: int) -> np.ndarray:
    """``(n_dst, n_src)`` matrix averaging source cells by fractional overlap."""
    edges_src = np.arange(n_src + 1) / n_src
    edges_dst = np.arange(n_dst + 1) / n_dst
    w = np.zeros((n_dst, n_src))
    for i in range(n_dst):
        lo = np.maximum(edges_src[:-1], edges_dst[i])
        hi = np.minimum(edges_src[1:], edges_dst[i + 1])
        w[i] = np.clip(hi - lo, 0.0, None)
    return w / w.sum(axis=1, keepdims=True)


def block_average(c, shape=SMALL_SHAPE) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    wr = area_weights(c.shape[0], shape[0])
    wc = area_weights(c.shape[1], shape[1])
    return wr @ c @ wc.T


def nn_indices(n_src: int, n_dst: int) -> np.ndarray:
    if n_dst == 1:
        return np.zeros(1, dtype=int)
    return np.rint(np.arange(n_dst) * (n_src - 1) / (n_dst - 1)).astype(int)


def small_grid(c_max: float = SMALL_VREF, full_shape=FULL_SHAPE) -> tuple[SimGrid, int]:
    """Coarse grid and the number of simulation steps per recorded sample."""
    dx = FULL_DX * full_shape[1] / SMALL_SHAPE[1]
    window = FULL_NT * FULL_DT
    interval = window / SMALL_NT
    probe = SimGrid(SMALL_SHAPE[1], SMALL_SHAPE[0], dx, interval, 1, SMALL_SPONGE)
    sub = math.ceil(interval / probe.max_stable_dt(max(c_max, SMALL_VREF)) - 1e-12)
    grid = SimGrid(SMALL_SHAPE[1], SMALL_SHAPE[0], dx, interval / sub, SMALL_NT * sub + 1,
                   SMALL_SPONGE)
    return grid, sub


def scale_physics(c_full) -> tuple[np.ndarray, np.ndarray]:
    """Downsample the map by area averaging and re-simulate on the coarse grid
    with an 8 Hz source at the centre column and 8 receivers, all one coarse
    row below the free surface (on row 0 the surface ghost cancels most of
    the recorded field at this cell size).
    Returns the 8x8 map and 256 values ordered time-major, receiver-minor."""
    c_small = block_average(c_full)
    grid, sub = small_grid(float(c_small.max()))
    src = SourceConfig((SMALL_DEPTH, SMALL_SHAPE[1] // 2), SMALL_FREQ)
    shot = simulate_shot(c_small, grid, src, np.arange(SMALL_SHAPE[1]), receiver_depth=SMALL_DEPTH)
    traces = shot.traces[sub::sub][:SMALL_NT]
    return c_small, traces.reshape(-1)


def scale_dsample(seismic_full, c_full) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-neighbour picks of the first shot (32 x 8) and the map (8 x 8)."""
    seis = np.asarray(seismic_full)
    c = np.asarray(c_full)
    shot = seis[0] if seis.ndim == 3 else seis
    ti = nn_indices(shot.shape[0], SMALL_NT)
    ri = nn_indices(shot.shape[1], SMALL_SHAPE[1])
    rows = nn_indices(c.shape[0], SMALL_SHAPE[0])
    cols = nn_indices(c.shape[1], SMALL_SHAPE[1])
    small = np.asarray(shot[np.ix_(ti, ri)], dtype=np.float64)
    return np.asarray(c[np.ix_(rows, cols)], dtype=np.float64), small.reshape(-1)
