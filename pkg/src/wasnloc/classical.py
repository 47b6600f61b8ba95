"""Classical grid-based localizers: TDOA least-squares and SLF.

Both follow the same pairwise scheme: compute a per-cell map for every
unordered microphone pair, sum the maps, and pick the grid extremum. The
TDOA method scores each cell by the squared difference between its
theoretical pair TDOA and the measured GCC-PHAT peak (minimum wins); the
SLF method reads the correlation value at each cell's theoretical lag
(maximum wins). Both run for any M >= 2 with no training or configuration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .features import (
    DEFAULT_FFT_SIZE,
    DEFAULT_N_CENTRAL,
    Grid,
    gcc_phat,
    mean_mic_height,
    slf_project,
    theoretical_tdoa_grid,
)
from .rir import SPEED_OF_SOUND
from .scenes import Scene
from .signals import MultichannelSignal


@dataclass(eq=False)
class LocalizationResult:
    """2-D source estimate (meters) plus the aggregated heatmap behind it."""

    estimate: np.ndarray
    heatmap: np.ndarray
    per_pair_maps: list[np.ndarray] | None = None


def enumerate_pairs(m: int) -> list[tuple[int, int]]:
    """All unordered index pairs i < j in lexicographic order."""
    if m < 2:
        raise ValueError(f"need at least 2 microphones, got {m}")
    return list(itertools.combinations(range(m), 2))


def pick_peak(heatmap: np.ndarray, grid: Grid, mode: str = "max") -> np.ndarray:
    """Cell-center coordinates of the map extremum.

    Ties break to the lowest flat index (numpy argmax/argmin convention).
    """
    values = np.asarray(heatmap, dtype=float)
    if values.size != grid.n * grid.n:
        raise ValueError(f"heatmap size {values.size} does not match grid {grid.n}^2")
    if np.any(np.isnan(values)):
        raise ValueError("heatmap contains NaN")
    if mode == "max":
        idx = int(np.argmax(values))
    elif mode == "min":
        idx = int(np.argmin(values))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return grid.cell_center(idx)


def _default_grid(scene: Scene, grid: Grid | None) -> Grid:
    if grid is not None:
        return grid
    return Grid(scene.room.width, scene.room.length)


def _check_frame(frame: MultichannelSignal, scene: Scene) -> None:
    if frame.m != scene.m:
        raise ValueError(f"frame has {frame.m} channels but scene has {scene.m} mics")


def tdoa_localize(
    frame: MultichannelSignal,
    scene: Scene,
    grid: Grid | None = None,
    *,
    metric: str = "squared",
    fft_size: int = DEFAULT_FFT_SIZE,
    n_central: int = DEFAULT_N_CENTRAL,
    search: str = "central",
    z_plane: float | None = None,
    c: float = SPEED_OF_SOUND,
    keep_per_pair: bool = False,
) -> LocalizationResult:
    """Least-squares TDOA localization on the grid (minimum picks the source).

    Per pair, the measured TDOA is the GCC-PHAT peak lag in seconds; each
    cell accumulates the squared (or absolute, metric="abs") difference
    against its theoretical TDOA. The peak search runs over the central
    n_central correlation bins (search="central", matching the correlation
    window the rest of the stack consumes) or the full lag axis
    (search="full").
    """
    _check_frame(frame, scene)
    if metric not in ("squared", "abs"):
        raise ValueError(f"unknown metric {metric!r}")
    if search not in ("central", "full"):
        raise ValueError(f"unknown search {search!r}")
    grid = _default_grid(scene, grid)
    if z_plane is None:
        z_plane = mean_mic_height(scene.mics.positions)

    mics = scene.mics.positions
    total = np.zeros(grid.n * grid.n)
    per_pair = [] if keep_per_pair else None
    for i, j in enumerate_pairs(scene.m):
        corr = gcc_phat(frame.channels[i], frame.channels[j], frame.fs, fft_size, n_central)
        if search == "central":
            measured = (int(np.argmax(corr.central)) - n_central // 2) / frame.fs
        else:
            measured = corr.peak_lag() / frame.fs
        theo = theoretical_tdoa_grid(mics[i], mics[j], grid, z_plane, c)
        diff = theo - measured
        contrib = diff**2 if metric == "squared" else np.abs(diff)
        total += contrib
        if per_pair is not None:
            per_pair.append(contrib)
    return LocalizationResult(pick_peak(total, grid, "min"), total, per_pair)


def slf_localize(
    frame: MultichannelSignal,
    scene: Scene,
    grid: Grid | None = None,
    *,
    fft_size: int = DEFAULT_FFT_SIZE,
    z_plane: float | None = None,
    c: float = SPEED_OF_SOUND,
    interp: str = "linear",
    keep_per_pair: bool = False,
) -> LocalizationResult:
    """Spatial-likelihood localization on the grid (maximum picks the source)."""
    _check_frame(frame, scene)
    grid = _default_grid(scene, grid)
    if z_plane is None:
        z_plane = mean_mic_height(scene.mics.positions)

    mics = scene.mics.positions
    total = np.zeros(grid.n * grid.n)
    per_pair = [] if keep_per_pair else None
    for i, j in enumerate_pairs(scene.m):
        corr = gcc_phat(frame.channels[i], frame.channels[j], frame.fs, fft_size)
        contrib = slf_project(corr, mics[i], mics[j], grid, z_plane, c, mode=interp)
        total += contrib
        if per_pair is not None:
            per_pair.append(contrib)
    return LocalizationResult(pick_peak(total, grid, "max"), total, per_pair)
