"""Pairwise signal features: frames, GCC-PHAT and grid projections.

The search grid is a flattened n x n discretization of the room footprint;
cell (u, v) is centered at ((u + 0.5) width / n, (v + 0.5) length / n) and
stored at flat index u * n + v. Heatmaps over the grid are plain 1-D numpy
arrays of length n^2 aligned to that indexing.

GCC-PHAT cross-correlations are computed Welch-style: the analysis frame is
split into 50%-overlapped DFT windows, each window's cross-spectrum is
whitened to unit magnitude, the whitened spectra are averaged, and a single
inverse transform yields the correlation, circularly shifted so lag 0 sits
at the center. The peak lag approximates fs * (tau_i - tau_j).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rir import SPEED_OF_SOUND
from .signals import MultichannelSignal

PHAT_FLOOR = 1e-12
DEFAULT_FFT_SIZE = 1024
DEFAULT_N_CENTRAL = 200
DEFAULT_GRID_N = 25
DEFAULT_FRAME_MS = 500.0


@dataclass(frozen=True)
class Grid:
    """Square-count grid over a rectangular room footprint."""

    width: float
    length: float
    n: int = DEFAULT_GRID_N

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("Grid.n must be >= 2")
        if self.width <= 0 or self.length <= 0:
            raise ValueError("Grid footprint must be positive")

    def cell_centers(self) -> np.ndarray:
        """(n^2, 2) cell-center coordinates in meters, flat index u * n + v."""
        u = (np.arange(self.n) + 0.5) * self.width / self.n
        v = (np.arange(self.n) + 0.5) * self.length / self.n
        return np.column_stack([np.repeat(u, self.n), np.tile(v, self.n)])

    def cell_center(self, flat_index: int) -> np.ndarray:
        u, v = divmod(int(flat_index), self.n)
        if not 0 <= u < self.n:
            raise IndexError(f"flat index {flat_index} outside grid of {self.n * self.n} cells")
        return np.array([(u + 0.5) * self.width / self.n, (v + 0.5) * self.length / self.n])


@dataclass(frozen=True, eq=False)
class CorrelationVector:
    """GCC-PHAT correlation: full centered lag axis plus a central slice.

    ``full`` has fft_size entries for lags -fft_size/2 .. fft_size/2 - 1
    (lag 0 at index fft_size // 2); ``central`` is the contiguous slice of
    n_central lags centered at 0, e.g. [-100, 99] for 200 bins.
    """

    full: np.ndarray
    central: np.ndarray
    fs: int

    @property
    def fft_size(self) -> int:
        return self.full.size

    @property
    def lags(self) -> np.ndarray:
        half = self.fft_size // 2
        return np.arange(-half, self.fft_size - half)

    def peak_lag(self) -> int:
        return int(np.argmax(self.full)) - self.fft_size // 2

    def value_at_lag(self, lag, mode: str = "linear") -> np.ndarray:
        """Correlation sampled at (possibly fractional) lags, edge-clamped."""
        idx = np.asarray(lag, dtype=float) + self.fft_size // 2
        if mode == "linear":
            return np.interp(idx, np.arange(self.fft_size), self.full)
        if mode == "nearest":
            nearest = np.clip(np.rint(idx).astype(int), 0, self.fft_size - 1)
            return self.full[nearest]
        raise ValueError(f"unknown interpolation mode {mode!r}")


def extract_frame(signals: MultichannelSignal, frame_ms: float = DEFAULT_FRAME_MS) -> MultichannelSignal:
    """Pick the non-overlapping window with maximal mean energy over channels.

    Candidate windows start at 0, L, 2L, ...; a trailing remainder shorter
    than one frame is ignored. Ties go to the earliest window.
    """
    frame_len = int(round(signals.fs * frame_ms / 1000.0))
    n_windows = signals.n_samples // frame_len
    if n_windows < 1:
        raise ValueError(
            f"signal of {signals.n_samples} samples is shorter than one "
            f"{frame_len}-sample frame"
        )
    usable = signals.channels[:, : n_windows * frame_len]
    windows = usable.reshape(signals.m, n_windows, frame_len)
    energy = np.sum(windows**2, axis=(0, 2))
    best = int(np.argmax(energy))
    start = best * frame_len
    return MultichannelSignal(signals.channels[:, start : start + frame_len].copy(), signals.fs)


def gcc_phat(
    x_i: np.ndarray,
    x_j: np.ndarray,
    fs: int,
    fft_size: int = DEFAULT_FFT_SIZE,
    n_central: int = DEFAULT_N_CENTRAL,
    eps: float = PHAT_FLOOR,
) -> CorrelationVector:
    """PHAT-weighted generalized cross-correlation of two equal frames."""
    x_i = np.asarray(x_i, dtype=float).ravel()
    x_j = np.asarray(x_j, dtype=float).ravel()
    if x_i.size != x_j.size:
        raise ValueError("frames must have equal length")
    if x_i.size < fft_size:
        raise ValueError(f"frame of {x_i.size} samples shorter than fft_size {fft_size}")

    hop = fft_size // 2
    n_windows = 1 + (x_i.size - fft_size) // hop
    starts = np.arange(n_windows) * hop
    idx = starts[:, None] + np.arange(fft_size)[None, :]
    spec_i = np.fft.rfft(x_i[idx], axis=1)
    spec_j = np.fft.rfft(x_j[idx], axis=1)
    cross = spec_i * np.conj(spec_j)
    cross /= np.maximum(np.abs(cross), eps)
    cc = np.fft.irfft(cross.mean(axis=0), fft_size)

    half = fft_size // 2
    full = np.concatenate([cc[-half:], cc[: fft_size - half]])
    c0 = half - n_central // 2
    central = full[c0 : c0 + n_central].copy()
    return CorrelationVector(full=full, central=central, fs=int(fs))


def theoretical_tdoa_grid(
    p_i: np.ndarray,
    p_j: np.ndarray,
    grid: Grid,
    z_plane: float,
    c: float = SPEED_OF_SOUND,
) -> np.ndarray:
    """Per-cell theoretical TDOA (seconds) for a mic pair, at height z_plane.

    Cell value is (|q - p_i| - |q - p_j|) / c with q the 3-D point above the
    cell center, matching the sign convention of :func:`gcc_phat` peaks.
    """
    centers = grid.cell_centers()
    q = np.column_stack([centers, np.full(centers.shape[0], z_plane)])
    d_i = np.linalg.norm(q - np.asarray(p_i, dtype=float)[None, :], axis=1)
    d_j = np.linalg.norm(q - np.asarray(p_j, dtype=float)[None, :], axis=1)
    return (d_i - d_j) / c


def slf_project(
    corr: CorrelationVector,
    p_i: np.ndarray,
    p_j: np.ndarray,
    grid: Grid,
    z_plane: float,
    c: float = SPEED_OF_SOUND,
    mode: str = "linear",
) -> np.ndarray:
    """Spatial likelihood map: correlation sampled at each cell's TDOA lag.

    Uses the full correlation (not the central slice); fractional lags are
    linearly interpolated by default, out-of-range lags clamp to the edge.
    """
    tdoa = theoretical_tdoa_grid(p_i, p_j, grid, z_plane, c)
    return corr.value_at_lag(tdoa * corr.fs, mode=mode)


def mean_mic_height(mic_positions: np.ndarray) -> float:
    return float(np.mean(np.asarray(mic_positions)[:, 2]))


def heatmap_to_csv(values: np.ndarray, grid: Grid, path) -> None:
    """Write a heatmap as n rows of n comma-separated values (row u per line)."""
    mat = np.asarray(values, dtype=float).reshape(grid.n, grid.n)
    with open(path, "w") as fh:
        for row in mat:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def heatmap_from_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split(",")])
    mat = np.asarray(rows, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{path}: expected a square heatmap, got shape {mat.shape}")
    return mat.ravel()


def heatmap_to_pgm(values: np.ndarray, grid: Grid, path) -> None:
    """Write a heatmap as a binary 8-bit PGM, min-max normalized."""
    mat = np.asarray(values, dtype=float).reshape(grid.n, grid.n)
    lo, hi = float(mat.min()), float(mat.max())
    if hi > lo:
        scaled = np.rint((mat - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(mat)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{grid.n} {grid.n}\n255\n".encode("ascii"))
        fh.write(scaled.astype(np.uint8).tobytes())
