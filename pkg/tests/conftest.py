import numpy as np
import pytest

from otrom.measure import Grid, Snapshot


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def grid16():
    return Grid(nx=16, nz=16, hx=1.0, hz=1.0)


def gaussian_field(grid: Grid, x: float, z: float, sigma: float,
                   amplitude: float = 1.0, cutoff: float | None = None) -> np.ndarray:
    xs = grid.origin[0] + grid.hx * np.arange(grid.nx)
    zs = grid.origin[1] + grid.hz * np.arange(grid.nz)
    xx, zz = np.meshgrid(xs, zs)
    r2 = (xx - x) ** 2 + (zz - z) ** 2
    field = amplitude * np.exp(-r2 / (2.0 * sigma ** 2))
    if cutoff is not None:
        field[r2 > (cutoff * sigma) ** 2] = 0.0
    return field.ravel()


def gaussian_snapshot(grid: Grid, x: float, z: float, sigma: float, time: float = 0.0,
                      amplitude: float = 1.0, cutoff: float | None = None) -> Snapshot:
    return Snapshot(values=gaussian_field(grid, x, z, sigma, amplitude, cutoff),
                    time=time, grid=grid)


def random_blob_field(grid: Grid, rng, n_blobs=3, signed=False) -> np.ndarray:
    """Sum of compact random Gaussian blobs, optionally with signs."""
    field = np.zeros(grid.n_cells)
    for _ in range(n_blobs):
        x = rng.uniform(0.25, 0.75) * (grid.nx - 1) * grid.hx
        z = rng.uniform(0.25, 0.75) * (grid.nz - 1) * grid.hz
        sigma = rng.uniform(1.0, 2.5)
        amp = rng.uniform(0.5, 2.0)
        if signed and rng.random() < 0.5:
            amp = -amp
        field += gaussian_field(grid, x, z, sigma, amp, cutoff=3.0)
    return field
