"""Shared fixtures: optical setups, phantoms and synthetic holograms."""

import numpy as np
import pytest

from app.core.config import PipelineConfig
from app.models.fields import RealImage
from app.models.optics import CellSpec, OpticalSetup, Phantom
from app.models.reconstruction import GradientPair
from app.services.forward_model import make_cell_phantom, synthesize_hologram


@pytest.fixture
def setup() -> OpticalSetup:
    return OpticalSetup(shear_x_px=4, shear_y_px=4, carrier_kx=0.25, carrier_ky=0.25)


@pytest.fixture
def config(setup: OpticalSetup) -> PipelineConfig:
    return PipelineConfig(setup=setup)


@pytest.fixture
def cell() -> CellSpec:
    return CellSpec(center=(128, 128), radius=48, peak_height_um=0.25)


@pytest.fixture
def cell_phantom(cell: CellSpec) -> Phantom:
    return make_cell_phantom(256, 256, [cell])


@pytest.fixture
def cell_hologram(cell_phantom: Phantom, setup: OpticalSetup) -> RealImage:
    return synthesize_hologram(cell_phantom, setup)


@pytest.fixture
def flat_hologram(setup: OpticalSetup) -> RealImage:
    return synthesize_hologram(make_cell_phantom(128, 128, []), setup)


def analytic_sine_gradients(rows: int, cols: int) -> tuple[np.ndarray, GradientPair]:
    """sin(2 pi x / cols) · sin(2 pi y / rows) and its exact derivatives."""
    y, x = np.mgrid[0:rows, 0:cols]
    ax, ay = 2 * np.pi * x / cols, 2 * np.pi * y / rows
    w = np.sin(ax) * np.sin(ay)
    gx = (2 * np.pi / cols) * np.cos(ax) * np.sin(ay)
    gy = (2 * np.pi / rows) * np.sin(ax) * np.cos(ay)
    return w, GradientPair(gx=RealImage(data=gx), gy=RealImage(data=gy))


def gaussian_bump(rows: int, cols: int, sigma: float, height: float = 1.0):
    """Centered Gaussian and its exact derivatives."""
    y, x = np.mgrid[0:rows, 0:cols]
    dy, dx = y - rows / 2, x - cols / 2
    w = height * np.exp(-(dx**2 + dy**2) / (2 * sigma**2))
    grads = GradientPair(
        gx=RealImage(data=-dx / sigma**2 * w), gy=RealImage(data=-dy / sigma**2 * w)
    )
    return w, grads
