import math

import numpy as np
import pytest

from app.core.exceptions import ParameterError
from app.models.fields import RealImage
from app.models.optics import CellSpec, OpticalSetup, Phantom, PhantomSpec
from app.models.patching import PatchLayout
from app.services.forward_model import (
    cell_mask,
    height_to_phase,
    make_cell_phantom,
    make_object_wave,
    phantom_from_spec,
    shear_differences,
    synthesize_hologram,
    synthesize_tiles,
)


def test_height_to_phase():
    assert height_to_phase(0.25, 0.528) == pytest.approx(0.25 * 2 * math.pi / 0.528, rel=1e-12)
    assert height_to_phase(0.528, 0.528) == pytest.approx(2 * math.pi)


def test_cell_peak_phase_matches_height():
    phantom = make_cell_phantom(64, 64, [CellSpec(center=(32, 32), radius=10, peak_height_um=0.25)])

    assert phantom.phase.data.max() == pytest.approx(0.25 * 2 * math.pi / 0.528, rel=1e-12)
    assert phantom.phase.data[0, 0] == 0.0
    np.testing.assert_array_equal(phantom.amplitude.data, 1.0)


def test_amplitude_dip_at_cell_center():
    cell = CellSpec(center=(32, 32), radius=10, peak_height_um=0.1, amplitude_dip=0.5)

    phantom = make_cell_phantom(64, 64, [cell])

    assert phantom.amplitude.data[32, 32] == pytest.approx(0.5)
    assert phantom.amplitude.data[0, 0] == 1.0


def test_cell_outside_image_rejected():
    with pytest.raises(ParameterError):
        make_cell_phantom(32, 32, [CellSpec(center=(40, 10), radius=5, peak_height_um=0.1)])


def test_cell_height_above_maximum_rejected():
    with pytest.raises(ParameterError):
        make_cell_phantom(32, 32, [CellSpec(center=(16, 16), radius=5, peak_height_um=0.7)])


def test_phantom_from_spec_applies_tilt():
    spec = PhantomSpec(rows=16, cols=32, tilt_x=0.01)

    phantom = phantom_from_spec(spec, 0.528)

    np.testing.assert_allclose(phantom.phase.data[3], 0.01 * np.arange(32))


def test_flat_hologram_is_nonnegative_with_fringes(setup):
    hologram = synthesize_hologram(make_cell_phantom(64, 64, []), setup)

    assert hologram.data.min() >= 0
    # three unit beams: intensity between 0 and 9, mean 3
    assert hologram.data.max() == pytest.approx(9.0)
    assert hologram.data.mean() == pytest.approx(3.0)


def test_noise_is_reproducible_and_clipped():
    setup = OpticalSetup(noise_sigma=0.5)
    phantom = make_cell_phantom(64, 64, [])

    first = synthesize_hologram(phantom, setup, np.random.default_rng(7))
    second = synthesize_hologram(phantom, setup, np.random.default_rng(7))

    np.testing.assert_array_equal(first.data, second.data)
    assert first.data.min() >= 0


def test_shear_larger_than_half_the_image_rejected():
    setup = OpticalSetup(shear_x_px=40)

    with pytest.raises(ParameterError):
        synthesize_hologram(make_cell_phantom(64, 64, []), setup)


def test_cell_mask_is_disk():
    mask = cell_mask(32, 32, [CellSpec(center=(16, 16), radius=4, peak_height_um=0.1)])

    assert mask[16, 16]
    assert not mask[16, 21]
    assert mask.sum() == np.count_nonzero(
        np.hypot(*np.mgrid[0:32, 0:32] - np.array([16, 16])[:, None, None]) < 4
    )


def test_untilted_tiles_are_crops_of_one_hologram(setup):
    phantom = make_cell_phantom(128, 128, [CellSpec(center=(64, 64), radius=30, peak_height_um=0.2)])
    layout = PatchLayout.from_grid(64, 64, 2, 2)

    tiles = synthesize_tiles(phantom, setup, layout)
    full = synthesize_hologram(phantom, setup)

    for i in range(2):
        for j in range(2):
            np.testing.assert_array_equal(tiles[i][j].data, full.data[layout.tile_slices(i, j)])


def test_tiles_need_matching_phantom(setup):
    phantom = Phantom(amplitude=RealImage(data=np.ones((64, 64))), phase=RealImage(data=np.zeros((64, 64))))

    with pytest.raises(ParameterError):
        synthesize_tiles(phantom, setup, PatchLayout.from_grid(64, 64, 2, 2))


def test_object_wave_carries_amplitude_and_phase():
    phase = np.linspace(-3.0, 3.0, 48).reshape(6, 8)
    amplitude = np.full((6, 8), 0.8)
    phantom = Phantom(amplitude=RealImage(data=amplitude), phase=RealImage(data=phase))

    wave = make_object_wave(phantom).data

    np.testing.assert_allclose(np.abs(wave), 0.8)
    np.testing.assert_allclose(np.angle(wave), phase, atol=1e-12)


def test_each_axis_must_hold_twice_the_larger_shear():
    # 6 rows hold twice shear_y but not twice shear_x
    setup = OpticalSetup(shear_x_px=4, shear_y_px=2)

    with pytest.raises(ParameterError):
        synthesize_hologram(make_cell_phantom(6, 16, []), setup)
    assert synthesize_hologram(make_cell_phantom(8, 16, []), setup).shape == (8, 16)


def test_carriers_fall_back_to_kx():
    assert OpticalSetup(carrier_kx=0.2).carriers() == (0.2, 0.2)
    assert OpticalSetup(carrier_kx=0.2, carrier_ky=-0.3).carriers() == (0.2, -0.3)


def test_shear_differences_clamp_at_the_edge():
    phase = np.tile(np.arange(8, dtype=float), (4, 1))

    dx, dy = shear_differences(phase, 3, 1)

    np.testing.assert_array_equal(dx[0], [0, -1, -2, -3, -3, -3, -3, -3])
    np.testing.assert_array_equal(dy, 0.0)
