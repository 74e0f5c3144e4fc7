import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from razrlite.model import RenderConfig, SceneError, WallMaterial, derive_geometry, validate_scene

from conftest import make_scene


def test_valid_scene_passes(small_scene):
    assert validate_scene(small_scene) is small_scene


def test_source_outside_room():
    with pytest.raises(SceneError, match="source outside room") as info:
        validate_scene(make_scene(source=(5.0, 1.0, 1.0)))
    assert info.value.path == "source"


def test_scattering_out_of_range():
    with pytest.raises(SceneError, match="scattering out of range") as info:
        validate_scene(make_scene(scattering=1.2))
    assert info.value.path == "room.walls[0].scattering"


@pytest.mark.parametrize(
    "kwargs, path",
    [
        (dict(absorption=-0.1), "room.walls[0].absorption"),
        (dict(crossover=30000.0), "room.walls[0].crossoverHz"),
        (dict(zeta=1.5), "zeta"),
        (dict(receiver=(3.0, 4.0, 3.0)), "receiver"),
        (dict(dims=(4.0, -5.0, 3.0)), "room.dimensions[1]"),
        (dict(ism_order=-1), "config.ismOrder"),
        (dict(output_mode="stereo"), "config.outputMode"),
        (dict(ir_length=0.0), "config.irLengthSeconds"),
    ],
)
def test_invalid_fields_name_their_path(kwargs, path):
    with pytest.raises(SceneError) as info:
        validate_scene(make_scene(**kwargs))
    assert info.value.path == path


def test_coincident_source_and_receiver():
    with pytest.raises(SceneError, match="coincides"):
        validate_scene(make_scene(source=(3.0, 4.0, 1.5)))


def test_negative_speed_of_sound(small_scene):
    with pytest.raises(SceneError, match="speed of sound"):
        validate_scene(dataclasses.replace(small_scene, speed_of_sound=-1.0))


def test_geometry_small_room():
    g = derive_geometry(make_scene().room, (3.0, 4.0, 1.5))
    assert g.volume == pytest.approx(60.0)
    assert g.surface_area == pytest.approx(94.0)
    assert g.mean_free_path == pytest.approx(2.5532, abs=1e-4)
    assert g.mean_wall_distance == pytest.approx(2.0)


def test_geometry_unit_cube():
    g = derive_geometry(make_scene(dims=(1, 1, 1), source=(0.5, 0.5, 0.5), receiver=(0.2, 0.2, 0.2)).room, (0.3, 0.3, 0.3))
    assert g.mean_free_path == pytest.approx(4.0 / 6.0)


def test_wall_areas_sum_to_surface(small_scene):
    areas = small_scene.room.wall_areas()
    assert areas.sum() == pytest.approx(94.0)
    np.testing.assert_allclose(areas, [15, 15, 12, 12, 20, 20])


def test_defaults():
    cfg = RenderConfig()
    assert (cfg.sample_rate, cfg.ism_order, cfg.fdn_lines, cfg.ir_length) == (44100.0, 3, 12, 2.0)
    assert WallMaterial().scattering == 0.0


@given(
    dims=st.tuples(*[st.floats(0.5, 30.0)] * 3),
    frac=st.tuples(*[st.floats(0.01, 0.99)] * 3),
)
def test_mean_wall_distance_independent_of_receiver(dims, frac):
    rcv = tuple(d * f for d, f in zip(dims, frac))
    room = make_scene(dims=dims).room
    g = derive_geometry(room, rcv)
    assert g.mean_wall_distance == pytest.approx(sum(dims) / 6.0)
    assert g.mean_free_path == pytest.approx(4 * g.volume / g.surface_area)
