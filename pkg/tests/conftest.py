import pytest

from razrlite.model import RenderConfig, Room, Scene, WallMaterial

FS = 44100.0


def make_scene(
    dims=(4.0, 5.0, 3.0),
    source=(1.0, 1.0, 1.0),
    receiver=(3.0, 4.0, 1.5),
    absorption=0.2,
    scattering=0.0,
    crossover=1000.0,
    zeta=0.0,
    **config,
):
    room = Room.uniform(dims, WallMaterial(absorption, scattering, crossover))
    return Scene(room, tuple(source), tuple(receiver), zeta=zeta, config=RenderConfig(**config))


@pytest.fixture
def small_scene():
    return make_scene()


@pytest.fixture
def scene_doc():
    wall = {"absorption": 0.2, "scattering": 0.3, "crossoverHz": 1000.0}
    return {
        "schemaVersion": 1,
        "room": {"dimensions": [4.0, 5.0, 3.0], "walls": [dict(wall) for _ in range(6)]},
        "source": [1.0, 1.0, 1.0],
        "receiver": [3.0, 4.0, 1.5],
        "zeta": 0.05,
        "config": {"irLengthSeconds": 0.5},
    }
