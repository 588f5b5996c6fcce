import pytest

from mrtwin import simulator


@pytest.fixture
def straight_script():
    return simulator.ScenarioScript(
        length_s=5.0,
        frame_rate=10,
        seed=3,
        segments=(simulator.TrackSegment(duration_s=5.0),),
    )


@pytest.fixture
def hazard_script():
    # one crash-grade shove halfway through a straight drive
    return simulator.ScenarioScript(
        length_s=30.0,
        frame_rate=10,
        seed=11,
        segments=(simulator.TrackSegment(duration_s=30.0),),
        hazards=(simulator.Hazard(time_s=12.0, magnitude=0.4),),
    )


@pytest.fixture(scope="session")
def sequence_dir(tmp_path_factory):
    """A small rendered sequence shared by tests that only read it."""
    script = simulator.ScenarioScript(
        length_s=4.0,
        frame_rate=10,
        seed=5,
        segments=(simulator.TrackSegment(duration_s=4.0, curvature=0.02),),
    )
    out = tmp_path_factory.mktemp("seq") / "straightish"
    simulator.generate_sequence(script, out)
    return out
