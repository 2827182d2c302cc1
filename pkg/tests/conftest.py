import hypothesis
import pytest

from bbmld.engine import Ball, MovingBallSpec
from bbmld.estimators import EventKind, EventSpec

hypothesis.settings.register_profile(
    "default", deadline=None, max_examples=60, derandomize=True
)
hypothesis.settings.load_profile("default")


@pytest.fixture
def empty_ball_spec():
    """The workhorse event: unit ball at the origin stays empty (theta=0, a=0)."""
    moving = MovingBallSpec(base=Ball(center=[0.0], radius=1.0), theta=0.0, beta=1.0)
    return EventSpec(kind=EventKind.EMPTY_MOVING_BALL, a=0.0, moving=moving)
