import numpy as np
import pytest

from fdcc.config import builtin_chain
from fdcc.kinematics import KinematicChain, Link, Transform


def one_link_chain(length=1.0, mass=1.0, axis=(0.0, 0.0, 1.0)):
    """Point mass at distance `length` along x, revolute about the given axis."""
    link = Link(
        parent_offset=Transform.identity(),
        joint_axis=np.asarray(axis, dtype=float),
        mass=mass,
        inertia_tensor=np.zeros((3, 3)),
        com_offset=np.array([length, 0.0, 0.0]),
    )
    return KinematicChain(
        (link,), tip_offset=Transform.from_xyz_rpy([length, 0.0, 0.0], [0.0, 0.0, 0.0]),
        name="one_link",
    )


def two_link_planar_chain(l1=0.8, l2=0.5, m1=1.3, m2=0.7):
    """Planar 2R arm in the x-y plane, z joint axes, slender-rod inertias."""
    i1 = np.diag([1e-4, m1 * l1 * l1 / 12.0, m1 * l1 * l1 / 12.0])
    i2 = np.diag([1e-4, m2 * l2 * l2 / 12.0, m2 * l2 * l2 / 12.0])
    link1 = Link(
        parent_offset=Transform.identity(),
        mass=m1,
        inertia_tensor=i1,
        com_offset=np.array([l1 / 2.0, 0.0, 0.0]),
    )
    link2 = Link(
        parent_offset=Transform.from_xyz_rpy([l1, 0.0, 0.0], [0.0, 0.0, 0.0]),
        mass=m2,
        inertia_tensor=i2,
        com_offset=np.array([l2 / 2.0, 0.0, 0.0]),
    )
    return KinematicChain(
        (link1, link2),
        tip_offset=Transform.from_xyz_rpy([l2, 0.0, 0.0], [0.0, 0.0, 0.0]),
        name="two_link_planar",
    )


@pytest.fixture(scope="session")
def reference_chain():
    return builtin_chain("ur10e")


@pytest.fixture
def one_link():
    return one_link_chain()


@pytest.fixture
def two_link():
    return two_link_planar_chain()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
