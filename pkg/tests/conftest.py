import numpy as np
import pytest

from ec_lfd.demo import Demonstration, Waypoint
from ec_lfd.se3 import Pose, Wrench


def build_demo(times, positions, quats=None, grippers=None, forces=None,
               torques=None, frames=None):
    n = len(times)
    positions = np.asarray(positions, dtype=float)
    if quats is None:
        quats = np.tile([1.0, 0, 0, 0], (n, 1))
    if grippers is None:
        grippers = np.ones(n)
    if forces is None:
        forces = np.zeros((n, 3))
    if torques is None:
        torques = np.zeros((n, 3))
    wps = []
    for i in range(n):
        wps.append(Waypoint(
            t=float(times[i]),
            pose=Pose(np.asarray(quats[i], dtype=float), positions[i]),
            gripper=float(grippers[i]),
            wrench=Wrench(forces[i], torques[i]),
            feature_frame=frames[i] if frames is not None else None,
        ))
    return Demonstration(wps)


@pytest.fixture
def demo_builder():
    return build_demo
