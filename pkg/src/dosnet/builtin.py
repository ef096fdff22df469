"""The two benchmark plants: coupled scalar systems and a line of inverted pendulums."""

from __future__ import annotations

import numpy as np

from .plant import PlantModel, Subsystem


def example1_model() -> PlantModel:
    """Two open-loop unstable scalar subsystems, ``u1 = -4.5 x1 - 1.4 x2``, ``u2 = -6 x2 - x1``."""
    s1 = Subsystem(
        1, a=[[1.0]], b=[[1.0]], k=[[-4.5]], q=[[1.0]],
        couplings_physical={2: [[1.0]]},
        couplings_control={2: [[-1.4]]},
    )
    s2 = Subsystem(
        2, a=[[1.0]], b=[[1.0]], k=[[-6.0]], q=[[1.0]],
        couplings_control={1: [[-1.0]]},
    )
    return PlantModel([s1, s2], {1: {2}, 2: {1}})


def example2_model() -> PlantModel:
    """Three inverted pendulums coupled in a line by springs."""
    a_out = [[0.0, 1.0], [-3.75, 0.0]]
    a_mid = [[0.0, 1.0], [-2.5, 0.0]]
    b = [[0.0], [0.25]]
    h = [[0.0, 0.0], [1.25, 0.0]]
    l_out = [[-5.0, 0.25]]
    l_mid = [[-4.75, -0.25]]
    eye = np.eye(2)
    s1 = Subsystem(1, a_out, b, [[-23.0, -12.0]], eye, {2: h}, {2: l_out})
    s2 = Subsystem(2, a_mid, b, [[-18.0, -12.0]], eye, {1: h, 3: h}, {1: l_mid, 3: l_mid})
    s3 = Subsystem(3, a_out, b, [[-23.0, -12.0]], eye, {2: h}, {2: l_out})
    return PlantModel([s1, s2, s3], {1: {2}, 2: {1, 3}, 3: {2}})
