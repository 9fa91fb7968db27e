import math

import numpy as np
import pytest

from shadowrds import (
    CocycleSystem,
    DichotomyData,
    IrrationalRotation,
    Perturbation,
    RotationPoint,
    Scenario,
    builtin_scenarios,
    step,
)


def _rot2(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def coupled_block_scenario() -> Scenario:
    """d = 4 test cocycle: block rotations conjugating diag(0.45, 0.6, 1.7, 2.2).

    The frames are block diagonal, so the splitting projector is the constant
    diag(1, 1, 0, 0) and the true dichotomy rate is -log 0.6 ~ 0.51, declared
    as rate 0.4 with margin 0.11.
    """
    base = IrrationalRotation.default()
    d = np.diag([0.45, 0.6, 1.7, 2.2])
    p0 = np.diag([1.0, 1.0, 0.0, 0.0])

    def frame(point):
        th = 2.0 * math.pi * point.angle
        out = np.zeros((4, 4))
        out[:2, :2] = _rot2(th)
        out[2:, 2:] = _rot2(2.0 * th)
        return out

    def gen(point):
        return frame(step(base, point, 1)) @ d @ frame(point).T

    cocycle = CocycleSystem(4, gen, base)
    dich = DichotomyData(
        projector=lambda point: p0,
        rate=0.4,
        margin=0.11,
        bound=lambda point: 1.0,
    )
    budget = 0.02

    def f(point, x):
        phase = 2.0 * math.pi * point.angle
        shift = 0.2 * np.array(
            [math.sin(phase), math.cos(phase), math.sin(2 * phase), math.cos(3 * phase)]
        )
        return budget * np.tanh(np.asarray(x) + shift)

    pert = Perturbation(f, budget, bound=budget * 2.0)
    return Scenario(
        name="block4",
        cocycle=cocycle,
        dichotomy=dich,
        perturbation=pert,
        epsilon=0.4,
        weight_kind="constant",
        base_point=RotationPoint.from_angle(0.57),
        horizon=48,
        notes="4-dimensional block-rotation test cocycle",
    )


@pytest.fixture(scope="session")
def scenarios():
    return {s.name: s for s in builtin_scenarios()}


@pytest.fixture(scope="session")
def block4():
    return coupled_block_scenario()
