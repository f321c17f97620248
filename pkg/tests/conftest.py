import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from aionfit.body_model import BodyModelData
from aionfit.dataio import make_toy_humanoid


@pytest.fixture(scope="session")
def humanoid() -> BodyModelData:
    return make_toy_humanoid()


@pytest.fixture(scope="session")
def tall_pair() -> BodyModelData:
    """Two-vertex, root-only model with templates spanning 1.7 m and 0.5 m."""
    return BodyModelData(
        name="tall-pair",
        up_axis="y",
        joint_names=("root",),
        parents=np.array([-1]),
        adult_template=np.array([[0.0, 0.0, 0.0], [0.0, 1.7, 0.0]]),
        child_template=np.array([[0.0, 0.0, 0.0], [0.0, 0.5, 0.0]]),
        shape_blendshapes=np.zeros((2, 3, 10)),
        joint_regressor=np.array([[0.5, 0.5]]),
        skinning_weights=np.ones((2, 1)),
        faces=np.zeros((0, 3), dtype=int),
    )
