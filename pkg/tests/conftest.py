import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from nmprel.geometry import BoundingBox  # noqa: E402

# one "PASS/FAIL criterion N: ..." line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


def record_criterion(number, ok, text):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {text}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def random_box(rng, size=1000.0, lo=5.0, hi=300.0):
    w, h = rng.uniform(lo, hi, size=2)
    return BoundingBox(float(rng.uniform(0, size - w)), float(rng.uniform(0, size - h)), float(w), float(h))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def gradcheck_instance(num_objects, seed):
    """A generated scene, a small full model and Glorot-initialised parameters.

    Biases get small random values so every path carries gradient; boxes come
    from the generator so spatial inputs are realistically scaled.
    """
    from nmprel import training
    from nmprel.model import NmpConfig, init_params
    from nmprel.scenedata import SyntheticConfig, generate_synthetic

    config = NmpConfig(num_predicates=8, num_categories=6, visual_dim=16, word_dim=5, d_h=8, mlp_hidden=8)
    scene = generate_synthetic(SyntheticConfig(num_scenes=1, objects_per_scene=num_objects, seed=1000 + seed))[0]
    rng = np.random.default_rng([seed, 77])
    params = init_params(config, rng)
    for name in params:
        if name.endswith((".b1", ".b2", "classifier.b")):
            params[name] = rng.normal(0.0, 0.1, params[name].shape)
    prepared = training.prepare(scene, config)
    targets = training.pick_targets(prepared)
    return prepared, params, config, targets
