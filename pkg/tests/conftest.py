import itertools
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ssplmm.optimize import OptFamily, optimal_method  # noqa: E402

SWEEP_K = range(1, 11)
SWEEP_P = range(2, 7)
SWEEP_Y = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)


@pytest.fixture(scope="session")
def perturbed_sweep():
    """Optimal perturbed methods over the full (k, p, y, explicit) grid."""
    start = time.perf_counter()
    found, missing = [], []
    for explicit, k, p, y in itertools.product((True, False), SWEEP_K, SWEEP_P, SWEEP_Y):
        res = optimal_method(OptFamily.PERTURBED, k, p, y, explicit=explicit)
        (missing if res is None else found).append(res if res else (k, p, y, explicit))
    return found, missing, time.perf_counter() - start
