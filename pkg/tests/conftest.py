import numpy as np
import pytest

from quasispec.model import FUNCTION_NAMES, CoefficientSet, chebfun


@pytest.fixture
def random_coefficients():
    """Factory for seeded random smooth coefficient sets of moderate size."""

    def make(order, seed=0, modes=4, amplitude=0.3, complex_valued=False):
        rng = np.random.default_rng(seed * 1000 + order)
        funcs = {}
        for name in FUNCTION_NAMES[order]:
            decay = 0.5 ** np.arange(modes)
            c = amplitude * rng.standard_normal(modes) * decay
            if complex_valued:
                c = c + 1j * amplitude * rng.standard_normal(modes) * decay
            funcs[name] = chebfun(c)
        return CoefficientSet(order, funcs)

    return make
