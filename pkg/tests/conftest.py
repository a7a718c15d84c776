import numpy as np
import pytest

from micky.submodular import SetFunction
from micky.synthetic import random_cut_function


class SumFunction(SetFunction):
    """Sum of per-agent set functions; the global objective in tests."""

    def __init__(self, functions):
        super().__init__(functions[0].n)
        self.functions = functions

    def eval(self, mask):
        return sum(fn.eval(mask) for fn in self.functions)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_cut(n, seed, edge_prob=0.35):
    return random_cut_function(n, np.random.default_rng(seed), edge_prob)
