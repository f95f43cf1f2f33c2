import numpy as np
import pytest

from argkit._kernels import count_kmers, simulate_bases


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # pay any JIT compile cost once, before timed assertions run
    codes = np.array([0, 1, 2, 3, 0, 1, 2, 3], dtype=np.uint8)
    count_kmers(codes, 3)
    simulate_bases(codes, 0, 4, 0.1, 0.1, 0.1, 42)
