import numpy as np
import pytest

from purityrb.channels import PAULI_1Q

I2 = PAULI_1Q["I"]
X = PAULI_1Q["X"]
Y = PAULI_1Q["Y"]
Z = PAULI_1Q["Z"]
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S_PHASE = np.array([[1, 0], [0, 1j]], dtype=complex)


@pytest.fixture
def gen():
    return np.random.default_rng(1234)
