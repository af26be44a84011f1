from __future__ import annotations

import numpy as np
import pytest

from coherent_kinetics.densop import DensityOperator, new_density


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + a.conj().T)


def random_density_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    rho = rho / np.trace(rho).real
    return 0.5 * (rho + rho.conj().T)


def random_state(rng: np.random.Generator, dim: int) -> DensityOperator:
    return new_density(random_density_matrix(rng, dim))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
