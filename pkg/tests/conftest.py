"""
Спільні фікстури та генератори випадкових мір
"""

import numpy as np
import pytest
from hypothesis import strategies as st

from dcg_evaluator.core.measures.measure import DiscreteMeasure


def random_measure(rng: np.random.Generator, min_atoms: int = 2, max_atoms: int = 256) -> DiscreteMeasure:
    size = int(rng.integers(min_atoms, max_atoms + 1))
    atoms = rng.choice(np.arange(-10_000, 10_000), size=size, replace=False) / 100.0
    weights = rng.dirichlet(np.ones(size))
    return DiscreteMeasure(atoms, weights)


def uniform_grid(m: int) -> DiscreteMeasure:
    """Рівномірна міра на {1, ..., 2^m}"""
    return DiscreteMeasure.uniform_on(np.arange(1, 2 ** m + 1))


@st.composite
def discrete_measures(draw, min_atoms: int = 1, max_atoms: int = 24):
    atoms = draw(st.lists(st.integers(-5000, 5000), min_size=min_atoms, max_size=max_atoms, unique=True))
    raw = draw(st.lists(st.integers(1, 1000), min_size=len(atoms), max_size=len(atoms)))
    weights = np.asarray(raw, dtype=float)
    return DiscreteMeasure(np.asarray(atoms, dtype=float) / 10.0, weights / weights.sum())


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def uniform8():
    return uniform_grid(3)


@pytest.fixture
def fair_coin():
    return DiscreteMeasure([0.0, 1.0], [0.5, 0.5])
