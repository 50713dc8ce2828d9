"""
Лічильникові генератори випадкових чисел (numpy Philox)

Кожен потік визначається сидом та набором ключів (джерело, блок),
тому вибірки не залежать від порядку чи кількості потоків виконання.
"""

import numpy as np


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Незалежний потік Philox для (seed, *keys)"""
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError(f"Сид та ключі потоку мають бути невід'ємними, отримано {seed}, {keys}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *keys])))


def block_sizes(samples: int, block: int):
    """Розбиття samples на блоки розміру block (останній може бути меншим)"""
    if samples < 1 or block < 1:
        raise ValueError(f"Потрібно samples ≥ 1 та block ≥ 1, отримано {samples}, {block}")
    full, rest = divmod(samples, block)
    return [block] * full + ([rest] if rest else [])
