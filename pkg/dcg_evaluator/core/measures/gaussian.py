"""
Замкнені формули для стандартного нормального розподілу

Щільність, хвіст Φ̄ через доповнювальну функцію помилок, умовні середні
хвоста через відношення Міллса, ω-послідовність та таблиця швидкості
квантизації гаусового розподілу.
"""

from dataclasses import dataclass
from typing import List, Tuple
import logging
import math

import numpy as np
from scipy import special

logger = logging.getLogger(__name__)

SQRT_2 = math.sqrt(2.0)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Нижче порогу - erfcx, яка не залежить від зникнення Φ̄(x); вище - асимптотичний розклад
ASYMPTOTIC_THRESHOLD = 1e7
ASYMPTOTIC_TERMS = 3

RATE_TABLE_MAX_N = 20


def normal_pdf(x):
    """φ(x) = e^{-x²/2}/√(2π)"""
    return INV_SQRT_2PI * np.exp(-0.5 * np.square(x))


def tail_probability(x):
    """Φ̄(x) = P(X > x) = erfc(x/√2)/2, без віднімання 1 - Φ(x)"""
    return 0.5 * special.erfc(np.asarray(x, dtype=np.float64) / SQRT_2)


def interval_probability(lo, hi):
    """
    P(lo ≤ X < hi) для масивів меж

    Для правих клітинок різниця хвостів, для лівих - різниця Φ,
    щоб дзеркальні клітинки обчислювались дзеркальними виразами.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    right = special.ndtr(-lo) - special.ndtr(-hi)
    left = special.ndtr(hi) - special.ndtr(lo)
    return np.where(lo >= 0.0, right, left)


def asymptotic_tail_ratio(x: float, terms: int = ASYMPTOTIC_TERMS) -> float:
    """
    Φ̄(x)/φ(x) ≈ P_n(1/x) = Σ_{k<n} (-1)^k (2k-1)!! x^{-(2k+1)}

    Асимптотичний розклад хвоста для великих x.
    """
    inv = 1.0 / x
    total = 0.0
    double_factorial = 1.0
    for k in range(terms):
        if k > 0:
            double_factorial *= 2 * k - 1
        total += (-1) ** k * double_factorial * inv ** (2 * k + 1)
    return total


def conditional_mean_tail(x: float) -> float:
    """
    E[X | X ≥ x] = φ(x)/Φ̄(x) для X ~ N(0,1)

    Обчислюється як √(2/π)/erfcx(x/√2), що не втрачає точності у хвості;
    за межею ASYMPTOTIC_THRESHOLD - через асимптотичний розклад.
    """
    if x == -math.inf:
        return 0.0
    if x >= ASYMPTOTIC_THRESHOLD:
        return 1.0 / asymptotic_tail_ratio(x)
    return float(SQRT_2_OVER_PI / special.erfcx(x / SQRT_2))


def partial_absolute_deviation(lo, hi, center):
    """
    ∫_lo^hi |x - c| φ(x) dx для масивів клітинок [lo, hi) та центрів c

    = [φ(c) - φ(hi) - c·P(c ≤ X < hi)] + [c·P(lo ≤ X < c) - φ(lo) + φ(c)]
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    c = np.asarray(center, dtype=np.float64)
    phi_c = normal_pdf(c)
    upper = phi_c - normal_pdf(hi) - c * interval_probability(c, hi)
    lower = c * interval_probability(lo, c) - normal_pdf(lo) + phi_c
    return upper + lower


@dataclass(frozen=True)
class OmegaSequence:
    """ω_0 = E[X] = 0, ω_{j+1} = E[X | X ≥ ω_j]"""

    values: np.ndarray

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, j: int) -> float:
        return float(self.values[j])

    def normalized(self) -> np.ndarray:
        """ω_j/√(2j) для j ≥ 1"""
        j = np.arange(1, self.values.size)
        return self.values[1:] / np.sqrt(2.0 * j)

    def increments(self) -> np.ndarray:
        return np.diff(self.values)


def omega_sequence(steps: int) -> OmegaSequence:
    """
    Ітеровані умовні середні хвоста стандартного нормального розподілу

    Args:
        steps: J ≥ 1, кількість кроків рекурсії

    Returns:
        OmegaSequence довжини J+1
    """
    if steps < 1:
        raise ValueError(f"omega_sequence: потрібно J ≥ 1, отримано {steps}")

    values = np.empty(steps + 1)
    values[0] = 0.0
    for j in range(steps):
        values[j + 1] = conditional_mean_tail(values[j])

    logger.debug("📊 ω_%d = %.12g (ω/√(2J) = %.6f)", steps, values[-1], values[-1] / math.sqrt(2 * steps))
    return OmegaSequence(values)


@dataclass(frozen=True)
class RateRow:
    n: int
    error: float


def gaussian_rate_table(n_max: int) -> List[RateRow]:
    """
    W_1(μ, μ^(n)) для μ = N(0,1) та n = 0..n_max через точні інтеграли по клітинках

    Очікувана швидкість O(2^{-n}): відношення сусідніх похибок прямує до 2.
    """
    if not 1 <= n_max <= RATE_TABLE_MAX_N:
        raise ValueError(f"gaussian_rate_table: n_max має бути в [1, {RATE_TABLE_MAX_N}], отримано {n_max}")

    from .quantize import MeanSplitQuantizer
    from .sources import gaussian

    errors = MeanSplitQuantizer().level_errors(gaussian(0.0, 1.0), n_max)
    return [RateRow(n=n, error=float(e)) for n, e in enumerate(errors)]


def rate_ratios(table: List[RateRow]) -> List[Tuple[int, float]]:
    """(n, error(n)/error(n+1)) для сусідніх рядків таблиці"""
    return [(a.n, a.error / b.error) for a, b in zip(table, table[1:]) if b.error > 0]


def conditional_mean_tail_array(x) -> np.ndarray:
    """Векторизований conditional_mean_tail для масивів скінченних меж"""
    x = np.asarray(x, dtype=np.float64)
    safe = np.minimum(x, ASYMPTOTIC_THRESHOLD)
    exact = SQRT_2_OVER_PI / special.erfcx(safe / SQRT_2)
    if np.any(x >= ASYMPTOTIC_THRESHOLD):
        far = np.array([1.0 / asymptotic_tail_ratio(v) if v >= ASYMPTOTIC_THRESHOLD else 0.0 for v in x.ravel()])
        exact = np.where(x >= ASYMPTOTIC_THRESHOLD, far.reshape(x.shape), exact)
    return exact
