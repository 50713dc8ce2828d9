"""
Скінченні дискретні ймовірнісні міри на ℝ та точна відстань Вассерштейна-1
"""

from typing import Iterable, List, Sequence, Tuple
import logging

import numpy as np

from ..errors import MeasureError
from ..config import DEFAULT_SETTINGS

logger = logging.getLogger(__name__)

# Відхилення суми ваг на рівні округлення не виправляється, щоб повторна побудова не змінювала ваги
_ROUNDING_SLACK = 1e-14


def merge_sorted_atoms(atoms: np.ndarray, weights: np.ndarray, tolerance: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Зливає сусідні (вже відсортовані) атоми, ближчі за tolerance

    Позиція групи - найлівіший атом групи, вага - сума ваг групи.
    """
    if atoms.size <= 1:
        return atoms, weights

    starts = np.empty(atoms.size, dtype=bool)
    starts[0] = True
    np.greater(np.diff(atoms), tolerance, out=starts[1:])
    if starts.all():
        return atoms, weights

    idx = np.flatnonzero(starts)
    return atoms[idx], np.add.reduceat(weights, idx)


class DiscreteMeasure:
    """
    Дискретна ймовірнісна міра μ = Σ wᵢ δ_{xᵢ}

    Атоми строго зростають, ваги додатні та в сумі дають 1.
    Об'єкт незмінний після створення, тому його безпечно передавати між потоками.
    """

    __slots__ = ("_atoms", "_weights")

    def __init__(self, atoms: Iterable[float], weights: Iterable[float],
                 merge_tolerance: float = DEFAULT_SETTINGS.merge_tolerance,
                 renormalization_tolerance: float = DEFAULT_SETTINGS.renormalization_tolerance):
        x = np.asarray(atoms, dtype=np.float64).ravel()
        w = np.asarray(weights, dtype=np.float64).ravel()

        if x.shape != w.shape:
            raise MeasureError(f"Кількість атомів ({x.size}) не дорівнює кількості ваг ({w.size})")
        if x.size == 0:
            raise MeasureError("Міра без атомів")
        if not np.all(np.isfinite(x)):
            raise MeasureError("Атоми мають бути скінченними числами")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise MeasureError("Ваги мають бути невід'ємними скінченними числами")

        keep = w > 0
        x, w = x[keep], w[keep]
        if x.size == 0:
            raise MeasureError("Усі ваги нульові")

        total = w.sum()
        if abs(total - 1.0) > renormalization_tolerance:
            raise MeasureError(f"Сума ваг {total!r} відрізняється від 1 більше ніж на {renormalization_tolerance}")
        if abs(total - 1.0) > _ROUNDING_SLACK:
            w = w / total

        order = np.argsort(x, kind="stable")
        x, w = merge_sorted_atoms(x[order], w[order], merge_tolerance)

        x.setflags(write=False)
        w.setflags(write=False)
        self._atoms = x
        self._weights = w

    @classmethod
    def point_mass(cls, value: float) -> "DiscreteMeasure":
        """δ_c"""
        return cls([value], [1.0])

    @classmethod
    def uniform_on(cls, values: Sequence[float]) -> "DiscreteMeasure":
        """Рівномірна міра на скінченному наборі точок"""
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            raise MeasureError("Порожній набір точок")
        return cls(values, np.full(values.size, 1.0 / values.size))

    @property
    def atoms(self) -> np.ndarray:
        return self._atoms

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def __len__(self) -> int:
        return self._atoms.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (np.array_equal(self._atoms, other._atoms)
                and np.array_equal(self._weights, other._weights))

    __hash__ = None

    def __repr__(self) -> str:
        if len(self) <= 6:
            body = " + ".join(f"{w:.6g}δ({x:.6g})" for x, w in zip(self._atoms, self._weights))
        else:
            body = f"{len(self)} атомів на [{self._atoms[0]:.6g}, {self._atoms[-1]:.6g}]"
        return f"DiscreteMeasure({body})"

    def pairs(self) -> List[Tuple[float, float]]:
        return list(zip(self._atoms.tolist(), self._weights.tolist()))

    def mean(self) -> float:
        """f(μ) = ∫ t dμ(t)"""
        return float(np.dot(self._weights, self._atoms))

    def diameter(self) -> float:
        """diam(supp(μ)) = max атом - min атом"""
        return float(self._atoms[-1] - self._atoms[0])

    def cdf_at(self, x: float) -> float:
        """Неперервна справа функція розподілу F_μ(x) = μ(-∞, x]"""
        k = np.searchsorted(self._atoms, x, side="right")
        if k == self._atoms.size:
            return 1.0
        return float(self._weights[:k].sum())

    def cdf_values(self) -> np.ndarray:
        """Значення F_μ в атомах (кумулятивні ваги)"""
        cdf = np.cumsum(self._weights)
        cdf[-1] = 1.0
        return cdf


def wasserstein1(a: DiscreteMeasure, b: DiscreteMeasure) -> float:
    """
    Точна відстань W_1(a, b) = ∫ |F_a(x) - F_b(x)| dx

    Прохід по об'єднаному відсортованому носію: між сусідніми точками
    обидві функції розподілу сталі, тому інтеграл - скінченна сума.
    """
    support = np.concatenate((a.atoms, b.atoms))
    support.sort(kind="mergesort")
    gaps = np.diff(support)
    if gaps.size == 0:
        return 0.0

    left = support[:-1]
    cdf_a = np.concatenate(([0.0], a.cdf_values()))[np.searchsorted(a.atoms, left, side="right")]
    cdf_b = np.concatenate(([0.0], b.cdf_values()))[np.searchsorted(b.atoms, left, side="right")]
    return float(np.dot(np.abs(cdf_a - cdf_b), gaps))


def empirical_from_samples(xs: Iterable[float]) -> DiscreteMeasure:
    """Емпірична міра з вагою 1/N на кожен елемент вибірки (збіги зливаються)"""
    samples = np.asarray(xs if isinstance(xs, np.ndarray) else list(xs), dtype=np.float64).ravel()
    if samples.size == 0:
        raise MeasureError("Емпірична міра з порожньої вибірки")
    logger.debug("📊 Емпірична міра з %d вибіркових значень", samples.size)
    return DiscreteMeasure(samples, np.full(samples.size, 1.0 / samples.size))


def quantile_coupling_distance(xs: Sequence[float], ys: Sequence[float]) -> float:
    """
    W_1 між двома емпіричними мірами однакового розміру через квантильне зчеплення

    (1/N) Σ |x_(i) - y_(i)| по відсортованих вибірках.
    """
    x = np.sort(np.asarray(xs, dtype=np.float64))
    y = np.sort(np.asarray(ys, dtype=np.float64))
    if x.size != y.size or x.size == 0:
        raise MeasureError("Квантильне зчеплення потребує непорожніх вибірок однакового розміру")
    return float(np.mean(np.abs(x - y)))
