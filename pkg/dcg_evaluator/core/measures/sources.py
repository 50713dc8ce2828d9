"""
Вхідні розподіли джерел графа (SourceSpec)
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence
import math
import warnings

import numpy as np
from scipy import integrate

from .measure import DiscreteMeasure
from ..errors import SourceError


class SourceSpec:
    """Базовий клас аналітичного або дискретного розподілу джерела"""

    kind: str = "abstract"

    @property
    def is_discrete(self) -> bool:
        return False

    def mean(self) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> Dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class GaussianSource(SourceSpec):
    mu: float = 0.0
    sigma: float = 1.0
    kind = "gaussian"

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)) or self.sigma <= 0:
            raise SourceError(f"gaussian: потрібні скінченні mean та std > 0, отримано ({self.mu}, {self.sigma})")

    def mean(self) -> float:
        return self.mu

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.normal(self.mu, self.sigma, size)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "gaussian", "mean": self.mu, "std": self.sigma}


@dataclass(frozen=True)
class UniformSource(SourceSpec):
    lo: float = 0.0
    hi: float = 1.0
    kind = "uniform"

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo >= self.hi:
            raise SourceError(f"uniform: потрібно lo < hi, отримано ({self.lo}, {self.hi})")

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True, eq=False)
class DiscreteSource(SourceSpec):
    measure: DiscreteMeasure
    kind = "discrete"

    @property
    def is_discrete(self) -> bool:
        return True

    def mean(self) -> float:
        return self.measure.mean()

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # Обернена функція розподілу по кумулятивних вагах
        u = rng.random(size)
        idx = np.searchsorted(self.measure.cdf_values(), u, side="right")
        return self.measure.atoms[np.minimum(idx, len(self.measure) - 1)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": "discrete",
            "atoms": self.measure.atoms.tolist(),
            "weights": self.measure.weights.tolist(),
        }


@dataclass(frozen=True)
class PointSource(SourceSpec):
    value: float = 0.0
    kind = "point"

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise SourceError("point: значення має бути скінченним")

    @property
    def is_discrete(self) -> bool:
        return True

    @property
    def measure(self) -> DiscreteMeasure:
        return DiscreteMeasure.point_mass(self.value)

    def mean(self) -> float:
        return self.value

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, self.value)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "point", "value": self.value}


@dataclass(frozen=True, eq=False)
class QuantileSource(SourceSpec):
    """
    Розподіл X = Q(U), U ~ U(0,1), заданий квантиль-функцією

    Q задається або таблицею (probabilities, values) з лінійною інтерполяцією,
    або векторизованою функцією на (0,1).
    """

    function: Optional[Callable[[np.ndarray], np.ndarray]] = None
    probabilities: Optional[Sequence[float]] = None
    values: Optional[Sequence[float]] = None
    integration_tolerance: float = 1e-10
    _grid_checks: int = field(default=1025, repr=False)
    kind = "quantile"

    def __post_init__(self):
        if self.function is None:
            if self.probabilities is None or self.values is None:
                raise SourceError("quantile: потрібна функція або таблиця (probabilities, values)")
            p = np.asarray(self.probabilities, dtype=np.float64)
            v = np.asarray(self.values, dtype=np.float64)
            if p.shape != v.shape or p.size < 2:
                raise SourceError("quantile: таблиця має містити щонайменше дві пари однакової довжини")
            if p[0] != 0.0 or p[-1] != 1.0 or np.any(np.diff(p) <= 0):
                raise SourceError("quantile: probabilities мають строго зростати від 0 до 1")
            if not np.all(np.isfinite(v)):
                raise SourceError("quantile: табличні значення мають бути скінченними")
        grid = (np.arange(1, self._grid_checks + 1) - 0.5) / self._grid_checks
        q = self.quantile(grid)
        if np.any(np.diff(q) < -1e-12):
            raise SourceError("quantile: квантиль-функція має бути неспадною на (0,1)")

    def quantile(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if self.function is not None:
            return np.asarray(self.function(u), dtype=np.float64)
        return np.interp(u, self.probabilities, self.values)

    def integral(self, lo: float, hi: float) -> float:
        """∫_lo^hi Q(u) du з абсолютним допуском integration_tolerance"""
        if hi <= lo:
            return 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                value, _ = integrate.quad(
                    lambda u: float(self.quantile(u)), lo, hi,
                    epsabs=self.integration_tolerance, epsrel=self.integration_tolerance, limit=500,
                )
            except (integrate.IntegrationWarning, ZeroDivisionError, OverflowError) as exc:
                raise SourceError(f"quantile: інтеграл на [{lo}, {hi}] не збігається ({exc})") from exc
        if not math.isfinite(value):
            raise SourceError(f"quantile: інтеграл на [{lo}, {hi}] нескінченний")
        return value

    def mean(self) -> float:
        return self.integral(0.0, 1.0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.quantile(rng.random(size))

    def to_dict(self) -> Dict[str, Any]:
        if self.function is not None:
            raise SourceError("quantile: функціональну квантиль-функцію неможливо серіалізувати")
        return {
            "type": "quantile",
            "probabilities": list(map(float, self.probabilities)),
            "values": list(map(float, self.values)),
        }


@dataclass(frozen=True, eq=False)
class ParetoSource(QuantileSource):
    """Парето: Q(u) = scale·(1-u)^(-1/α); скінченне середнє лише при α > 1"""

    alpha: float = 2.0
    scale: float = 1.0
    kind = "pareto"

    def __post_init__(self):
        if self.alpha <= 0 or self.scale <= 0:
            raise SourceError(f"pareto: потрібні alpha > 0 та scale > 0, отримано ({self.alpha}, {self.scale})")
        alpha, scale = self.alpha, self.scale
        object.__setattr__(self, "function", lambda u: scale * np.power(1.0 - np.asarray(u), -1.0 / alpha))
        super().__post_init__()

    def integral(self, lo: float, hi: float) -> float:
        """
        ∫_lo^hi scale·(1-u)^(-1/α) du у замкненій формі

        З p = 1 - 1/α: scale·((1-lo)^p - (1-hi)^p)/p, де різниця степенів
        береться як (1-hi)^p·expm1(p·d), d = log1p((hi-lo)/(1-hi)).
        """
        if hi <= lo:
            return 0.0
        p = 1.0 - 1.0 / self.alpha
        if hi >= 1.0:
            if p <= 0.0:
                raise SourceError(f"pareto: при alpha = {self.alpha} ≤ 1 інтеграл на [{lo}, 1] нескінченний")
            return self.scale * (1.0 - lo) ** p / p
        d = math.log1p((hi - lo) / (1.0 - hi))
        if p == 0.0:
            return self.scale * d
        return self.scale * (1.0 - hi) ** p * math.expm1(p * d) / p

    def mean(self) -> float:
        if self.alpha <= 1.0:
            raise SourceError(f"pareto: при alpha = {self.alpha} ≤ 1 середнє нескінченне")
        return self.alpha * self.scale / (self.alpha - 1.0)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "pareto", "alpha": self.alpha, "scale": self.scale}


def gaussian(mean: float = 0.0, std: float = 1.0) -> GaussianSource:
    return GaussianSource(mu=float(mean), sigma=float(std))


def uniform(lo: float = 0.0, hi: float = 1.0) -> UniformSource:
    return UniformSource(lo=float(lo), hi=float(hi))


def discrete(measure: DiscreteMeasure) -> DiscreteSource:
    return DiscreteSource(measure=measure)


def point(value: float) -> PointSource:
    return PointSource(value=float(value))


def source_from_dict(data: Dict[str, Any]) -> SourceSpec:
    """Створює SourceSpec з JSON-подібного словника (поле type)"""
    kind = data.get("type")
    try:
        if kind == "gaussian":
            return gaussian(data.get("mean", 0.0), data.get("std", 1.0))
        if kind == "uniform":
            return uniform(data["lo"], data["hi"])
        if kind == "point":
            return point(data["value"])
        if kind == "discrete":
            return discrete(DiscreteMeasure(data["atoms"], data["weights"]))
        if kind == "quantile":
            return QuantileSource(probabilities=tuple(data["probabilities"]), values=tuple(data["values"]))
        if kind == "pareto":
            return ParetoSource(alpha=float(data["alpha"]), scale=float(data.get("scale", 1.0)))
    except KeyError as exc:
        raise SourceError(f"{kind}: відсутнє поле {exc.args[0]!r}") from exc
    raise SourceError(f"Невідомий тип розподілу: {kind!r}")
