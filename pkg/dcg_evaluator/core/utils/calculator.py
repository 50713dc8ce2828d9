"""
Калькулятор верхніх оцінок похибки W_1 для обчислювальних графів
"""

from typing import Dict, List, Literal, Tuple
import logging

from pydantic import BaseModel

from ..config import Settings, DEFAULT_SETTINGS
from ..errors import PathOverflowError
from ..graph.model import (
    CompGraph, validate, path_counts, distortion_to_terminal, max_distortion_to_terminal,
)
from ..measures.quantize import MeanSplitQuantizer

logger = logging.getLogger(__name__)

Constant = Literal["loose", "tight"]


class SourceTerm(BaseModel):
    """Внесок одного джерела у праву частину оцінки"""

    source: str
    quantization_error: float
    diameter: float
    compression_term: float
    paths: int
    distortion: float
    contribution: float


class BoundReport(BaseModel):
    n: int
    constant: Constant
    total: float
    terms: List[SourceTerm]


class BoundCalculator:
    """
    Клас для розрахунку оцінок похибки квантизованого та стисненого графа

    Сума по шляхах Σ_γ Π ‖f_v‖_Lip рахується динамічним програмуванням,
    діаметр носія - по фактично квантизованому джерелу.
    """

    def __init__(self, settings: Settings = DEFAULT_SETTINGS):
        self.settings = settings
        self.quantizer = MeanSplitQuantizer(settings)

    @staticmethod
    def compression_factor(n: int, constant: Constant = "loose") -> float:
        """3/2ⁿ (формулювання теореми) або 3/2^(n+1) (останній крок доведення)"""
        if constant == "loose":
            return 3.0 / 2 ** n
        if constant == "tight":
            return 3.0 / 2 ** (n + 1)
        raise ValueError(f"Невідома константа '{constant}', очікується loose або tight")

    def source_errors(self, g: CompGraph, n: int) -> Dict[str, Tuple[float, float]]:
        """(W_1(μ_s, μ_s^(n)), diam(supp μ_s^(n))) для кожного джерела"""
        result = {}
        for source_id in g.sources():
            spec = g.nodes[source_id].source
            quantized, _ = self.quantizer.quantize_source(spec, n, with_tree=False)
            result[source_id] = (self.quantizer.quantization_error(spec, n), quantized.diameter())
        return result

    def theorem1_bound(self, g: CompGraph, n: int, constant: Constant = "loose") -> BoundReport:
        """
        Σ_s (W_1(μ_s, μ_s^(n)) + c_n·diam(supp μ_s^(n))) · Σ_{γ ∈ 𝖯(s,Δ)} Π ‖f_v‖_Lip

        Raises:
            NonLipschitzError якщо вузол не має константи Ліпшиця
        """
        order = validate(g)
        distortion = distortion_to_terminal(g, order)
        counts = path_counts(g, order)
        factor = self.compression_factor(n, constant)

        terms = []
        for source_id, (error, diameter) in self.source_errors(g, n).items():
            compression = factor * diameter
            terms.append(SourceTerm(
                source=source_id,
                quantization_error=error,
                diameter=diameter,
                compression_term=compression,
                paths=counts[source_id],
                distortion=distortion[source_id],
                contribution=(error + compression) * distortion[source_id],
            ))

        total = sum(term.contribution for term in terms)
        logger.debug("📊 Оцінка (n=%d, %s): %.6g", n, constant, total)
        return BoundReport(n=n, constant=constant, total=total, terms=terms)

    def quantization_bound(self, g: CompGraph, n: int) -> float:
        """Σ_s W_1(μ_s, μ_s^(n)) · Σ_γ Π Lip: похибка квантизації без стиснення"""
        order = validate(g)
        distortion = distortion_to_terminal(g, order)
        return sum(error * distortion[s] for s, (error, _) in self.source_errors(g, n).items())

    def compression_bound(self, g: CompGraph, n: int) -> float:
        """(3/2^(n+1)) Σ_s diam(supp μ_s^(n)) · Σ_γ Π Lip: похибка кроку стиснення"""
        order = validate(g)
        distortion = distortion_to_terminal(g, order)
        factor = self.compression_factor(n, "tight")
        return sum(factor * diam * distortion[s] for s, (_, diam) in self.source_errors(g, n).items())

    def crude_bound(self, g: CompGraph, n: int, constant: Constant = "loose") -> float:
        """
        #𝖯(𝖲,Δ) × max Π ‖f_v‖_Lip × max_s (W_1(μ_s, μ_s^(n)) + c_n·diam)

        Raises:
            PathOverflowError якщо кількість шляхів перевищує path_cap
        """
        order = validate(g)
        counts = path_counts(g, order)
        total_paths = sum(counts[s] for s in g.sources())
        if total_paths > self.settings.path_cap:
            raise PathOverflowError(total_paths, self.settings.path_cap)

        worst = max_distortion_to_terminal(g, order)
        factor = self.compression_factor(n, constant)
        errors = self.source_errors(g, n)
        per_source = max(error + factor * diam for error, diam in errors.values())
        distortion = max(worst[s] for s in g.sources())
        return total_paths * distortion * per_source


_default = BoundCalculator()


def theorem1_bound(g: CompGraph, n: int, constant: Constant = "loose") -> BoundReport:
    return _default.theorem1_bound(g, n, constant)


def crude_bound(g: CompGraph, n: int, constant: Constant = "loose") -> float:
    return _default.crude_bound(g, n, constant)
