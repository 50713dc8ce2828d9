"""
Ієрархія винятків DCG Evaluator
"""

from typing import List


class DcgError(Exception):
    """Базовий виняток для всіх чисельних та валідаційних помилок"""


class MeasureError(DcgError):
    """Некоректна дискретна міра: ваги, атоми, порожня вибірка, CSV"""


class SourceError(DcgError):
    """Некоректний вхідний розподіл (параметри, неінтегровна квантиль-функція)"""


class GraphValidationError(DcgError):
    """Граф порушує інваріанти обчислювального графа"""

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        lines = "\n".join(f"  - {problem}" for problem in self.problems)
        super().__init__(f"Граф некоректний ({len(self.problems)} проблем):\n{lines}")


class NonLipschitzError(DcgError):
    """Оцінку неможливо обчислити: вузол без оголошеної константи Ліпшиця"""


class PathOverflowError(DcgError):
    """Кількість шляхів до термінала перевищує дозволений ліміт"""

    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(
            f"Кількість шляхів {count} перевищує ліміт {cap} (збільште path_cap)"
        )


class AtomCapExceeded(DcgError):
    """Спільний простір атомів перевищує ліміт --atom-cap"""

    def __init__(self, node: str, size: int, cap: int):
        self.node = node
        self.size = size
        self.cap = cap
        super().__init__(
            f"Вузол '{node}': спільний простір {size} атомів перевищує ліміт {cap} "
            f"(збільште --atom-cap)"
        )
