"""
DCG Evaluator - детерміноване поширення квантованих розподілів через обчислювальні графи
Оцінки похибки у метриці Вассерштейна-1 та експеримент Ейлера-Маруями
"""

__version__ = "1.0.0"
