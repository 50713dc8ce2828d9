#!/usr/bin/env python3
"""
Запуск командного рядка DCG Evaluator з правильними шляхами
"""

import os
import sys

# Додаємо поточну директорію до Python path
current_dir = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, current_dir)

from dcg_evaluator.cli.app import main

if __name__ == "__main__":
    sys.exit(main())
