"""Module 25."""

import os


def total(values: list[int]) -> int:
    result = 0
    for v in values:
        result += v
    return result
