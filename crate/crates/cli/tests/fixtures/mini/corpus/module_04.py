"""Module 4."""

import os


class Point:
    def __init__(self, x: float, y: float) -> None:
        self.x = x
        self.y = y

    def norm(self) -> float:
        return (self.x ** 2 + self.y ** 2) ** 0.5


def total(values: list[int]) -> int:
    result = 0
    for v in values:
        result += v
    return result


def read_config(path: str) -> dict:
    with open(path) as fh:
        return dict(line.split("=", 1) for line in fh if "=" in line)
