"""Module 19."""

import os


square = lambda x: x * x


class Point:
    def __init__(self, x: float, y: float) -> None:
        self.x = x
        self.y = y

    def norm(self) -> float:
        return (self.x ** 2 + self.y ** 2) ** 0.5


def read_config(path: str) -> dict:
    with open(path) as fh:
        return dict(line.split("=", 1) for line in fh if "=" in line)


def chunks(items: list, size: int) -> list:
    return [items[i:i + size] for i in range(0, len(items), size)]
