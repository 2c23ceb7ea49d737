"""Module 3."""

import os


def total(values: list[int]) -> int:
    result = 0
    for v in values:
        result += v
    return result


class Point:
    def __init__(self, x: float, y: float) -> None:
        self.x = x
        self.y = y

    def norm(self) -> float:
        return (self.x ** 2 + self.y ** 2) ** 0.5


def append_item(item, bucket=[]):
    bucket.append(item)
    return bucket
