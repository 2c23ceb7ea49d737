"""Module 5."""

import os


def total(values: list[int]) -> int:
    result = 0
    for v in values:
        result += v
    return result


class Registry(object):
    def __init__(self):
        self.items = {}


def chunks(items: list, size: int) -> list:
    return [items[i:i + size] for i in range(0, len(items), size)]


def scale(values, factor):
    l = len(values)
    return [v * factor for v in values[:l]]


def merge(a: dict, b: dict) -> dict:
    out = dict(a)
    out.update(b)
    return out
