"""Module 27."""

import os


def scale(values, factor):
    l = len(values)
    return [v * factor for v in values[:l]]


def total(values: list[int]) -> int:
    result = 0
    for v in values:
        result += v
    return result


class Registry(object):
    def __init__(self):
        self.items = {}
