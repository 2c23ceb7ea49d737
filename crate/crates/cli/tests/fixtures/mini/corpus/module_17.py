"""Module 17."""

import os


def merge(a: dict, b: dict) -> dict:
    out = dict(a)
    out.update(b)
    return out


def chunks(items: list, size: int) -> list:
    return [items[i:i + size] for i in range(0, len(items), size)]
