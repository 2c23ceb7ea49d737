"""Module 10."""

import os


def append_item(item, bucket=[]):
    bucket.append(item)
    return bucket


def read_config(path: str) -> dict:
    with open(path) as fh:
        return dict(line.split("=", 1) for line in fh if "=" in line)


def merge(a: dict, b: dict) -> dict:
    out = dict(a)
    out.update(b)
    return out


def chunks(items: list, size: int) -> list:
    return [items[i:i + size] for i in range(0, len(items), size)]
