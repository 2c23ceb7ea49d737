"""Module 18."""

import os


def read_config(path: str) -> dict:
    with open(path) as fh:
        return dict(line.split("=", 1) for line in fh if "=" in line)


def chunks(items: list, size: int) -> list:
    return [items[i:i + size] for i in range(0, len(items), size)]
