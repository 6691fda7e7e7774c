from __future__ import annotations

import hashlib
from collections.abc import Generator, Iterable
from pathlib import Path

from .type_aliases import SpanGenerator


def chunk_spans(total: int, chunk_size: int) -> SpanGenerator:
    """
    Splits a trial range into fixed-size chunks.

    :param total: number of trials
    :param chunk_size: trials per chunk (the last chunk may be shorter)
    :return: Generator of (chunk index, first trial, one past the last trial)
    """
    for index, start in enumerate(range(0, total, chunk_size)):
        yield index, start, min(start + chunk_size, total)


def merge_points(points: Iterable[float], tolerance: float = 1e-12) -> list[float]:
    """
    Sorts points and drops the ones closer than ``tolerance`` to their predecessor.

    :param points: real values
    :param tolerance: merge distance
    :return: sorted list of distinct points
    """
    merged: list[float] = []
    for point in sorted(points):
        if not merged or point - merged[-1] > tolerance:
            merged.append(point)
    return merged


def pieces(
    breakpoints: Iterable[float], lower: float, upper: float, tolerance: float = 1e-12
) -> Generator[tuple[float, float], None, None]:
    """
    Splits [lower, upper] at every breakpoint strictly inside it.

    :param breakpoints: split points, in any order
    :param lower: start of the interval
    :param upper: end of the interval
    :param tolerance: pieces shorter than this are skipped
    :return: Generator of (start, end) sub-intervals covering [lower, upper]
    """
    inner = [p for p in breakpoints if lower + tolerance < p < upper - tolerance]
    edges = merge_points([lower, *inner, upper], tolerance)
    for start, end in zip(edges, edges[1:]):
        yield start, end


def file_digest(path: str | Path) -> str:
    """
    :param path: a file
    :return: hex SHA-256 of its bytes
    """
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()
