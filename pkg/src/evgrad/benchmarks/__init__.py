"""Bundled fully typed benchmark programs and their input sizes."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

SUITE = ("tak", "matmult", "quicksort", "sieve", "array", "nbody")
EXTRA = ("floatloop",)


@dataclass(frozen=True)
class Benchmark:
    name: str
    source: str
    inputs: tuple


def _sizes() -> dict:
    return json.loads(resources.files(__name__).joinpath("sizes.json").read_text())


def load(name: str) -> Benchmark:
    try:
        source = resources.files(__name__).joinpath(f"{name}.gtp").read_text()
    except FileNotFoundError:
        raise KeyError(f"no bundled benchmark named {name!r}") from None
    return Benchmark(name, source, tuple(_sizes().get(name, ())))


def load_dir(path) -> list[Benchmark]:
    """Benchmarks from a directory of `.gtp` files with an optional sizes.json."""
    root = Path(path)
    sizes_file = root / "sizes.json"
    sizes = json.loads(sizes_file.read_text()) if sizes_file.exists() else {}
    return [
        Benchmark(f.stem, f.read_text(), tuple(sizes.get(f.stem, ())))
        for f in sorted(root.glob("*.gtp"))
    ]


def suite() -> list[Benchmark]:
    return [load(name) for name in SUITE]
