"""Sampling partially typed configurations of a fully typed program.

A configuration replaces annotation subtrees by `?`. Its precision ratio is
the number of retained type nodes over the number in the original program,
and configurations are spread evenly over precision bins.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass
from pathlib import Path

from evgrad import surface as S
from evgrad.typelattice import DYN, Dyn, Fun, GradualType, Ref, Tuple, Vec, is_static, type_node_count

MAX_ATTEMPTS = 1000


class ConfigError(Exception):
    """Input not dynamizable, or a bin could not be filled."""


@dataclass(frozen=True)
class ConfigSample:
    config_id: str
    program: S.Program
    ratio: float
    bin: int
    seed: int
    sites: tuple  # (site id, retained node count) per annotation site


def enumerate_annotation_sites(program: S.Program) -> list[tuple[int, GradualType, int]]:
    """(site id, type, node count) per annotation. Rejects `?` and unannotated parameters or letrecs."""
    out = []
    for site, kind, ty in S.annotation_sites(program):
        if ty is None:
            if kind == "let":
                continue  # an unannotated let takes its bound expression's type
            raise ConfigError(f"annotation site {site} ({kind}) is missing a type")
        if not is_static(ty):
            raise ConfigError(f"annotation site {site} mentions ?; the input must be fully typed")
        out.append((site, ty, type_node_count(ty)))
    return out


def less_precise_variants(t: GradualType, rng: random.Random) -> GradualType:
    """Replace a random set of subtrees of `t` by `?`, each node erased with probability 1/2."""
    if type(t) is Dyn or rng.random() < 0.5:
        return DYN
    tt = type(t)
    if tt is Ref or tt is Vec:
        return tt(less_precise_variants(t.elem, rng))
    if tt is Tuple:
        return Tuple(tuple(less_precise_variants(x, rng) for x in t.items))
    if tt is Fun:
        return Fun(tuple(less_precise_variants(p, rng) for p in t.params), less_precise_variants(t.ret, rng))
    return t


def bin_of(ratio: float, bins: int = 10) -> int:
    """Bins are [k/bins, (k+1)/bins), the last one closed at 1."""
    return min(int(math.floor(ratio * bins + 1e-12)), bins - 1)


def _reachable_counts(n: int, k: int, bins: int) -> list[int]:
    return [r for r in range(n + 1) if bin_of(r / n, bins) == k]


def _weighted_order(sites, rng):
    """Weighted random shuffle: keys u**(1/w) sorted descending, w = node count."""
    keyed = [(rng.random() ** (1.0 / count), site) for site, _, count in sites]
    keyed.sort(key=lambda p: -p[0])
    return [site for _, site in keyed]


def _erase_to(sites, target: int, rng: random.Random) -> dict:
    """Pick less precise types for sites until roughly `target` nodes remain."""
    chosen = {site: ty for site, ty, _ in sites}
    remaining = sum(count for _, _, count in sites)
    for site in _weighted_order(sites, rng):
        excess = remaining - target
        if excess <= 0:
            break
        ty = chosen[site]
        count = type_node_count(ty)
        if count <= excess:
            chosen[site] = DYN
            remaining -= count
            continue
        for _ in range(8):
            cand = less_precise_variants(ty, rng)
            removed = count - type_node_count(cand)
            if 0 < removed <= excess:
                chosen[site] = cand
                remaining -= removed
                break
    return chosen


def _apply(program: S.Program, chosen: dict) -> S.Program:
    return S.map_annotations(program, lambda site, kind, ty: chosen.get(site, ty))


def _sample(config_id, program, chosen, n, bins, seed) -> ConfigSample:
    retained = tuple((site, type_node_count(ty)) for site, ty in sorted(chosen.items()))
    ratio = sum(c for _, c in retained) / n if n else 1.0
    return ConfigSample(config_id, _apply(program, chosen), ratio, bin_of(ratio, bins), seed, retained)


def sample_lattice(
    program: S.Program, samples_per_node: int = 10, bins: int = 10, seed: int = 0
) -> list[ConfigSample]:
    """`samples_per_node * n` configurations spread over `bins`, plus both endpoints.

    Raises ConfigError when some bin has no reachable retained-node count or
    a slot stays unfilled after MAX_ATTEMPTS tries.
    """
    sites = enumerate_annotation_sites(program)
    n = sum(count for _, _, count in sites)
    typed = {site: ty for site, ty, _ in sites}
    if n == 0:
        return [_sample("typed", program, typed, 0, bins, seed)]
    rng = random.Random(seed)
    total = samples_per_node * n
    per_bin = [total // bins + (1 if k < total % bins else 0) for k in range(bins)]
    out = []
    for k in range(bins):
        counts = _reachable_counts(n, k, bins)
        if per_bin[k] and not counts:
            raise ConfigError(f"bin {k} is unreachable with {n} type nodes")
        for _ in range(per_bin[k]):
            for _attempt in range(MAX_ATTEMPTS):
                cfg_seed = rng.getrandbits(32)
                local = random.Random(cfg_seed)
                chosen = _erase_to(sites, local.choice(counts), local)
                sample = _sample(f"c{len(out):04d}", program, chosen, n, bins, cfg_seed)
                if sample.bin == k:
                    out.append(sample)
                    break
            else:
                raise ConfigError(f"could not fill bin {k} after {MAX_ATTEMPTS} attempts")
    out.append(_sample("typed", program, typed, n, bins, seed))
    out.append(_sample("untyped", program, {site: DYN for site in typed}, n, bins, seed))
    return out


def write_configs(samples: list[ConfigSample], out_dir, stem: str = "config") -> Path:
    """Write one `.gtp` per config and a manifest.csv. Returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.csv"
    with manifest.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["config", "ratio", "bin", "seed"])
        for s in samples:
            (out / f"{stem}-{s.config_id}.gtp").write_text(S.pretty(s.program))
            w.writerow([s.config_id, f"{s.ratio:.4f}", s.bin, s.seed])
    return manifest
