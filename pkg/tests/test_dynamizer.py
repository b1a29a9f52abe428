import csv
import random
from collections import Counter

import pytest

from evgrad import benchmarks
from evgrad.checker import typecheck
from evgrad.dynamizer import (
    ConfigError, bin_of, enumerate_annotation_sites, less_precise_variants, sample_lattice, write_configs,
)
from evgrad.surface import annotation_sites, parse_program, parse_type, pretty
from evgrad.typelattice import DYN, INT, precision_le, type_node_count

# ten type nodes: 3 + 1 + 3 + 1 + 1 + 1 (f, x, g, b, n, m)
TEN = "let f : int -> int = fun (x:int) -> x + 1 in let g : bool -> int = fun (b:bool) -> if b then 1 else 0 in let n : int = 2 in let m : int = 1 in f n + g true + m"


def test_sites():
    assert enumerate_annotation_sites(parse_program("fun (x:int) -> x")) == [(0, INT, 1)]
    sites = enumerate_annotation_sites(parse_program("let f : int -> int = fun (x:int) -> x in f"))
    assert sites[0][1:] == (parse_type("int -> int"), 3)


def test_zero_annotations_give_one_trivial_config():
    p = parse_program("1 + 2")
    assert enumerate_annotation_sites(p) == []
    (only,) = sample_lattice(p)
    assert only.program == p and only.ratio == 1.0


def test_rejects_imprecise_input():
    with pytest.raises(ConfigError):
        enumerate_annotation_sites(parse_program("fun (x:?) -> x"))
    with pytest.raises(ConfigError):
        enumerate_annotation_sites(parse_program("fun x -> x"))


def test_less_precise_support_for_arrow():
    rng = random.Random(0)
    t = parse_type("int -> int")
    seen = Counter(less_precise_variants(t, rng) for _ in range(10_000))
    expected = {parse_type(s) for s in ("?", "? -> int", "int -> ?", "? -> ?", "int -> int")}
    assert set(seen) == expected


def test_less_precise_variants_only_erase():
    rng = random.Random(1)
    t = parse_type("(int, ref[bool]) -> vec[int * float]")
    for _ in range(500):
        v = less_precise_variants(t, rng)
        assert precision_le(t, v)
        assert type_node_count(v) <= type_node_count(t)
    assert less_precise_variants(DYN, rng) == DYN


def test_bins():
    assert bin_of(0.0) == 0 and bin_of(0.0999) == 0 and bin_of(0.1) == 1
    assert bin_of(1.0) == 9 and bin_of(0.3) == 3 and bin_of(0.7) == 7


def test_seven_nodes_cannot_fill_every_bin():
    # no count r in 0..7 has r/7 in [0.3, 0.4), so bin 3 is unreachable
    p7 = parse_program("let f : (int, int) -> int = fun (x:int, y:int) -> x in let z : int = 1 in f z 2")
    assert sum(c for _, _, c in enumerate_annotation_sites(p7)) == 7
    with pytest.raises(ConfigError, match="bin 3"):
        sample_lattice(p7)


def _check_contract(p, samples, per_node=10):
    sites = {s: t for s, t, _ in enumerate_annotation_sites(p)}
    n = sum(type_node_count(t) for t in sites.values())
    sampled = [s for s in samples if s.config_id not in ("typed", "untyped")]
    assert len(sampled) == per_node * n and len(samples) == per_node * n + 2
    assert Counter(s.bin for s in sampled) == Counter({k: n for k in range(10)})
    for s in samples:
        reparsed = parse_program(pretty(s.program))
        typecheck(reparsed)
        variant = {i: t for i, _, t in annotation_sites(reparsed) if i in sites}
        for i, t in sites.items():
            assert precision_le(t, variant[i])
        ratio = sum(type_node_count(t) for t in variant.values()) / n
        assert ratio == pytest.approx(s.ratio) and bin_of(ratio) == s.bin


def test_ten_node_contract():
    p = parse_program(TEN)
    _check_contract(p, sample_lattice(p, seed=3))


def test_benchmark_contract():
    p = parse_program(benchmarks.load("tak").source)
    _check_contract(p, sample_lattice(p, seed=5))


def test_endpoints():
    p = parse_program(TEN)
    samples = {s.config_id: s for s in sample_lattice(p)}
    assert samples["typed"].ratio == 1.0 and samples["typed"].program == p
    assert samples["untyped"].ratio == 0.0


def test_determinism():
    p = parse_program(TEN)
    a = [(s.config_id, s.program, s.ratio, s.seed) for s in sample_lattice(p, seed=9)]
    b = [(s.config_id, s.program, s.ratio, s.seed) for s in sample_lattice(p, seed=9)]
    c = [(s.config_id, s.program, s.ratio, s.seed) for s in sample_lattice(p, seed=10)]
    assert a == b and a != c


def test_write_configs(tmp_path):
    samples = sample_lattice(parse_program(TEN), seed=2)
    manifest = write_configs(samples, tmp_path, "ten")
    rows = list(csv.DictReader(manifest.open()))
    assert len(rows) == len(samples) == len(list(tmp_path.glob("*.gtp")))
    assert rows[0].keys() == {"config", "ratio", "bin", "seed"}
    first = samples[0]
    assert (tmp_path / f"ten-{first.config_id}.gtp").read_text().strip()
    assert rows[0]["ratio"] == f"{first.ratio:.4f}"
