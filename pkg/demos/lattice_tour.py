"""Walk the precision lattice of one benchmark.

Samples partially typed configurations of `tak`, runs each in the three
modes and prints mean check counts per precision bin. Bin 0 holds the
least precise configurations and bin 9 the most precise ones.
"""

from collections import defaultdict

from evgrad import benchmarks
from evgrad.dynamizer import sample_lattice
from evgrad.pipeline import CompileOptions, run_source
from evgrad.surface import parse_program

bench = benchmarks.load("tak")
configs = sample_lattice(parse_program(bench.source), samples_per_node=3, seed=1)

table = defaultdict(list)
for cfg in configs:
    for mode in ("g", "mc", "mv"):
        r = run_source(cfg.program, CompileOptions(mode), inputs=bench.inputs)
        table[cfg.bin, mode].append(r.counters.trans_ops)

print(f"{len(configs)} configurations of tak, mean trans_ops per bin")
print("bin      g         mc        mv")
for b in sorted({b for b, _ in table}):
    cells = [sum(table[b, m]) / len(table[b, m]) for m in ("g", "mc", "mv")]
    print(f"{b:3d}" + "".join(f"{c:10.0f}" for c in cells))
