"""Same program, three heap semantics.

A reference created at type ? is viewed as ref[bool] after holding an int.
G and MC check each access through a proxy. MV refines the cell itself,
so the int already stored and the bool view collide at the ascription.
The second program shows the closure side: MC and MV refine the shared
function, so a later call at bool fails.
"""

from pathlib import Path

from evgrad import CompileOptions, run_source

HERE = Path(__file__).parent

for name in ("heap_modes.gtp", "identity.gtp"):
    source = (HERE / name).read_text()
    print(f"== {name}")
    print(source)
    for mode in ("g", "mc", "mv"):
        r = run_source(source, CompileOptions(mode))
        result = r.shown_value() if r.ok else f"{type(r.error).__name__}: {r.error}"
        print(f"  {mode:2}  output={r.output}  result={result}")
        print(f"      proxies={r.counters.proxy_allocs} trans={r.counters.trans_ops}")
    print()
