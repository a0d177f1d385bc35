"""Backend selection for the hot simulation loops.

Prefers the compiled extension ``jumplab._core`` and falls back to the
pure-Python mirror ``jumplab._fallback`` when the extension is not
built.  Both expose the same functions and produce bit-identical
results for identical inputs; ``benchmarks/bench_backends.py`` compares
their throughput.
"""

try:
    from . import _core as _impl

    BACKEND = "compiled"
except ImportError:  # pragma: no cover - build-environment dependent
    from . import _fallback as _impl

    BACKEND = "python"

run_events = _impl.run_events
run_events_lattice = _impl.run_events_lattice
phi_sum_candidates = _impl.phi_sum_candidates
pair_energy = _impl.pair_energy
cell_insert = _impl.cell_insert
cell_remove = _impl.cell_remove


def backend_name():
    return BACKEND
