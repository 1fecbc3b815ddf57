"""Backend benchmark: the same workload on the numba and numpy paths."""
from __future__ import annotations

import time
from dataclasses import dataclass

from ._kernels import HAVE_NUMBA
from .config import SimConfig
from .engine import run_simulation


@dataclass
class BenchResult:
    n_agents: int
    n_steps: int
    seed: int
    seconds: dict[str, float]
    outputs_match: bool

    def report(self) -> str:
        lines = [
            f"workload: {self.n_agents} agents, {self.n_steps} steps, seed {self.seed}",
        ]
        for backend, seconds in self.seconds.items():
            per_step = seconds / self.n_steps * 1e6
            lines.append(
                f"  {backend:<6} {seconds:8.3f} s total  {per_step:10.1f} us/step"
            )
        if "numba" in self.seconds and "numpy" in self.seconds:
            speedup = self.seconds["numpy"] / self.seconds["numba"]
            lines.append(f"  speedup (numpy/numba): {speedup:.1f}x")
        lines.append(
            "  outputs: "
            + ("bit-identical across backends" if self.outputs_match else "MISMATCH")
        )
        return "\n".join(lines)


def run_benchmark(
    n_agents: int = 100, n_steps: int = 300, seed: int = 0, repeats: int = 3
) -> BenchResult:
    """Time run_simulation per backend (best of `repeats`, after a warm-up
    that also absorbs jit compilation) and check the outputs agree exactly."""
    config = SimConfig(n_agents_initial=n_agents, n_steps=n_steps, snapshot_step=0)
    backends = ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]
    seconds: dict[str, float] = {}
    results = {}
    for backend in backends:
        results[backend] = run_simulation(config, seed, backend=backend)  # warm-up
        best = float("inf")
        for _ in range(repeats):
            start = time.perf_counter()
            run_simulation(config, seed, backend=backend)
            best = min(best, time.perf_counter() - start)
        seconds[backend] = best
    first = results[backends[0]]
    outputs_match = all(
        results[b].step_series == first.step_series
        and results[b].snapshots == first.snapshots
        for b in backends
    )
    return BenchResult(
        n_agents=n_agents,
        n_steps=n_steps,
        seed=seed,
        seconds=seconds,
        outputs_match=outputs_match,
    )
