"""Benchmark: compiled stepper vs the numpy fallback.

Times the dominant kernels of the pipeline (forward solve, adjoint solve,
and a full loss gradient) on a representative 20-cell design problem, by
invoking each backend implementation directly. Run from the repository root:

    python3 benchmarks/bench_stepper.py [--repeats N]
"""

import argparse
import time

import numpy as np

from tumblekit import _stepper_py
from tumblekit.config import DesignSection
from tumblekit.experiments import design_scene

try:
    from tumblekit import _stepper

    BACKENDS = {"compiled": _stepper, "python": _stepper_py}
except ImportError:
    print("compiled stepper not built; benchmarking the python backend only")
    BACKENDS = {"python": _stepper_py}


def build_problem():
    section = DesignSection(
        cells=20, interval=(0.0, 1.0), c_k=1.0, shape_c=8.0, nodes_per_halfwidth=8
    )
    truth = 0.5 + 0.3 * np.sin(2 * np.pi * np.arange(40) / 40.0)
    scene, _ = design_scene(section, truth)
    return scene


def time_solves(impl, scene, repeats):
    k1, k2 = scene.truth.node_rates(scene.grid)
    n = scene.grid.n_points
    n_steps = scene.tgrid.n_steps
    lam = scene.tgrid.dt / scene.grid.dx
    traj = np.empty((n_steps + 1, 2, n))
    best = float("inf")
    for _ in range(repeats):
        traj[0] = scene.phi.stack()
        t0 = time.perf_counter()
        impl.run_transport(traj, k1, k2, k2, k1, lam, scene.tgrid.dt, 1)
        best = min(best, time.perf_counter() - t0)
    return best


def time_gradient(backend_name, scene, repeats):
    import importlib
    import os
    import subprocess
    import sys

    # the backend is chosen at import time, so time it in a fresh process
    code = (
        "import time, numpy as np\n"
        "from tumblekit.config import DesignSection\n"
        "from tumblekit.experiments import design_scene\n"
        "from tumblekit.calculus import loss_and_gradient\n"
        "section = DesignSection(cells=20, interval=(0.0, 1.0), c_k=1.0,"
        " shape_c=8.0, nodes_per_halfwidth=8)\n"
        "truth = 0.5 + 0.3*np.sin(2*np.pi*np.arange(40)/40.0)\n"
        "scene, _ = design_scene(section, truth)\n"
        "k = scene.kernel(truth * 1.2)\n"
        "args = (k, scene.phi, scene.measurements, scene.data, scene.grid,"
        " scene.tgrid)\n"
        "loss_and_gradient(*args)\n"  # warm-up (also synthesizes the data)
        f"best = min((lambda: (lambda t0: (loss_and_gradient(*args),"
        f" time.perf_counter()-t0)[1])(time.perf_counter()))()"
        f" for _ in range({repeats}))\n"
        "print(best)\n"
    )
    env = dict(os.environ, TUMBLEKIT_BACKEND=backend_name)
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True,
        check=True,
    )
    return float(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    scene = build_problem()
    node_updates = scene.tgrid.n_steps * 2 * scene.grid.n_points
    print(
        f"problem: {scene.grid.n_points} nodes x {scene.tgrid.n_steps} steps "
        f"({node_updates / 1e6:.2f}M node updates per solve)\n"
    )
    print(f"{'kernel':<22}{'backend':<12}{'best time':>12}{'updates/s':>14}")
    solve_times = {}
    for name, impl in BACKENDS.items():
        t = time_solves(impl, scene, args.repeats)
        solve_times[name] = t
        print(f"{'forward solve':<22}{name:<12}{t * 1e3:>10.2f}ms{node_updates / t / 1e6:>12.1f}M")
    for name in BACKENDS:
        t = time_gradient(name, scene, args.repeats)
        print(f"{'loss gradient':<22}{name:<12}{t * 1e3:>10.2f}ms{'':>12}")
    if len(solve_times) == 2:
        speedup = solve_times["python"] / solve_times["compiled"]
        print(f"\ncompiled stepper speedup over numpy fallback: {speedup:.1f}x")


if __name__ == "__main__":
    main()
