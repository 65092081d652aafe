"""Compare the numba and numpy column kernels.

    python3 benchmarks/bench_kernels.py [--nx 256] [--ny 1025] [--repeat 20]

Prints the best wall time per call for each backend, the speed-up, and the
max abs difference between the two outputs.
"""

import argparse
import timeit

import numpy as np

from rayleigh_watch import _backend, _kernels as K


def _fields(nx, ny):
    x = np.arange(nx)[:, None] / nx
    y = np.linspace(0.0, 1.0, ny)[None, :]
    dy = 1.0 / (ny - 1)
    w = 2.0 * y - np.sin(2.0 * np.pi * x - y)
    F = y + 0.1 * np.sin(2 * np.pi * x) * y * (1 - y)       # strictly increasing in y
    dF = 1.0 + 0.1 * np.sin(2 * np.pi * x) * (1 - 2 * y)
    levels = np.linspace(0.0, 1.0, ny)
    pts = np.broadcast_to(np.linspace(0.0, 1.0, ny)[None, :] * 0.999, (nx, ny)).copy()
    return dy, w, F, dF, levels, pts


def cases(nx, ny):
    dy, w, F, dF, levels, pts = _fields(nx, ny)
    return {
        "cumtrapz": (lambda f: f(w, dy, True), K._np_cumtrapz, getattr(K, "_nb_cumtrapz", None)),
        "ddy_fd4": (lambda f: f(w, dy), K._np_ddy_fd4, getattr(K, "_nb_ddy_fd4", None)),
        "hermite_invert": (lambda f: f(F, dF, levels, dy)[0], K._np_hermite_invert,
                           getattr(K, "_nb_hermite_invert", None)),
        "hermite_eval": (lambda f: f(F, dF, pts, dy)[0], K._np_hermite_eval,
                         getattr(K, "_nb_hermite_eval", None)),
    }


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nx", type=int, default=256)
    ap.add_argument("--ny", type=int, default=1025)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    threads = _backend.configure_threads()
    print(f"grid {args.nx}x{args.ny}, numba threads {threads}")
    print(f"{'kernel':<16}{'numpy ms':>11}{'numba ms':>11}{'speed-up':>10}{'max diff':>11}")
    for name, (call, f_np, f_nb) in cases(args.nx, args.ny).items():
        t_np = best_time(lambda: call(f_np), args.repeat)
        if f_nb is None:
            print(f"{name:<16}{t_np * 1e3:>11.3f}{'n/a':>11}")
            continue
        call(f_nb)  # compile outside the timing
        t_nb = best_time(lambda: call(f_nb), args.repeat)
        diff = float(np.max(np.abs(call(f_np) - call(f_nb))))
        print(f"{name:<16}{t_np * 1e3:>11.3f}{t_nb * 1e3:>11.3f}{t_np / t_nb:>10.1f}{diff:>11.2e}")


if __name__ == "__main__":
    main()
