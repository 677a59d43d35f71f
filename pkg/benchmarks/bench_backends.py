"""Timing comparison of the pure-Python and compiled stepping loops.

Run as:  python3 benchmarks/bench_backends.py [--tmax T]

Each row times one (system, scheme) pair on both backends for the same
trajectory and reports the speedup.  Workloads are sized so the python
side finishes in seconds; the compiled side is typically 100-1000x
faster, which is what makes the t=1e4 drift experiments practical.
"""

import argparse
import time
import warnings

from oscint import HAVE_KERNELS, baselines, hj_matrix, hj_pendulum, hj_scalar, systems
from oscint.core import IntegratorConfig
from oscint.hj_pendulum import pendulum_initial_state


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    rec = fn(*args, **kw)
    return time.perf_counter() - t0, rec


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--tmax", type=float, default=5.0,
                    help="horizon for the hj cases (baselines use shorter)")
    args = ap.parse_args()

    if not HAVE_KERNELS:
        print("compiled kernels unavailable; nothing to compare")
        return

    warnings.simplefilter("ignore")
    eps = 1e-3
    fpu = systems.fpu_modified()
    st_fpu = systems.fpu_initial_state(eps)
    cfg_fpu = IntegratorConfig(eps=eps, h=5e-3)

    eq = 1.0 / 70.0
    q3 = systems.quartic_multi(3)
    st_q3 = systems.quartic_initial_state(q3, eq)
    cfg_q3 = IntegratorConfig(eps=eq, h=10 * eq)

    ep = 2e-3
    pend = systems.elastic_pendulum()
    st_p = pendulum_initial_state(ep)
    cfg_p = IntegratorConfig(eps=ep, h=0.02)

    t = args.tmax
    cases = [
        ("fpu/hj", hj_scalar.run, (st_fpu, fpu, cfg_fpu, t), {"scheme": "hj"}),
        ("fpu/hj-noloop", hj_scalar.run, (st_fpu, fpu, cfg_fpu, t),
         {"scheme": "hj-noloop"}),
        ("quartic3/symmetric", hj_matrix.run, (st_q3, q3, cfg_q3, 4 * t),
         {"scheme": "symmetric"}),
        ("pendulum/hj-symmetric", hj_pendulum.run, (st_p, pend, cfg_p, 4 * t),
         {"scheme": "hj-symmetric"}),
        ("fpu/verlet dt=eps/50", baselines.run,
         (st_fpu, fpu, IntegratorConfig(eps=eps, h=eps / 50), 0.2 * t),
         {"scheme": "verlet"}),
        ("fpu/mollify h=2eps", baselines.run,
         (st_fpu, fpu, IntegratorConfig(eps=eps, h=2 * eps), 0.4 * t),
         {"scheme": "mollify"}),
    ]

    print("%-24s %10s %12s %12s %9s" % ("case", "steps", "python", "compiled",
                                        "speedup"))
    for name, fn, a, kw in cases:
        tp, rp = timed(fn, *a, backend="python", **kw)
        tc, rc = timed(fn, *a, backend="compiled", **kw)
        if rp.slow_gradient_calls != rc.slow_gradient_calls:
            raise AssertionError("%s: call counts differ between backends"
                                 % name)
        print("%-24s %10d %10.3fs %10.3fs %8.1fx"
              % (name, rp.n_steps, tp, tc, tp / tc))


if __name__ == "__main__":
    main()
