"""Experiment harness: drift runs, resonance scans, action-exchange
comparisons and cost/accuracy sweeps, all emitting deterministic CSV.

Output format, common to every subcommand:
  line 1   "# meta: ..." comment carrying the resolved parameters
  line 2   header row
  rest     data rows, comma separated, LF endings, repr() floats
Floats round-trip at full double precision.  Nothing wall-clock-dependent
goes into the file, so reruns with identical flags are byte-identical.
"""

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import baselines, hj_matrix, hj_pendulum, hj_scalar, systems
from .core import IntegratorConfig
from .hj_pendulum import pendulum_initial_state

SYSTEMS = ("fpu", "quartic3", "quartic4", "pendulum")
INTEGRATORS = ("hj", "hj-noloop", "hj-symmetric", "verlet", "impulse", "mollify")

# which integrators make sense where; hj-noloop needs the scalar frequency
# path, hj-symmetric needs an adjoint (matrix and pendulum steppers only),
# and the averaged kicks of impulse/mollify assume a two-block system
_COMPAT = {
    "fpu": ("hj", "hj-noloop", "verlet", "impulse", "mollify"),
    "quartic3": ("hj", "hj-symmetric", "verlet", "impulse", "mollify"),
    "quartic4": ("hj", "hj-symmetric", "verlet", "impulse", "mollify"),
    "pendulum": ("hj", "hj-symmetric", "verlet"),
}

_SCAN_PARAMS = ("h", "eps", "h_over_eps", "h_over_pi_eps")


def _build_system(name):
    if name == "fpu":
        return systems.fpu_modified()
    if name == "quartic3":
        return systems.quartic_multi(3)
    if name == "quartic4":
        return systems.quartic_multi(4)
    if name == "pendulum":
        return systems.elastic_pendulum()
    raise ValueError("unknown system %r" % (name,))


def _initial_state(name, sys_obj, eps):
    if name == "fpu":
        return systems.fpu_initial_state(eps)
    if name == "pendulum":
        return pendulum_initial_state(eps)
    return systems.quartic_initial_state(sys_obj, eps)


def _action_names(name):
    if name == "fpu":
        return ["I1", "I2", "I3"]
    if name == "quartic3":
        return ["I1", "I2", "I3"]
    if name == "quartic4":
        return ["I1", "I2", "I3", "I4"]
    return ["I"]  # pendulum: single fast mode


def _drift_columns(name):
    cols = ["H", "I"]
    if name != "pendulum":
        cols += _action_names(name)
    if name in ("quartic3", "quartic4"):
        cols.append("I_sqrt2")
    return cols


def _run_single(system_name, integrator, eps, h, t_max, sample_every,
                inner_dt, backend):
    """One trajectory; returns the RunRecord."""
    sys_obj = _build_system(system_name)
    state0 = _initial_state(system_name, sys_obj, eps)
    cfg = IntegratorConfig(eps=eps, h=h)
    if integrator in ("verlet", "impulse", "mollify"):
        return baselines.run(state0, sys_obj, cfg, t_max, scheme=integrator,
                             inner_dt=inner_dt, sample_every=sample_every,
                             backend=backend)
    if system_name == "fpu":
        return hj_scalar.run(state0, sys_obj, cfg, t_max, scheme=integrator,
                             sample_every=sample_every, backend=backend)
    if system_name == "pendulum":
        return hj_pendulum.run(state0, sys_obj, cfg, t_max, scheme=integrator,
                               sample_every=sample_every, backend=backend)
    scheme = "symmetric" if integrator == "hj-symmetric" else "forward"
    return hj_matrix.run(state0, sys_obj, cfg, t_max, scheme=scheme,
                         sample_every=sample_every, backend=backend)


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_csv(path, meta, header, rows):
    # rows are fully materialized before the file is opened, so a failed
    # experiment never leaves a partial file behind
    with open(path, "w", newline="") as f:
        f.write(meta + "\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _meta(args, **extra):
    parts = ["cmd=%s" % args.cmd,
             "system=%s" % args.system,
             "integrator=%s" % args.integrator,
             "eps=%s" % repr(float(args.eps)),
             "h=%s" % ("none" if args.h is None else repr(float(args.h))),
             "tmax=%s" % repr(float(args.tmax)),
             "sample_every=%s" % ("auto" if args.sample_every is None
                                  else str(args.sample_every)),
             "inner_dt=%s" % ("auto" if args.inner_dt is None
                              else repr(float(args.inner_dt))),
             "scan=%s" % (args.scan or "none"),
             "reference=%d" % int(args.reference),
             "backend=%s" % args.backend]
    for k, v in extra.items():
        parts.append("%s=%s" % (k, v))
    return "# meta: " + " ".join(parts)


def _parse_scan(text):
    bits = text.split(":")
    if len(bits) != 4:
        raise ValueError("--scan wants param:min:max:points, got %r" % (text,))
    param, lo, hi, n = bits[0], float(bits[1]), float(bits[2]), int(bits[3])
    if param not in _SCAN_PARAMS:
        raise ValueError("scan parameter must be one of %s" %
                         (", ".join(_SCAN_PARAMS),))
    if n < 1:
        raise ValueError("scan needs at least one point")
    if n == 1:
        values = np.array([lo])
    else:
        values = np.linspace(lo, hi, n)
    return param, values


def _scan_point_params(param, value, args):
    """Resolve (eps, h) for one scan point."""
    if param == "h":
        return args.eps, value
    if param == "eps":
        return value, args.h
    if param == "h_over_eps":
        return args.eps, value * args.eps
    # h_over_pi_eps: h fixed, eps = h / (pi * value)
    return args.h / (math.pi * value), args.h


def _n_workers(n_points):
    w = os.cpu_count() or 1
    cap = os.environ.get("OSCINT_THREADS")
    if cap:
        w = min(w, max(1, int(cap)))
    return max(1, min(w, n_points))


def cmd_drift(args):
    rec = _run_single(args.system, args.integrator, args.eps, args.h,
                      args.tmax, args.sample_every, args.inner_dt,
                      args.backend)
    cols = _drift_columns(args.system)
    rows = []
    for i, t in enumerate(rec.times):
        rows.append([t] + [rec.observables[c][i] for c in cols])
    _write_csv(args.out, _meta(args, n_steps=rec.n_steps,
                               slow_gradient_calls=rec.slow_gradient_calls),
               ["t"] + cols, rows)
    return 0


def _point_metrics(args, eps, h):
    rec = _run_single(args.system, args.integrator, eps, h, args.tmax,
                      args.sample_every, args.inner_dt, args.backend)
    met = systems.max_metrics(rec)
    extras = []
    if args.system in ("quartic3", "quartic4"):
        extras.append(met["I_sqrt2"].rel_dev)
    row = [met["H"].rel_dev, met["I"].rel_dev] + extras
    if args.reference:
        dt = eps / 100.0 if args.inner_dt is None else args.inner_dt
        ref = _run_single(args.system, "verlet", eps, dt, args.tmax,
                          args.sample_every, None, args.backend)
        row.append(systems.max_metrics(ref)["I"].rel_dev)
    return row, rec.slow_gradient_calls


def cmd_scan(args):
    param, values = _parse_scan(args.scan)
    header = ["scan_value", "max_err_H", "max_var_I"]
    if args.system in ("quartic3", "quartic4"):
        header.append("max_var_I_sqrt2")
    if args.reference:
        header.append("max_var_I_verlet")
    header.append("diverged")
    width = len(header) - 2  # metric columns between scan_value and diverged

    def one(value):
        eps, h = _scan_point_params(param, float(value), args)
        try:
            row, _ = _point_metrics(args, eps, h)
            return [float(value)] + row + [0]
        except Exception as exc:
            sys.stderr.write("scan point %s=%s failed: %s\n"
                             % (param, repr(float(value)), exc))
            return [float(value)] + [math.nan] * width + [1]

    with ThreadPoolExecutor(max_workers=_n_workers(len(values))) as pool:
        rows = list(pool.map(one, values))
    _write_csv(args.out, _meta(args, scan_param=param), header, rows)
    return 0 if all(r[-1] == 0 for r in rows) else 1


def cmd_exchange(args):
    if args.integrator not in ("hj", "hj-noloop", "hj-symmetric"):
        sys.stderr.write("exchange compares an hj-family integrator against "
                         "a Verlet reference; got %r\n" % (args.integrator,))
        return 2
    rec = _run_single(args.system, args.integrator, args.eps, args.h,
                      args.tmax, args.sample_every, args.inner_dt,
                      args.backend)
    # reference step: eps/100 shrunk so that an integer number of substeps
    # tiles one macro step and the sample grids coincide
    dt0 = args.eps / 100.0 if args.inner_dt is None else args.inner_dt
    m = max(1, math.ceil(args.h / dt0 - 1e-9))
    dt = args.h / m
    se = args.sample_every
    if se is None:
        se = max(1, int(args.tmax / (2000.0 * args.h)))
    ref = _run_single(args.system, "verlet", args.eps, dt, args.tmax,
                      m * se, None, args.backend)
    if len(ref.times) != len(rec.times):
        raise RuntimeError("sample grids diverged: %d vs %d rows"
                           % (len(rec.times), len(ref.times)))
    names = _action_names(args.system)
    header = (["t"] + ["%s_hj" % a for a in names]
              + ["%s_verlet" % a for a in names])
    rows = []
    for i, t in enumerate(rec.times):
        rows.append([t] + [rec.observables[a][i] for a in names]
                    + [ref.observables[a][i] for a in names])
    _write_csv(args.out, _meta(args, ref_dt=repr(dt), ref_substeps=m),
               header, rows)
    return 0


def cmd_efficiency(args):
    if not args.scan:
        sys.stderr.write("efficiency needs --scan h:min:max:points\n")
        return 2
    param, values = _parse_scan(args.scan)
    if param != "h":
        sys.stderr.write("efficiency sweeps h only\n")
        return 2
    header = ["h", "slow_gradient_calls", "max_err_H", "diverged"]

    def one(value):
        try:
            row, calls = _point_metrics(args, args.eps, float(value))
            return [float(value), calls, row[0], 0]
        except Exception as exc:
            sys.stderr.write("efficiency point h=%s failed: %s\n"
                             % (repr(float(value)), exc))
            return [float(value), 0, math.nan, 1]

    with ThreadPoolExecutor(max_workers=_n_workers(len(values))) as pool:
        rows = list(pool.map(one, values))
    _write_csv(args.out, _meta(args, scan_param=param), header, rows)
    return 0 if all(r[-1] == 0 for r in rows) else 1


def build_parser():
    p = argparse.ArgumentParser(
        prog="oscint",
        description="integrators for highly oscillatory Hamiltonian systems")
    sub = p.add_subparsers(dest="cmd", required=True)
    for name, fn in (("drift", cmd_drift), ("scan", cmd_scan),
                     ("exchange", cmd_exchange), ("efficiency", cmd_efficiency)):
        q = sub.add_parser(name)
        q.set_defaults(fn=fn)
        q.add_argument("--system", required=True, choices=SYSTEMS)
        q.add_argument("--integrator", default="hj", choices=INTEGRATORS)
        q.add_argument("--eps", type=float, default=1e-3)
        q.add_argument("--h", type=float, default=None)
        q.add_argument("--tmax", type=float, default=1e4)
        q.add_argument("--sample-every", type=int, default=None,
                       help="record every N macro steps (default: ~2000 rows)")
        q.add_argument("--scan", default=None,
                       help="param:min:max:points with param in "
                            + ",".join(_SCAN_PARAMS))
        q.add_argument("--inner-dt", type=float, default=None,
                       help="substep for impulse/mollify and the Verlet "
                            "reference (default eps/100)")
        q.add_argument("--reference", action="store_true",
                       help="scan only: add a Verlet max_var_I column")
        q.add_argument("--backend", default="auto",
                       choices=("auto", "python", "compiled"))
        q.add_argument("--out", required=True)
    return p


def main(argv=None):
    p = build_parser()
    args = p.parse_args(argv)
    if args.integrator not in _COMPAT[args.system]:
        p.error("integrator %r not available for system %r (choices: %s)"
                % (args.integrator, args.system,
                   ", ".join(_COMPAT[args.system])))
    needs_h = True
    if args.cmd in ("scan", "efficiency") and args.scan:
        param = args.scan.split(":", 1)[0]
        if param in ("h", "h_over_eps"):
            needs_h = False
    if args.cmd == "scan" and not args.scan:
        p.error("scan needs --scan param:min:max:points")
    if needs_h and args.h is None:
        p.error("--h is required here")
    try:
        return args.fn(args)
    except Exception as exc:
        sys.stderr.write("oscint %s failed: %s\n" % (args.cmd, exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
