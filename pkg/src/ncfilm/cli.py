"""Command-line front end.

Subcommands map one-to-one onto the library modules:

  uniform     flat-state roots, their k = 0 stability, critical lengths
  dispersion  growth rate of mode k on a periodic domain, per flat state
  steady2     one zero-pressure (or fixed-offset) periodic state; sweeps
  steady4     one nonconstant-pressure steady state located by onset walk
  continue    pseudo-arclength continuation of a fourth-order branch
  floquet     multiplier scan of the closure problem along a domain sweep
  spectrum    eigenvalues of the linearized operator; parameter tracking
  evolve      time integration with event detection and trace artifacts
  similarity  self-similar collapse profile and its trough height
  figure      canned data pipelines for the fifteen catalogued figures

Conventions shared by every subcommand:

  * artifacts land in --out (default ./out); each invocation writes
    exactly one manifest JSON naming all CSV/JSON files it produced;
  * floats in CSV/JSON carry 17 significant digits;
  * parameter precedence is flags > --config JSON > built-in defaults
    (pbar 0.05, gamma 0.05, L 50, N 256);
  * exit 0 on success; solver failures exit 1 after printing a one-line
    machine-readable error JSON; usage errors exit 2 with usage text.

CSV schemas (columns in order):

  dispersion.csv   branch, k, wavelength, rate
  profile_*.csv    x, h, p
  branch_*.csv     param, mean, h_min, h_max, p_min, p_max, amplitude, p_norm
  floquet.csv      L, re_rho1..4, im_rho1..4, closure_product, admissible
  spectrum.csv     index, re, im
  modes.csv        x, re_psi_<i>, im_psi_<i> ...
  track.csv        param, re_1, im_1, ..., re_m, im_m
  trace.csv        t, mean, h_min, h_max, mass, energy, mean_p
  snapshot_k.csv   x, h
  similarity.csv   eta, H, dH
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import figures, io, similarity, steady2, steady4, uniform
from . import evolve as ev
from . import floquet as fl
from . import spectrum as sp
from .model import ConvergenceError, GridFunction, ModelParams, PositivityError, grid

DEFAULTS = {"pbar": 0.05, "gamma": 0.05, "L": 50.0, "N": 256}


def _resolve(args, config: dict, key: str, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        return type(default)(config[key]) if default is not None else config[key]
    return default


def _params(args, config: dict, **overrides) -> ModelParams:
    vals = {k: _resolve(args, config, k, v) for k, v in DEFAULTS.items()}
    vals.update(overrides)
    scheme = getattr(args, "scheme", None) or config.get("scheme", "spectral")
    return ModelParams(
        pbar=float(vals["pbar"]),
        gamma=float(vals["gamma"]),
        L=float(vals["L"]),
        N=int(vals["N"]),
        scheme=scheme,
    )


def _span(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}")
    lo, hi = map(float, parts)
    return lo, hi


def _gridspec(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected lo:hi:n, got {text!r}")
    return float(parts[0]), float(parts[1]), int(parts[2])


def _perturb(text: str) -> tuple[int, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected index:delta, got {text!r}")
    return int(parts[0]), float(parts[1])


def _branch_rows(branch):
    for q in branch.points:
        yield (q.param, q.mean, q.h_min, q.h_max, q.p_min, q.p_max, q.amplitude, q.p_norm)


BRANCH_HEADER = ["param", "mean", "h_min", "h_max", "p_min", "p_max", "amplitude", "p_norm"]


def _annotation_list(branch):
    return [
        {"kind": a.kind, "param_value": a.param_value, "detail": a.detail}
        for a in branch.annotations
    ]


# ---------------------------------------------------------------------------
# subcommand handlers; each receives (args, config, writer) and returns a
# JSON-able summary printed to stdout


def cmd_uniform(args, config, w: io.ArtifactWriter):
    params = _params(args, config)
    states = uniform.uniform_states(params.pbar)
    lengths = uniform.critical_lengths(params)
    payload = {
        "pbar": params.pbar,
        "gamma": params.gamma,
        "roots": [
            {
                "value": s.value,
                "branch": s.branch,
                "pi_prime": s.pi_prime,
                "stable_k0": s.stable_k0,
            }
            for s in states
        ],
        "critical_lengths": {
            "ell_minus_gamma": lengths.ell_minus_gamma,
            "ell_plus_gamma": lengths.ell_plus_gamma,
            "ell_plus_p": lengths.ell_plus_p,
        },
        "gamma_transcritical": uniform.gamma_transcritical_threshold(params.pbar),
    }
    w.json("uniform.json", payload)
    return payload


def cmd_dispersion(args, config, w: io.ArtifactWriter):
    params = _params(args, config)
    kmax = args.kmax
    rows = []
    summary = {}
    for state in uniform.uniform_states(params.pbar):
        if args.branch != "both" and state.branch != args.branch:
            continue
        for k in range(1, kmax + 1):
            rate = uniform.dispersion(k, state, params)
            rows.append((state.branch, k, params.L / k, rate))
        summary[state.branch] = {
            "value": state.value,
            "k1_rate": uniform.dispersion(1, state, params),
        }
    w.csv("dispersion.csv", ["branch", "k", "wavelength", "rate"], rows)
    return {"L": params.L, "gamma": params.gamma, "states": summary}


def cmd_steady2(args, config, w: io.ArtifactWriter):
    params = _params(args, config)
    if args.sweep_L is not None:
        lo, hi, n = args.sweep_L
        branch = steady2.mean_branch((lo, hi), args.k, params.pbar, n_points=n)
        w.csv("branch_second.csv", BRANCH_HEADER, _branch_rows(branch))
        w.event("annotations", _annotation_list(branch))
        return {"points": len(branch.points), "parameter": branch.parameter}
    if args.sweep_P0 is not None:
        branch = steady2.constant_pressure_branch(params.L, params.pbar, args.sweep_P0)
        w.csv("branch_constant_pressure.csv", BRANCH_HEADER, _branch_rows(branch))
        w.event("annotations", _annotation_list(branch))
        return {"points": len(branch.points), "parameter": branch.parameter}
    prof = steady2.solve_second_order(params.L, args.k, params, P0=args.P0)
    x = grid(params.L, params.N)
    w.csv("profile_steady2.csv", ["x", "h", "p"], zip(x, prof.h.values, prof.pressure.values))
    return {
        "L": params.L,
        "k_periods": prof.k_periods,
        "P0": prof.p0,
        "mean": prof.mean,
        "h_min": float(prof.h.values.min()),
        "h_max": float(prof.h.values.max()),
        "residual": prof.residual,
        "order": prof.order,
    }


def cmd_steady4(args, config, w: io.ArtifactWriter):
    params = _params(args, config)
    prof = steady4.fourth_state_at(params.L, params, branch=args.branch, k=args.k)
    x = grid(params.L, params.N)
    w.csv("profile_steady4.csv", ["x", "h", "p"], zip(x, prof.h.values, prof.pressure.values))
    return {
        "L": params.L,
        "gamma": params.gamma,
        "mean": prof.mean,
        "h_min": float(prof.h.values.min()),
        "h_max": float(prof.h.values.max()),
        "p_min": float(prof.pressure.values.min()),
        "p_max": float(prof.pressure.values.max()),
        "residual": prof.residual,
        "order": prof.order,
    }


def cmd_continue(args, config, w: io.ArtifactWriter):
    params = _params(args, config)
    seed = steady4.fourth_state_at(params.L, params, branch=args.branch, k=args.k)
    branch = steady4.continue_branch(seed, args.param, args.range)
    w.csv("branch_fourth.csv", BRANCH_HEADER, _branch_rows(branch))
    ann = _annotation_list(branch)
    w.event("annotations", ann)
    w.event("truncated", branch.truncated)
    return {
        "parameter": branch.parameter,
        "points": len(branch.points),
        "annotations": ann,
        "truncated": branch.truncated,
    }


def cmd_floquet(args, config, w: io.ArtifactWriter):
    params = _params(args, config)
    lo, hi, n = args.sweep_L
    rows = []
    for L in np.linspace(lo, hi, n):
        base = steady2.solve_second_order(float(L), args.k, params.with_(L=float(L)))
        mono = fl.monodromy4(base)
        rho = np.asarray(mono.multipliers4)
        admissible = bool(abs(mono.product) < args.closure_tol)
        rows.append(
            (
                L,
                *[v for r in rho for v in (r.real, r.imag)],
                mono.product,
                admissible,
            )
        )
    header = (
        ["L"]
        + [f"{part}_rho{i}" for i in (1, 2, 3, 4) for part in ("re", "im")]
        + ["closure_product", "admissible"]
    )
    w.csv("floquet.csv", header, rows)
    found = fl.secondary_bifurcation_scan(params.pbar, params.gamma, args.k, (lo, hi))
    hits = [{"L": b.L, "rho_gap": b.rho_gap, "product": b.product, "located_by": b.located_by} for b in found]
    w.event("secondary_bifurcations", hits)
    return {"gamma": params.gamma, "k": args.k, "secondary_bifurcations": hits}


def _base_profile(kind: str, params: ModelParams, k: int, branch: str):
    if kind == "uniform":
        states = {s.branch: s for s in uniform.uniform_states(params.pbar)}
        return steady2.as_profile(states[branch], params)
    if kind == "steady2":
        return steady2.solve_second_order(params.L, k, params)
    if kind == "steady4":
        return steady4.fourth_state_at(params.L, params, branch=branch, k=k)
    raise ValueError(f"unknown base kind {kind!r}")


def cmd_spectrum(args, config, w: io.ArtifactWriter):
    params = _params(args, config)
    if args.track is not None:
        if args.range is None or args.step is None:
            raise ValueError("--track requires both --range LO:HI and --step")
        lo, hi = args.range
        cache: dict = {"prof": None}

        def family(value: float):
            pp = params.with_(**{args.track: float(value)})
            if args.base == "steady4" and cache["prof"] is not None:
                try:
                    prof = steady4.solve_fourth_order(cache["prof"], pp)
                except ConvergenceError:
                    prof = _base_profile(args.base, pp, args.k, args.branch)
            elif args.base == "steady2" or (args.base == "steady4" and cache["prof"] is None):
                second = steady2.solve_second_order(pp.L, args.k, pp)
                prof = second if args.base == "steady2" else steady4.solve_fourth_order(second, pp)
            else:
                prof = _base_profile(args.base, pp, args.k, args.branch)
            cache["prof"] = prof
            return prof

        track = sp.track_eigenvalues(family, args.track, (lo, hi), args.step, params, n_track=args.n_eigs or 8)
        m = track.curves.shape[1]
        header = ["param"] + [f"{part}_{j + 1}" for j in range(m) for part in ("re", "im")]
        rows = [
            (p, *[v for lam in row for v in (lam.real, lam.imag)])
            for p, row in zip(track.param, track.curves)
        ]
        w.csv("track.csv", header, rows)
        events = [
            {
                "kind": e.kind,
                "param_value": e.param_value,
                "eigenvalue": {"re": e.eigenvalue.real, "im": e.eigenvalue.imag},
                "bracket": list(e.bracket),
            }
            for e in track.events
        ]
        w.json("track_events.json", {"parameter": args.track, "events": events})
        return {"parameter": args.track, "points": len(track.param), "events": events}

    base = _base_profile(args.base, params, args.k, args.branch)
    spec = sp.spectrum(base, params, n_eigs=args.n_eigs)
    w.csv(
        "spectrum.csv",
        ["index", "re", "im"],
        [(i, lam.real, lam.imag) for i, lam in enumerate(spec.eigenvalues)],
    )
    if args.modes and spec.eigenfunctions is not None:
        x = grid(params.L, params.N)
        m = spec.eigenfunctions.shape[1]
        header = ["x"] + [f"{part}_psi_{j}" for j in range(m) for part in ("re", "im")]
        rows = [
            (x[i], *[v for j in range(m) for v in (spec.eigenfunctions[i, j].real, spec.eigenfunctions[i, j].imag)])
            for i in range(len(x))
        ]
        w.csv("modes.csv", header, rows)
    dom = spec.dominant
    return {
        "base": args.base,
        "n_eigenvalues": len(spec.eigenvalues),
        "dominant": None if dom is None else {"re": dom.real, "im": dom.imag},
        "translational_index": spec.translational_index,
        "zero_tol": sp.zero_tol(params),
    }


def cmd_evolve(args, config, w: io.ArtifactWriter):
    params = _params(args, config)
    if args.ic == "file":
        if not args.ic_file:
            raise ValueError("--ic file requires --ic-file PATH")
        data = np.loadtxt(args.ic_file, delimiter=",", skiprows=1)
        vals = data[:, 1] if data.ndim == 2 else data
        if vals.size != params.N:
            raise ValueError(f"initial profile has {vals.size} samples, expected N = {params.N}")
        h0 = GridFunction(np.asarray(vals, float), params.L)
        w.note_input(args.ic_file)
        base_for_mode = None
    elif args.ic == "uniform":
        states = {s.branch: s for s in uniform.uniform_states(params.pbar)}
        base_for_mode = steady2.as_profile(states[args.branch], params)
        h0 = GridFunction(base_for_mode.h.values.copy(), params.L)
    else:
        base_for_mode = _base_profile(args.ic, params, args.k, args.branch)
        h0 = GridFunction(base_for_mode.h.values.copy(), params.L)

    if args.perturb is not None:
        index, delta = args.perturb
        if args.ic == "uniform":
            x = grid(params.L, params.N)
            mode = np.cos(2.0 * np.pi * index * x / params.L)
            mode /= np.sqrt(np.sum(mode * mode) * params.L / params.N)
        else:
            if base_for_mode is None:
                raise ValueError("--perturb with --ic file is not defined (no eigenbasis)")
            spec = sp.spectrum(base_for_mode, params)
            mode = ev.orient_mode(np.real(spec.eigenfunctions[:, index]), base_for_mode.h.values)
        h0 = GridFunction(h0.values + delta * mode, params.L)

    cfg = ev.EventConfig(
        rupture_floor=args.rupture_floor if args.events else None,
        converged_rate=args.converged_rate if args.events else None,
        mass_cap=args.mass_cap if args.events else None,
    )
    trace = ev.run(h0, params, args.t_end, cfg)
    w.csv(
        "trace.csv",
        ["t", "mean", "h_min", "h_max", "mass", "energy", "mean_p"],
        zip(trace.times, trace.mean, trace.h_min, trace.h_max, trace.mass, trace.energy, trace.mean_pressure),
    )
    x = grid(params.L, params.N)
    keep = args.snapshots
    n_prof = len(trace.profile_times)
    sel = range(n_prof) if n_prof <= keep else np.unique(np.linspace(0, n_prof - 1, keep).astype(int))
    for j, i in enumerate(sel):
        w.csv(f"snapshot_{j:03d}.csv", ["x", "h"], zip(x, trace.profiles[i]))
    events = [{"kind": e.kind, "time": e.time, "payload": io._jsonable(e.payload)} for e in trace.events]
    w.json("events.json", {"events": events, "t_final": float(trace.times[-1])})
    w.event("events", [e["kind"] for e in events])
    return {
        "t_final": float(trace.times[-1]),
        "h_min_final": float(trace.h_min[-1]),
        "mean_final": float(trace.mean[-1]),
        "events": events,
    }


def cmd_similarity(args, config, w: io.ArtifactWriter):
    params = _params(args, config)
    prof = similarity.rupture_profile(params.gamma, eta_max=args.eta_max)
    w.csv("similarity.csv", ["eta", "H", "dH"], zip(prof.eta_grid, prof.H_values, prof.H_prime))
    resid = similarity.ode_residual(prof)
    payload = {
        "gamma": prof.gamma,
        "H0star": prof.H0,
        "farfield_exponent": prof.farfield_exponent,
        "classification": prof.classification,
        "residual_max": float(np.max(np.abs(resid))),
        "eta_max": args.eta_max,
    }
    w.json("similarity.json", payload)
    return payload


def cmd_figure(args, config, w: io.ArtifactWriter | None):
    if args.list:
        lines = [f"{name}: {figures.FIGURES[name].description}" for name in figures.FIGURES]
        print("\n".join(lines))
        return None
    name = args.name
    if name not in figures.FIGURES:
        raise ValueError(f"unknown figure id {name!r}; valid: {', '.join(figures.FIGURES)}")
    spec = figures.FIGURES[name]
    if spec.long_running and not args.allow_long:
        raise ValueError(f"{name} runs for minutes; pass --allow-long to confirm")
    out = Path(args.out) / name
    command_line = " ".join(sys.argv[1:]) or f"figure {name}"
    written = figures.run_figure(name, out, command_line)
    return {"figure": name, "description": spec.description, "artifacts": [str(p) for p in written]}


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="ncfilm",
        description="numerical laboratory for a non-conserved thin-film equation",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, with_N=True):
        p.add_argument("--config", help="JSON file with default parameter values")
        p.add_argument("--out", default="out", help="artifact directory (default ./out)")
        p.add_argument("--pbar", type=float, default=None)
        p.add_argument("--gamma", type=float, default=None)
        p.add_argument("--L", type=float, default=None)
        if with_N:
            p.add_argument("--N", type=int, default=None)
            p.add_argument("--scheme", choices=["spectral", "fd"], default=None)

    p = sub.add_parser("uniform", help="flat states and critical lengths")
    common(p, with_N=False)
    p.set_defaults(handler=cmd_uniform)

    p = sub.add_parser("dispersion", help="growth rate of mode k for each flat state")
    common(p, with_N=False)
    p.add_argument("--branch", choices=["minus", "plus", "both"], default="both")
    p.add_argument("--kmax", type=int, default=12)
    p.set_defaults(handler=cmd_dispersion)

    p = sub.add_parser("steady2", help="zero/constant-pressure periodic states")
    common(p)
    p.add_argument("--k", type=int, default=1, help="periods in the domain")
    p.add_argument("--P0", type=float, default=0.0, help="pressure offset")
    p.add_argument("--sweep-L", type=_gridspec, default=None, metavar="LO:HI:N")
    p.add_argument("--sweep-P0", type=_span, default=None, metavar="LO:HI")
    p.set_defaults(handler=cmd_steady2)

    p = sub.add_parser("steady4", help="nonconstant-pressure steady state")
    common(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--branch", choices=["minus", "plus"], default="minus",
                   help="which flat state the onset walk starts from")
    p.set_defaults(handler=cmd_steady4)

    p = sub.add_parser("continue", help="pseudo-arclength continuation in L or gamma")
    common(p)
    p.add_argument("--param", choices=["L", "gamma"], required=True)
    p.add_argument("--range", type=_span, required=True, metavar="LO:HI")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--branch", choices=["minus", "plus"], default="minus")
    p.set_defaults(handler=cmd_continue)

    p = sub.add_parser("floquet", help="multiplier scan over a domain-length sweep")
    common(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--sweep-L", type=_gridspec, required=True, metavar="LO:HI:N")
    p.add_argument("--closure-tol", type=float, default=1e-6)
    p.set_defaults(handler=cmd_floquet)

    p = sub.add_parser("spectrum", help="linearized eigenvalues; parameter tracking")
    common(p)
    p.add_argument("--base", choices=["uniform", "steady2", "steady4"], default="steady2")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--branch", choices=["minus", "plus"], default="plus")
    p.add_argument("--n-eigs", type=int, default=None)
    p.add_argument("--modes", action="store_true", help="also write eigenfunctions")
    p.add_argument("--track", choices=["L", "gamma"], default=None)
    p.add_argument("--range", type=_span, default=None, metavar="LO:HI")
    p.add_argument("--step", type=float, default=None)
    p.set_defaults(handler=cmd_spectrum)

    p = sub.add_parser("evolve", help="time integration with events")
    common(p)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--ic", choices=["uniform", "steady2", "steady4", "file"], default="uniform")
    p.add_argument("--ic-file", default=None)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--branch", choices=["minus", "plus"], default="plus")
    p.add_argument("--perturb", type=_perturb, default=None, metavar="INDEX:DELTA",
                   help="cos harmonic for a flat start, eigenmode index otherwise")
    p.add_argument("--events", action="store_true", help="enable halting events")
    p.add_argument("--rupture-floor", type=float, default=1e-3)
    p.add_argument("--converged-rate", type=float, default=1e-9)
    p.add_argument("--mass-cap", type=float, default=None)
    p.add_argument("--snapshots", type=int, default=12, help="max snapshot CSVs")
    p.set_defaults(handler=cmd_evolve)

    p = sub.add_parser("similarity", help="self-similar collapse profile")
    common(p, with_N=False)
    p.add_argument("--eta-max", type=float, default=100.0)
    p.set_defaults(handler=cmd_similarity)

    p = sub.add_parser("figure", help="canned data pipeline for one figure id")
    p.add_argument("name", nargs="?", default=None)
    p.add_argument("--out", default="out")
    p.add_argument("--allow-long", action="store_true")
    p.add_argument("--list", action="store_true", help="print the figure map and exit")
    p.set_defaults(handler=cmd_figure)

    return top


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = io.load_config(getattr(args, "config", None))
    except (OSError, ValueError) as exc:
        parser.error(str(exc))  # exits 2

    if args.command == "figure":
        if not args.list and args.name is None:
            parser.error("figure requires a figure id (or --list)")
        try:
            summary = cmd_figure(args, config, None)
        except (ConvergenceError, PositivityError, ValueError, FileNotFoundError) as exc:
            print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
            return 1
        if summary is not None:
            print(json.dumps(io._jsonable(summary), indent=2))
        return 0

    command_line = " ".join(sys.argv[1:]) if argv is None else " ".join(argv)
    out_dir = Path(args.out) / args.command
    try:
        params = _params(args, config)
    except (ValueError, TypeError) as exc:
        parser.error(str(exc))

    writer = io.ArtifactWriter(out_dir, args.command, command_line, params)
    try:
        summary = args.handler(args, config, writer)
    except (ConvergenceError, PositivityError, ValueError, FileNotFoundError) as exc:
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
        return 1
    writer.finish()
    print(json.dumps(io._jsonable(summary), indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
