"""Command-line front end.

    dosnet certify   --config FILE | --example NAME  [--out-dir DIR]
    dosnet simulate  --config FILE | --example NAME  --out-dir DIR [--seed --step --horizon]
    dosnet fit-dos   --signal FILE --tau-d X --t-ratio Y [--bound B --n-subsystems N --delta D]
    dosnet sweep     --config FILE [FILE ...] --out-dir DIR [--jobs J]
    dosnet gen-example NAME [--out-dir DIR]

Exit codes: 0 success, 1 parse error, 2 small-gain violation, 3 simulation
aborted on numerical blowup.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .certificate import (
    GainCertificate,
    check_dos_admissible,
    envelope_params,
    practical_bound,
)
from .dos import DoSBudget, DoSSignal, from_activity, tightest_budget, xi_measure
from .errors import (
    AlphaNonPositive,
    NoFeasibleDelta,
    NotCertified,
    NumericalBlowup,
    ParseError,
    SigmaTooLarge,
    SmallGainViolated,
)
from .simulate import MODE_FROM_CODE, EventTriggered, Hybrid, SimTrace, envelope_check, run

log = logging.getLogger("dosnet")

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_SMALL_GAIN = 2
EXIT_ABORT = 3

SIG_DIGITS = 12


def fmt(v: float) -> str:
    return f"{v:.{SIG_DIGITS}g}"


def clean(obj):
    """Round floats to 12 significant digits and make the structure JSON-safe."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float(fmt(v))
    return obj


def certificate_dict(cert: GainCertificate) -> dict:
    cm = cert.comparison
    return {
        "p": cert.p,
        "comparison": {
            "delta": cm.delta,
            "a_diag": cm.a_diag,
            "b_off": cm.b_off,
            "gamma": cm.gamma,
        },
        "mu": cert.mu,
        "l_row": cert.l_row,
        "j_row": cert.j_row,
        "sigma_max": cert.sigma_max,
        "sigma": cert.sigma,
        "omega1": cert.omega1,
        "omega2": cert.omega2,
        "resilience_bound": cert.resilience_bound,
        "small_gain_radius": cert.small_gain_radius,
        "overrides": list(cert.overrides),
    }


def _dos_section(exp: cfgmod.Experiment) -> dict:
    out = {
        "signal": exp.dos.to_dict(),
        "attacked_time": xi_measure(exp.dos, 0.0, exp.horizon),
        "attack_count": len(exp.dos),
    }
    if exp.tau_d is not None:
        eta, kappa = tightest_budget(exp.dos, exp.tau_d, exp.t_ratio)
        out["budget_fit"] = {"tau_d": exp.tau_d, "t_ratio": exp.t_ratio, "eta_min": eta, "kappa_min": kappa}
    return out


def _budget(exp: cfgmod.Experiment) -> DoSBudget | None:
    if exp.tau_d is None:
        return None
    eta, kappa = tightest_budget(exp.dos, exp.tau_d, exp.t_ratio)
    return DoSBudget(eta, exp.tau_d, kappa, exp.t_ratio)


def analyze(exp: cfgmod.Experiment) -> tuple[dict, GainCertificate | None, int]:
    report: dict = {"name": exp.name, "config": exp.raw}
    cert = None
    code = EXIT_OK
    try:
        cert = exp.certificate()
        report["certificate"] = certificate_dict(cert)
    except (SmallGainViolated, NoFeasibleDelta) as exc:
        report["certificate"] = {"error": str(exc)}
        code = EXIT_SMALL_GAIN
    except (SigmaTooLarge, AlphaNonPositive) as exc:
        # bad certificate parameters; a simulation can still run uncertified
        report["certificate"] = {"error": str(exc)}
        code = EXIT_PARSE
    report["dos"] = _dos_section(exp)
    budget = _budget(exp)
    if cert is not None and budget is not None and exp.delta is not None:
        n = exp.model.n_subsystems
        adm = check_dos_admissible(budget, n, exp.delta, cert.resilience_bound)
        report["admissibility"] = {"lhs": adm.lhs, "rhs": adm.rhs, "certified": adm.certified}
        env = envelope_params(budget, cert, n, exp.delta)
        report["envelope_params"] = {
            "delta_star": env.delta_star,
            "kappa_star": env.kappa_star,
            "t_star": env.t_star,
            "beta_star": env.beta_star,
        }
    return report, cert, code


CSV_TAIL = ["v_total", "dos_active", "mode", "tx_subsystem", "tx_success"]


def csv_header(trace: SimTrace) -> list[str]:
    names = []
    for s in trace.model.subsystems:
        names += [f"x_{s.id}_{j}" for j in range(1, s.n + 1)]
    held = [f"held_{n[2:]}" for n in names]
    return ["t"] + names + held + CSV_TAIL


def write_trace_csv(trace: SimTrace, path: Path) -> None:
    """One row per sample; a sample with several transmission attempts repeats once per attempt."""
    by_time: dict[float, list] = {}
    for ev in trace.events:
        by_time.setdefault(ev.time, []).append(ev)
    n = trace.states.shape[1]
    num_fmt = ",".join(["%.12g"] * (1 + 2 * n + 1))
    with open(path, "w", newline="") as fh:
        fh.write(",".join(csv_header(trace)) + "\n")
        for k, t in enumerate(trace.times):
            head = num_fmt % (t, *trace.states[k], *trace.held[k], trace.v_total[k])
            common = f"{head},{int(trace.dos_active[k])},{MODE_FROM_CODE[int(trace.modes[k])].value}"
            evs = by_time.get(t)
            if not evs:
                fh.write(f"{common},0,0\n")
            else:
                for ev in evs:
                    fh.write(f"{common},{ev.subsystem},{int(ev.succeeded)}\n")


def write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(clean(obj), indent=2) + "\n")


def simulate_experiment(exp: cfgmod.Experiment, out_dir: Path) -> tuple[dict, int]:
    out_dir.mkdir(parents=True, exist_ok=True)
    report, cert, _ = analyze(exp)
    sim_cfg = exp.sim_config(cert)
    code = EXIT_OK
    try:
        trace = run(sim_cfg)
    except NumericalBlowup as exc:
        trace = exc.trace
        code = EXIT_ABORT
        report["aborted"] = str(exc)
    write_trace_csv(trace, out_dir / "trace.csv")
    report["transmissions"] = {
        "attempts": trace.attempts,
        "successes": trace.successes,
        "total_attempts": int(trace.attempts.sum()),
        "total_successes": trace.total_successes,
    }
    report["initial_state_norm"] = float(np.linalg.norm(trace.states[0]))
    report["final_state_norm"] = float(np.linalg.norm(trace.states[-1]))
    report["final_time"] = float(trace.times[-1])
    budget = _budget(exp)
    if cert is not None and budget is not None and exp.delta is not None:
        env = envelope_params(budget, cert, exp.model.n_subsystems, exp.delta)
        er = envelope_check(trace, env)
        report["envelope_check"] = {
            "certified": er.certified,
            "max_ratio": er.max_ratio,
            "first_violation": er.first_violation,
            "note": er.note,
        }
        if isinstance(sim_cfg.policy, (Hybrid, EventTriggered)):
            try:
                bound, c = practical_bound(cert, sim_cfg.policy.trigger, env)
                report["practical_bound"] = {"v_bound": bound, "c": c}
            except NotCertified as exc:
                report["practical_bound"] = {"v_bound": None, "note": str(exc)}
    write_json(report, out_dir / "report.json")
    return report, code


def _load(args) -> cfgmod.Experiment:
    if getattr(args, "example", None):
        raw = cfgmod.builtin_config(args.example)
    else:
        raw = cfgmod.load_raw(args.config)
    run_block = raw.setdefault("run", {})
    if getattr(args, "seed", None) is not None:
        run_block["seed"] = args.seed
    if getattr(args, "step", None) is not None:
        run_block["step"] = args.step
    if getattr(args, "horizon", None) is not None:
        run_block["horizon"] = args.horizon
    return cfgmod.parse_experiment(raw)


def cmd_certify(args) -> int:
    exp = _load(args)
    report, cert, code = analyze(exp)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_json(report, out / "certificate.json")
    summary = {k: report[k] for k in ("certificate", "admissibility") if k in report}
    print(json.dumps(clean(summary), indent=2))
    return code


def cmd_simulate(args) -> int:
    exp = _load(args)
    report, code = simulate_experiment(exp, Path(args.out_dir))
    tx = report["transmissions"]
    print(
        f"{exp.name}: {tx['total_successes']} successful / {tx['total_attempts']} attempted transmissions; "
        f"|x(T)| = {fmt(report['final_state_norm'])}"
    )
    if code == EXIT_ABORT:
        print(f"aborted: {report['aborted']}", file=sys.stderr)
    return code


def _signal_from_file(path: Path) -> DoSSignal:
    if path.suffix == ".csv":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or "dos_active" not in rows[0]:
            raise ParseError("trace CSV has no dos_active column", "dos_active")
        times, active = [], []
        for row in rows:
            t = float(row["t"])
            if times and t == times[-1]:
                continue
            times.append(t)
            active.append(row["dos_active"] == "1")
        return from_activity(times, active)
    raw = cfgmod.load_raw(path)
    if "horizon" not in raw:
        raise ParseError("missing required key", "horizon")
    return cfgmod.parse_signal(raw, cfgmod._num(raw["horizon"], "horizon"), 0, path="signal")


def cmd_fit_dos(args) -> int:
    if args.config or args.example:
        exp = _load(args)
        sig = exp.dos
        tau_d = args.tau_d if args.tau_d is not None else exp.tau_d
        t_ratio = args.t_ratio if args.t_ratio is not None else exp.t_ratio
        n = exp.model.n_subsystems
        delta = exp.delta
        bound = args.bound
        if bound is None:
            try:
                bound = exp.certificate().resilience_bound
            except (SmallGainViolated, NoFeasibleDelta, SigmaTooLarge, AlphaNonPositive):
                bound = None
    else:
        if not args.signal:
            raise ParseError("give --signal, --config or --example", "signal")
        sig = _signal_from_file(Path(args.signal))
        tau_d, t_ratio, n, delta, bound = args.tau_d, args.t_ratio, args.n_subsystems, args.delta, args.bound
    if tau_d is None or t_ratio is None:
        raise ParseError("tau_d and t_ratio are required", "tau_d")
    eta, kappa = tightest_budget(sig, tau_d, t_ratio)
    out = {
        "attack_count": len(sig),
        "attacked_time": xi_measure(sig, 0.0, sig.horizon) if math.isfinite(sig.horizon) else None,
        "tau_d": tau_d,
        "t_ratio": t_ratio,
        "eta_min": eta,
        "kappa_min": kappa,
    }
    if n is not None and delta is not None:
        lhs = 1.0 / t_ratio + n * delta / tau_d
        out["lhs"] = lhs
        if bound is not None:
            out["rhs"] = bound
            out["certified"] = lhs < bound
    print(json.dumps(clean(out), indent=2))
    return EXIT_OK


def _sweep_one(path: str, out_root: str) -> tuple[str, int]:
    exp = cfgmod.load_experiment(path)
    _, code = simulate_experiment(exp, Path(out_root) / Path(path).stem)
    return path, code


def cmd_sweep(args) -> int:
    worst = EXIT_OK
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        futures = [pool.submit(_sweep_one, p, args.out_dir) for p in args.config]
        for fut in futures:
            path, code = fut.result()
            print(f"{path}: exit {code}")
            worst = max(worst, code)
    return worst


def cmd_gen_example(args) -> int:
    raw = cfgmod.builtin_config(args.name)
    text = json.dumps(raw, indent=2) + "\n"
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{raw['name']}.json").write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dosnet", description="DoS-resilience certificates and simulations")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def source(sp, required=True):
        g = sp.add_mutually_exclusive_group(required=required)
        g.add_argument("--config", help="experiment config (JSON)")
        g.add_argument("--example", help="built-in example name")

    def overrides(sp):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--step")
        sp.add_argument("--horizon")

    sp = sub.add_parser("certify", help="compute the small-gain certificate")
    source(sp)
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("simulate", help="simulate and write trace.csv + report.json")
    source(sp)
    sp.add_argument("--out-dir", required=True)
    overrides(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit-dos", help="tightest DoS budget for a signal")
    source(sp, required=False)
    sp.add_argument("--signal", help="signal JSON or trace CSV")
    sp.add_argument("--tau-d", type=float)
    sp.add_argument("--t-ratio", type=float)
    sp.add_argument("--bound", type=float)
    sp.add_argument("--n-subsystems", type=int)
    sp.add_argument("--delta", type=float)
    sp.set_defaults(func=cmd_fit_dos)

    sp = sub.add_parser("sweep", help="simulate several configs in parallel")
    sp.add_argument("--config", nargs="+", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--jobs", type=int, default=None)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("gen-example", help="write a built-in example config")
    sp.add_argument("name", choices=sorted(cfgmod.BUILTIN) + sorted(cfgmod.ALIASES))
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_gen_example)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ParseError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
