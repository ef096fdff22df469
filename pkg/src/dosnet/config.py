"""Experiment config files: parsing, validation and the built-in examples.

Configs are JSON.  Numbers may be written as JSON numbers or as decimal
strings (``"0.01"``); matrices are nested arrays, and a bare scalar stands
for a 1x1 matrix.  Unknown keys are rejected.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .certificate import GainCertificate, TriggerParams, certify
from .dos import DoSSignal, generate
from .errors import ParseError
from .plant import PlantModel, Subsystem
from .simulate import EventTriggered, Hybrid, Policy, RoundRobin, SimConfig

TOP_KEYS = {"name", "plant", "policy", "dos", "certificate", "run"}
SUBSYSTEM_KEYS = {"id", "a", "b", "k", "q", "couplings_physical", "couplings_control"}
POLICY_KEYS = {"kind", "delta", "c"}
DOS_KEYS = {"signal", "budget"}
BUDGET_KEYS = {"tau_d", "t_ratio"}
CERT_KEYS = {"delta", "mu", "sigma", "sigma_fraction", "overrides"}
OVERRIDE_KEYS = {"a_diag", "b_off", "gamma"}
RUN_KEYS = {"horizon", "step", "x0", "seed"}
POLICY_KINDS = ("round_robin", "event_triggered", "hybrid")


@dataclass
class Experiment:
    name: str
    raw: dict
    model: PlantModel
    policy_kind: str
    delta: float | None
    c: np.ndarray | None
    dos: DoSSignal
    tau_d: float | None
    t_ratio: float | None
    cert_options: dict
    horizon: float
    step: float | None
    x0: np.ndarray
    seed: int

    def certificate(self) -> GainCertificate:
        return certify(self.model, **self.cert_options)

    def sim_config(self, cert: GainCertificate | None) -> SimConfig:
        return SimConfig(
            self.model,
            self.policy(cert),
            self.dos,
            self.x0,
            self.horizon,
            step=self.step,
            cert=cert,
        )

    def policy(self, cert: GainCertificate | None) -> Policy:
        if self.policy_kind == "round_robin":
            return RoundRobin(self.delta)
        sigma = self.cert_options.get("sigma")
        if sigma is None:
            if cert is None:
                raise ParseError("an explicit sigma is required when no certificate is available", "certificate.sigma")
            if np.any(np.isinf(cert.sigma_max)):
                raise ParseError(
                    "some subsystem has an unconstrained error gain; give sigma explicitly",
                    "certificate.sigma",
                )
            sigma = cert.sigma
        n = self.model.n_subsystems
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (n,))
        if cert is not None:
            trig = TriggerParams.from_certificate(cert, self.c, sigma)
        else:
            trig = TriggerParams(sigma, np.broadcast_to(self.c, (n,)).copy())
        if self.policy_kind == "event_triggered":
            return EventTriggered(trig)
        return Hybrid(self.delta, trig)


def _check_keys(d: Any, allowed: set[str], path: str, required: set[str] = frozenset()) -> dict:
    if not isinstance(d, dict):
        raise ParseError("expected an object", path or "<root>")
    for key in d:
        if key not in allowed:
            raise ParseError(f"unknown key '{key}'", f"{path}.{key}" if path else key)
    for key in required:
        if key not in d:
            raise ParseError("missing required key", f"{path}.{key}" if path else key)
    return d


def _num(v: Any, path: str) -> float:
    if isinstance(v, bool):
        raise ParseError("expected a number", path)
    try:
        out = float(v)
    except (TypeError, ValueError):
        raise ParseError(f"expected a number, got {v!r}", path) from None
    return out


def _vec(v: Any, path: str) -> np.ndarray:
    if not isinstance(v, list):
        return np.array([_num(v, path)])
    return np.array([_num(x, f"{path}[{k}]") for k, x in enumerate(v)])


def _mat(v: Any, path: str) -> np.ndarray:
    if not isinstance(v, list):
        return np.array([[_num(v, path)]])
    rows = []
    for r, row in enumerate(v):
        if isinstance(row, list):
            rows.append([_num(x, f"{path}[{r}][{c}]") for c, x in enumerate(row)])
        else:
            rows.append([_num(row, f"{path}[{r}]")])
    if len({len(r) for r in rows}) > 1:
        raise ParseError("ragged matrix", path)
    return np.array(rows, dtype=float)


def _auto_or(v: Any, conv, path: str):
    if v is None or v == "auto":
        return None
    return conv(v, path)


def _couplings(d: Any, path: str) -> dict[int, np.ndarray]:
    if d is None:
        return {}
    if not isinstance(d, dict):
        raise ParseError("expected an object keyed by neighbor id", path)
    out = {}
    for key, mat in d.items():
        try:
            j = int(key)
        except ValueError:
            raise ParseError(f"neighbor id '{key}' is not an integer", path) from None
        out[j] = _mat(mat, f"{path}.{key}")
    return out


def parse_plant(d: Any) -> PlantModel:
    _check_keys(d, {"subsystems", "neighbors"}, "plant", {"subsystems"})
    subs = []
    if not isinstance(d["subsystems"], list) or not d["subsystems"]:
        raise ParseError("expected a non-empty list", "plant.subsystems")
    for k, sd in enumerate(d["subsystems"]):
        path = f"plant.subsystems[{k}]"
        _check_keys(sd, SUBSYSTEM_KEYS, path, {"id", "a", "b", "k", "q"})
        try:
            subs.append(
                Subsystem(
                    int(sd["id"]),
                    _mat(sd["a"], f"{path}.a"),
                    _mat(sd["b"], f"{path}.b"),
                    _mat(sd["k"], f"{path}.k"),
                    _mat(sd["q"], f"{path}.q"),
                    _couplings(sd.get("couplings_physical"), f"{path}.couplings_physical"),
                    _couplings(sd.get("couplings_control"), f"{path}.couplings_control"),
                )
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(str(exc), path) from None
    neighbors = None
    if "neighbors" in d:
        nd = d["neighbors"]
        if not isinstance(nd, dict):
            raise ParseError("expected an object keyed by subsystem id", "plant.neighbors")
        try:
            neighbors = {int(i): {int(j) for j in js} for i, js in nd.items()}
        except (TypeError, ValueError):
            raise ParseError("neighbor ids must be integers", "plant.neighbors") from None
    return PlantModel(subs, neighbors)


def parse_signal(d: Any, horizon: float, seed: int, path: str = "dos.signal") -> DoSSignal:
    if d is None:
        return DoSSignal([], horizon)
    if not isinstance(d, dict):
        raise ParseError("expected an object", path)
    if "intervals" in d:
        _check_keys(d, {"intervals", "horizon"}, path)
        pairs = []
        for k, pair in enumerate(d["intervals"]):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ParseError("interval must be [h, tau]", f"{path}.intervals[{k}]")
            pairs.append((_num(pair[0], f"{path}.intervals[{k}][0]"), _num(pair[1], f"{path}.intervals[{k}][1]")))
        sig_h = _num(d.get("horizon", horizon), f"{path}.horizon")
        try:
            return DoSSignal(pairs, max(sig_h, horizon))
        except ValueError as exc:
            raise ParseError(str(exc), path) from None
    gen = d.get("generator")
    allowed = {
        "periodic": {"generator", "period", "duty", "offset"},
        "random_bursts": {"generator", "mean_gap", "mean_len", "distribution"},
        "pulse_train": {"generator", "times", "lengths"},
    }
    if gen not in allowed:
        raise ParseError(f"unknown generator {gen!r}", f"{path}.generator")
    _check_keys(d, allowed[gen], path)
    spec = {}
    for key, v in d.items():
        if key in ("generator", "distribution"):
            spec[key] = v
        elif key in ("times", "lengths"):
            spec[key] = _vec(v, f"{path}.{key}").tolist()
        else:
            spec[key] = _num(v, f"{path}.{key}")
    try:
        return generate(spec, seed=seed, horizon=horizon)
    except (KeyError, ValueError) as exc:
        raise ParseError(str(exc), path) from None


def parse_experiment(raw: Any) -> Experiment:
    raw = copy.deepcopy(raw)
    _check_keys(raw, TOP_KEYS, "", {"plant", "policy", "run"})
    model = parse_plant(raw["plant"])
    n = model.n_subsystems

    run = _check_keys(raw["run"], RUN_KEYS, "run", {"horizon", "x0"})
    horizon = _num(run["horizon"], "run.horizon")
    step = _auto_or(run.get("step"), _num, "run.step")
    x0 = _vec(run["x0"], "run.x0")
    seed = int(_num(run.get("seed", 0), "run.seed"))

    pol = _check_keys(raw["policy"], POLICY_KEYS, "policy", {"kind"})
    kind = pol["kind"]
    if kind not in POLICY_KINDS:
        raise ParseError(f"kind must be one of {POLICY_KINDS}", "policy.kind")
    delta = None
    if kind in ("round_robin", "hybrid"):
        if "delta" not in pol:
            raise ParseError("missing required key", "policy.delta")
        delta = _num(pol["delta"], "policy.delta")
    c = None
    if kind in ("event_triggered", "hybrid"):
        if "c" not in pol:
            raise ParseError("missing required key", "policy.c")
        cv = _vec(pol["c"], "policy.c")
        if cv.size not in (1, n):
            raise ParseError(f"expected 1 or {n} entries", "policy.c")
        c = np.broadcast_to(cv, (n,)).copy()

    dos_block = _check_keys(raw.get("dos", {}), DOS_KEYS, "dos")
    dos = parse_signal(dos_block.get("signal"), horizon, seed)
    tau_d = t_ratio = None
    if "budget" in dos_block:
        b = _check_keys(dos_block["budget"], BUDGET_KEYS, "dos.budget", BUDGET_KEYS)
        tau_d = _num(b["tau_d"], "dos.budget.tau_d")
        t_ratio = _num(b["t_ratio"], "dos.budget.t_ratio")
        if not tau_d > 0 or not t_ratio > 1:
            raise ParseError("need tau_d > 0 and t_ratio > 1", "dos.budget")

    cb = _check_keys(raw.get("certificate", {}), CERT_KEYS, "certificate")
    opts: dict[str, Any] = {
        "delta": _auto_or(cb.get("delta"), _num, "certificate.delta"),
        "sigma": _auto_or(cb.get("sigma"), _vec, "certificate.sigma"),
        "mu": _auto_or(cb.get("mu"), _vec, "certificate.mu"),
    }
    if "sigma_fraction" in cb:
        opts["sigma_fraction"] = _num(cb["sigma_fraction"], "certificate.sigma_fraction")
    ov = _check_keys(cb.get("overrides", {}), OVERRIDE_KEYS, "certificate.overrides")
    if "a_diag" in ov:
        opts["a_diag"] = _vec(ov["a_diag"], "certificate.overrides.a_diag")
    for key in ("b_off", "gamma"):
        if key in ov:
            opts[key] = _mat(ov[key], f"certificate.overrides.{key}")

    return Experiment(
        name=str(raw.get("name", "experiment")),
        raw=raw,
        model=model,
        policy_kind=kind,
        delta=delta,
        c=c,
        dos=dos,
        tau_d=tau_d,
        t_ratio=t_ratio,
        cert_options=opts,
        horizon=horizon,
        step=step,
        x0=x0,
        seed=seed,
    )


def load_raw(path: str | Path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None


def load_experiment(path: str | Path) -> Experiment:
    return parse_experiment(load_raw(path))


# Built-in examples.  The DoS realization is regenerated: 11 attacks of 40%
# duty over 20 s, each closing its period.
_PERIOD = "1.818181818182"
_OFFSET = "1.090909090909"

_EXAMPLE1_PLANT = {
    "subsystems": [
        {
            "id": 1, "a": [["1"]], "b": [["1"]], "k": [["-4.5"]], "q": [["1"]],
            "couplings_physical": {"2": [["1"]]},
            "couplings_control": {"2": [["-1.4"]]},
        },
        {
            "id": 2, "a": [["1"]], "b": [["1"]], "k": [["-6"]], "q": [["1"]],
            "couplings_control": {"1": [["-1"]]},
        },
    ],
    "neighbors": {"1": [2], "2": [1]},
}

_EXAMPLE2_PLANT = {
    "subsystems": [
        {
            "id": 1, "a": [["0", "1"], ["-3.75", "0"]], "b": [["0"], ["0.25"]],
            "k": [["-23", "-12"]], "q": [["1", "0"], ["0", "1"]],
            "couplings_physical": {"2": [["0", "0"], ["1.25", "0"]]},
            "couplings_control": {"2": [["-5", "0.25"]]},
        },
        {
            "id": 2, "a": [["0", "1"], ["-2.5", "0"]], "b": [["0"], ["0.25"]],
            "k": [["-18", "-12"]], "q": [["1", "0"], ["0", "1"]],
            "couplings_physical": {"1": [["0", "0"], ["1.25", "0"]], "3": [["0", "0"], ["1.25", "0"]]},
            "couplings_control": {"1": [["-4.75", "-0.25"]], "3": [["-4.75", "-0.25"]]},
        },
        {
            "id": 3, "a": [["0", "1"], ["-3.75", "0"]], "b": [["0"], ["0.25"]],
            "k": [["-23", "-12"]], "q": [["1", "0"], ["0", "1"]],
            "couplings_physical": {"2": [["0", "0"], ["1.25", "0"]]},
            "couplings_control": {"2": [["-5", "0.25"]]},
        },
    ],
    "neighbors": {"1": [2], "2": [1, 3], "3": [2]},
}

_DOS = {
    "signal": {"generator": "periodic", "period": _PERIOD, "duty": "0.4", "offset": _OFFSET},
    "budget": {"tau_d": "1.8182", "t_ratio": "2.5"},
}


def _example1(kind: str) -> dict:
    policy = {"kind": kind, "delta": "0.01"}
    if kind == "hybrid":
        policy["c"] = ["0.01", "0.01"]
    return {
        "name": f"example1-{'rr' if kind == 'round_robin' else kind}",
        "plant": _EXAMPLE1_PLANT,
        "policy": policy,
        "dos": _DOS,
        "certificate": {
            "delta": "0.1",
            "mu": "auto",
            "sigma": ["0.2", "0.2"],
            "overrides": {"a_diag": ["0.7", "0.9"]},
        },
        "run": {"horizon": "20", "step": "0.001", "x0": ["1", "1"], "seed": 0},
    }


def _example2(kind: str) -> dict:
    policy = {"kind": kind, "delta": "0.001"}
    if kind == "hybrid":
        policy["c"] = ["0.03", "0.03", "0.03"]
    return {
        "name": f"example2-{'rr' if kind == 'round_robin' else kind}",
        "plant": _EXAMPLE2_PLANT,
        "policy": policy,
        "dos": _DOS,
        "certificate": {
            "delta": "0.11",
            "mu": "auto",
            "sigma": ["0.01", "0.01", "0.01"],
            "overrides": {
                "b_off": [["0", "0.0608", "0"], ["0.1217", "0", "0.1217"], ["0", "0.0608", "0"]],
                "gamma": [
                    ["47.7983", "24.4007", "0"],
                    ["22.0276", "33.2386", "22.0276"],
                    ["0", "24.4007", "47.7983"],
                ],
            },
        },
        "run": {"horizon": "20", "step": "0.0001", "x0": ["1", "0", "-1", "0", "1", "0"], "seed": 0},
    }


BUILTIN = {
    "example1-rr": lambda: _example1("round_robin"),
    "example1-hybrid": lambda: _example1("hybrid"),
    "example2-rr": lambda: _example2("round_robin"),
    "example2-hybrid": lambda: _example2("hybrid"),
}
ALIASES = {"example1": "example1-rr", "example2": "example2-rr"}


def builtin_config(name: str) -> dict:
    key = ALIASES.get(name, name)
    if key not in BUILTIN:
        raise KeyError(f"unknown example {name!r}; choose from {sorted(BUILTIN) + sorted(ALIASES)}")
    return copy.deepcopy(BUILTIN[key]())
