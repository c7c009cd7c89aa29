"""Scenario runner: declarative sweeps over noise parameters, CSV/JSON output.

A scenario is a JSON object describing one bound-estimation experiment:

    {
      "name": "example",
      "dimension": 7,
      "schmidt": "proportional",            # list | "proportional" | "adapt"
      "noise": {"kind": "white", "epsilon": 0.0},
      "configs": [0, 1, 2],
      "chi_strategy": "symmetric",
      "sweep": {"parameter": "epsilon", "from": 0.0, "to": 1.0, "steps": 101},
      "mode": "exact",                      # or {"shots": 100000, "seed": 1}
      "estimators": ["theorem1"]
    }

Sweep points are evaluated independently in deterministic order; each run
emits a CSV table (clamped bounds, shortest round-trip floats) and a JSON
sidecar carrying the scenario echo, the adapted coefficients, and per-row
flags.  Outputs contain no timestamps, so reruns are byte-identical.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import __version__
from .estimation import ESTIMATORS, adaptive_estimate
from .linalg import is_psd, projector
from .measurements import measurement_config
from .states import (
    bell_state,
    crosstalk_state,
    exact_fidelity,
    generalized_bell_state,
    ramp_schmidt,
    schmidt_vector,
    white_noise_state,
)
from .verifiers import bell_verifier, error_operator

SANDWICH_ATOL = 1e-9

CHI_STRATEGIES = ("uniform", "symmetric", "crosstalk_opt", "one_side_A", "one_side_B", "general")

SWEEP_PARAMETERS = ("epsilon", "epsilon_a", "epsilon_b", "ratio")


@dataclass(frozen=True)
class Scenario:
    name: str
    dimension: int
    schmidt: np.ndarray
    adapt: bool
    noise: dict
    configs: tuple
    chi_strategy: str
    sweep: dict
    shots: int | None
    seed: int | None
    estimators: tuple

    def echo(self):
        """JSON-serializable copy of the validated scenario."""
        return {
            "name": self.name,
            "dimension": self.dimension,
            "schmidt": {"preparation": [float(x) for x in self.schmidt], "adapt": self.adapt},
            "noise": dict(self.noise),
            "configs": list(self.configs),
            "chi_strategy": self.chi_strategy,
            "sweep": dict(self.sweep),
            "mode": "exact" if self.shots is None else {"shots": self.shots, "seed": self.seed},
            "estimators": list(self.estimators),
        }


def _fail(problems):
    raise ValueError("invalid scenario: " + "; ".join(problems))


def scenario_from_dict(obj):
    """Validate a parsed scenario object; raises ValueError listing every problem."""
    if not isinstance(obj, dict):
        raise ValueError(f"scenario must be an object, got {type(obj).__name__}")
    problems = []
    known = {"name", "dimension", "schmidt", "noise", "configs", "chi_strategy", "sweep", "mode", "estimators"}
    for key in obj:
        if key not in known:
            problems.append(f"unknown field {key!r}")

    name = obj.get("name", "scenario")
    if not isinstance(name, str) or not name:
        problems.append("name: must be a nonempty string")

    d = obj.get("dimension")
    if not isinstance(d, int) or d < 2:
        problems.append(f"dimension: need an integer >= 2, got {d!r}")
        _fail(problems)

    schmidt_spec = obj.get("schmidt", "proportional")
    adapt = False
    if isinstance(schmidt_spec, dict):
        adapt = bool(schmidt_spec.get("adapt", False))
        schmidt_spec = schmidt_spec.get("preparation", "proportional")
    elif schmidt_spec == "adapt":
        adapt, schmidt_spec = True, "proportional"
    if schmidt_spec == "proportional":
        schmidt = ramp_schmidt(d)
    elif isinstance(schmidt_spec, (list, tuple)):
        if len(schmidt_spec) != d:
            problems.append(f"schmidt: expected {d} coefficients, got {len(schmidt_spec)}")
            _fail(problems)
        raw = np.asarray(schmidt_spec, dtype=float)
        if raw.min() <= 0:
            problems.append(f"schmidt: coefficients must be positive, got min {raw.min()!r}")
            _fail(problems)
        schmidt = schmidt_vector(raw / np.linalg.norm(raw))
    else:
        problems.append(f"schmidt: expected a list, \"proportional\", or \"adapt\", got {schmidt_spec!r}")
        _fail(problems)

    noise = obj.get("noise")
    if not isinstance(noise, dict) or noise.get("kind") not in ("white", "crosstalk"):
        problems.append(f"noise: expected an object with kind white|crosstalk, got {noise!r}")
        _fail(problems)
    noise = dict(noise)
    if noise["kind"] == "white":
        eps = noise.setdefault("epsilon", 0.0)
        if not 0.0 <= eps <= 1.0:
            problems.append(f"noise.epsilon: must be in [0, 1], got {eps!r}")
    else:
        if "total" in noise or "ratio" in noise:
            total, r = noise.setdefault("total", 0.0), noise.setdefault("ratio", 0.5)
            if total < 0 or 2 * d * total > 1.0 + 1e-12:
                problems.append(f"noise.total: need 0 <= 2d*total <= 1, got {total!r}")
            if not 0.0 <= r <= 1.0:
                problems.append(f"noise.ratio: must be in [0, 1], got {r!r}")
        else:
            ea, eb = noise.setdefault("epsilon_a", 0.0), noise.setdefault("epsilon_b", 0.0)
            if ea < 0 or eb < 0 or 2 * d * (ea + eb) > 1.0 + 1e-12:
                problems.append(f"noise: need epsilon_a, epsilon_b >= 0 with 2d(eps_a+eps_b) <= 1, got ({ea!r}, {eb!r})")

    configs = obj.get("configs")
    if (
        not isinstance(configs, (list, tuple))
        or not configs
        or any(not isinstance(j, int) for j in configs)
        or len(set(configs)) != len(configs)
        or min(configs) < 0
        or max(configs) >= d
    ):
        problems.append(f"configs: need distinct integers in [0, {d}), got {configs!r}")

    strategy = obj.get("chi_strategy", "general")
    if strategy not in CHI_STRATEGIES:
        problems.append(f"chi_strategy: expected one of {CHI_STRATEGIES}, got {strategy!r}")

    sweep = obj.get("sweep")
    if not isinstance(sweep, dict):
        problems.append(f"sweep: expected an object, got {sweep!r}")
        _fail(problems)
    sweep = dict(sweep)
    parameter = sweep.get("parameter")
    lo, hi, steps = sweep.get("from"), sweep.get("to"), sweep.get("steps")
    if parameter not in SWEEP_PARAMETERS:
        problems.append(f"sweep.parameter: expected one of {SWEEP_PARAMETERS}, got {parameter!r}")
    elif noise["kind"] == "white" and parameter != "epsilon":
        problems.append(f"sweep.parameter: {parameter!r} does not apply to white noise")
    elif noise["kind"] == "crosstalk" and parameter == "epsilon":
        problems.append("sweep.parameter: \"epsilon\" does not apply to crosstalk noise")
    elif noise["kind"] == "crosstalk" and parameter == "ratio" and "total" not in noise:
        problems.append("sweep.parameter: \"ratio\" needs crosstalk noise in total/ratio form")
    if not isinstance(steps, int) or steps < 1:
        problems.append(f"sweep.steps: need an integer >= 1, got {steps!r}")
    elif not (isinstance(lo, (int, float)) and isinstance(hi, (int, float))):
        problems.append(f"sweep: from/to must be numbers, got {lo!r}, {hi!r}")
    elif steps == 1 and lo != hi:
        problems.append("sweep: steps=1 requires from == to")
    elif lo > hi:
        problems.append(f"sweep: need from <= to, got {lo!r} > {hi!r}")
    elif parameter in SWEEP_PARAMETERS:
        if parameter in ("epsilon", "ratio") and not (0.0 <= lo and hi <= 1.0):
            problems.append(f"sweep: {parameter} range [{lo!r}, {hi!r}] outside [0, 1]")
        if parameter in ("epsilon_a", "epsilon_b") and noise["kind"] == "crosstalk" and "total" not in noise:
            other = noise["epsilon_b"] if parameter == "epsilon_a" else noise["epsilon_a"]
            if lo < 0 or 2 * d * (hi + other) > 1.0 + 1e-12:
                problems.append(f"sweep: {parameter} range [{lo!r}, {hi!r}] violates 2d(eps_a+eps_b) <= 1")

    mode = obj.get("mode", "exact")
    shots = seed = None
    if mode == "exact":
        pass
    elif isinstance(mode, dict) and isinstance(mode.get("shots"), int) and mode["shots"] >= 1:
        shots = mode["shots"]
        seed = mode.get("seed")
        if seed is not None and not isinstance(seed, int):
            problems.append(f"mode.seed: must be an integer, got {seed!r}")
    else:
        problems.append(f"mode: expected \"exact\" or an object with shots >= 1, got {mode!r}")

    estimators = obj.get("estimators", ["theorem1"])
    if (
        not isinstance(estimators, (list, tuple))
        or not estimators
        or any(e not in ESTIMATORS for e in estimators)
        or len(set(estimators)) != len(estimators)
    ):
        problems.append(f"estimators: need a nonempty subset of {ESTIMATORS}, got {estimators!r}")

    if problems:
        _fail(problems)
    return Scenario(
        name=name,
        dimension=d,
        schmidt=schmidt,
        adapt=adapt,
        noise=noise,
        configs=tuple(sorted(configs)),
        chi_strategy=strategy,
        sweep=sweep,
        shots=shots,
        seed=seed,
        estimators=tuple(estimators),
    )


def load_scenario(path):
    """Parse and validate a scenario file."""
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(obj)


def _noise_at(scenario, value):
    noise = scenario.noise
    param = scenario.sweep["parameter"]
    if noise["kind"] == "white":
        return {"kind": "white", "epsilon": float(value)}
    if "total" in noise:
        total = float(value) if param == "total" else noise["total"]
        r = float(value) if param == "ratio" else noise["ratio"]
        return {"kind": "crosstalk", "epsilon_a": total * r, "epsilon_b": total * (1.0 - r)}
    ea = float(value) if param == "epsilon_a" else noise["epsilon_a"]
    eb = float(value) if param == "epsilon_b" else noise["epsilon_b"]
    return {"kind": "crosstalk", "epsilon_a": ea, "epsilon_b": eb}


def _prepare(noise, psi):
    if noise["kind"] == "white":
        return white_noise_state(psi, noise["epsilon"])
    return crosstalk_state(psi, noise["epsilon_a"], noise["epsilon_b"])


@dataclass(frozen=True)
class ScenarioResult:
    scenario: Scenario
    rows: list
    violations: int

    @property
    def ok(self):
        return self.violations == 0


def run_scenario(scenario, shots=None, seed=None):
    """Evaluate every sweep point; returns a ScenarioResult with raw bounds.

    `shots`/`seed` override the scenario's mode (command-line flags win).
    Row r of a sampled run uses base seed + r, so reruns are reproducible
    point by point.
    """
    if shots is None:
        shots = scenario.shots
        if seed is None:
            seed = scenario.seed
    base_seed = 0 if seed is None else int(seed)
    sweep = scenario.sweep
    values = np.linspace(sweep["from"], sweep["to"], sweep["steps"])
    psi_prep = bell_state(scenario.schmidt)
    rows = []
    violations = 0
    for r, value in enumerate(values):
        noise = _noise_at(scenario, value)
        rho = _prepare(noise, psi_prep)
        report = adaptive_estimate(
            rho,
            scenario.configs,
            chi_strategy=scenario.chi_strategy,
            schmidt=None if scenario.adapt else scenario.schmidt,
            shots=shots,
            seed=base_seed + r if shots is not None else None,
            estimators=scenario.estimators,
        )
        target = bell_state(report.schmidt)
        exact = exact_fidelity(rho, target)
        bounds = {}
        sandwich_ok = True
        for est in scenario.estimators:
            b = report.bounds[est]
            ok = b.lower - SANDWICH_ATOL <= exact <= b.upper + SANDWICH_ATOL
            sandwich_ok = sandwich_ok and ok
            bounds[est] = {
                "lower": b.lower,
                "upper": b.upper,
                "clamped": not (0.0 <= b.lower and b.upper <= 1.0),
                "sandwich_ok": ok,
            }
        if not sandwich_ok:
            violations += 1
        rows.append(
            {
                "sweep_param": float(value),
                "exact_F": exact,
                "bounds": bounds,
                "v_e": report.expectations["v_e"],
                "v_j": {j: report.expectations["v_j"][j] for j in scenario.configs},
                "e_op": report.expectations["e_op"],
                "chi_a": report.chi_a,
                "chi_b": report.chi_b,
                "m_tilde": report.m_tilde,
                "sandwich_ok": sandwich_ok,
            }
        )
    return ScenarioResult(scenario=scenario, rows=rows, violations=violations)


def csv_header(scenario):
    header = ["sweep_param", "exact_F"]
    for est in scenario.estimators:
        header += [f"{est}_lower", f"{est}_upper"]
    header.append("v_e")
    header += [f"v_j_{j}" for j in scenario.configs]
    header.append("e_op")
    return header


def write_result(result, out_dir):
    """Write <name>.csv and <name>.json under out_dir; returns both paths.

    CSV bounds are clamped to [0, 1] (the sidecar keeps raw values and a
    `clamped` flag per estimator); floats are formatted with repr for exact
    round-tripping.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    scenario = result.scenario
    csv_path = os.path.join(out_dir, f"{scenario.name}.csv")
    json_path = os.path.join(out_dir, f"{scenario.name}.json")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(csv_header(scenario))
        for row in result.rows:
            record = [repr(row["sweep_param"]), repr(row["exact_F"])]
            for est in scenario.estimators:
                b = row["bounds"][est]
                record.append(repr(min(max(b["lower"], 0.0), 1.0)))
                record.append(repr(min(max(b["upper"], 0.0), 1.0)))
            record.append(repr(row["v_e"]))
            record += [repr(row["v_j"][j]) for j in scenario.configs]
            record.append(repr(row["e_op"]))
            writer.writerow(record)
    sidecar = {
        "version": __version__,
        "scenario": scenario.echo(),
        "columns": csv_header(scenario),
        "violations": result.violations,
        "rows": [
            {
                "sweep_param": row["sweep_param"],
                "exact_F": row["exact_F"],
                "bounds": row["bounds"],
                "chi_a": [[float(c.real), float(c.imag)] for c in row["chi_a"]],
                "chi_b": [[float(c.real), float(c.imag)] for c in row["chi_b"]],
                "m_tilde": list(row["m_tilde"]) if row["m_tilde"] is not None else None,
                "sandwich_ok": row["sandwich_ok"],
            }
            for row in result.rows
        ],
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=1)
        fh.write("\n")
    return csv_path, json_path


FIG3_SCHMIDT = (0.086, 0.243, 0.446, 0.686, 0.446, 0.243, 0.086)


def preset_scenarios(preset):
    """Built-in scenario sets: white-noise sweeps over growing setting
    prefixes (fig1: d=7, fig2: d=9) and a crosstalk ratio sweep comparing
    adaptation strategies at fixed total noise (fig3)."""
    if preset == "fig1":
        return [
            scenario_from_dict(
                {
                    "name": f"fig1_m{n}",
                    "dimension": 7,
                    "schmidt": "proportional",
                    "noise": {"kind": "white", "epsilon": 0.0},
                    "configs": list(range(n)),
                    "chi_strategy": "symmetric",
                    "sweep": {"parameter": "epsilon", "from": 0.0, "to": 1.0, "steps": 101},
                    "estimators": ["theorem1", "nonadaptive"],
                }
            )
            for n in range(1, 8)
        ]
    if preset == "fig2":
        return [
            scenario_from_dict(
                {
                    "name": f"fig2_m{n}",
                    "dimension": 9,
                    "schmidt": "proportional",
                    "noise": {"kind": "white", "epsilon": 0.0},
                    "configs": list(range(n)),
                    "chi_strategy": "symmetric",
                    "sweep": {"parameter": "epsilon", "from": 0.0, "to": 1.0, "steps": 101},
                    "estimators": ["theorem1"],
                }
            )
            for n in range(1, 10)
        ]
    if preset == "fig3":
        return [
            scenario_from_dict(
                {
                    "name": f"fig3_{strategy}",
                    "dimension": 7,
                    "schmidt": list(FIG3_SCHMIDT),
                    "noise": {"kind": "crosstalk", "total": 0.04, "ratio": 0.5},
                    "configs": [0],
                    "chi_strategy": strategy,
                    "sweep": {"parameter": "ratio", "from": 0.0, "to": 1.0, "steps": 101},
                    "estimators": ["theorem1"],
                }
            )
            for strategy in ("one_side_A", "one_side_B", "symmetric", "crosstalk_opt")
        ]
    raise ValueError(f"unknown preset {preset!r}, expected fig1, fig2, or fig3")


def selfcheck(seed=0, trials=200, corrupt_verifier=False):
    """Randomized invariant suite; returns per-invariant (passed, total) counts.

    Checks, per trial: verifier stabilization of the target, POVM validity,
    the prime-d operator identity sum_j V_j = d P + E, and the oracle
    sandwich lower <= F <= upper for random noisy states under a random
    strategy and configuration set.  `corrupt_verifier` injects a biased
    verifier so stabilization must fail (negative control for the suite).
    """
    if trials < 1:
        raise ValueError(f"need trials >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    counts = {"stabilization": [0, 0], "povm": [0, 0], "operator_identity": [0, 0], "sandwich": [0, 0]}

    for t in range(trials):
        d = 2 + t % 8
        s = rng.uniform(0.25, 1.0, d)
        s = schmidt_vector(s / np.linalg.norm(s))
        mag = rng.uniform(0.3, 1.0, d)
        chi_a = mag * np.exp(2j * np.pi * rng.random(d))
        chi_a = chi_a / np.linalg.norm(chi_a)
        chi_b = s / chi_a
        chi_b = chi_b / np.linalg.norm(chi_b)
        psi = bell_state(s)
        j = int(rng.integers(0, d))

        verifier = bell_verifier(j, chi_a, chi_b)
        matrix = verifier.matrix
        if corrupt_verifier:
            matrix = matrix + 0.02 * np.eye(d * d)
        counts["stabilization"][1] += 1
        if abs(np.real(np.conj(psi) @ matrix @ psi) - 1.0) <= 1e-9:
            counts["stabilization"][0] += 1

        cfg = measurement_config(j, chi_a, chi_b)
        counts["povm"][1] += 1
        ok = True
        for povm in (cfg.povm_a, cfg.povm_b):
            ok = ok and np.abs(povm.sum(axis=0) - np.eye(d)).max() <= 1e-10
            ok = ok and all(is_psd(povm[m]) for m in range(d + 1))
        counts["povm"][0] += bool(ok)

        if d in (2, 3, 5, 7):
            lhs = sum(bell_verifier(jj, chi_a, chi_b).matrix for jj in range(d))
            psi00 = generalized_bell_state(0, 0, chi_a, chi_b)
            rhs = d * projector(psi00) + error_operator(chi_a, chi_b).matrix
            counts["operator_identity"][1] += 1
            counts["operator_identity"][0] += bool(np.abs(lhs - rhs).max() <= 1e-9)

        kind = t % 3
        if kind == 0:
            rho = white_noise_state(psi, rng.uniform(0.0, 1.0))
        elif kind == 1:
            cap = 1.0 / (2 * d)
            ea, eb = rng.uniform(0.0, cap / 2), rng.uniform(0.0, cap / 2)
            rho = crosstalk_state(psi, ea, eb)
        else:
            w = rng.dirichlet(np.ones(4))
            rho = (w[0] + 0.2) / (1.0 + 0.2) * projector(psi)
            for i in range(1, 4):
                mu, nu = int(rng.integers(1, d)), int(rng.integers(0, d))
                rho = rho + w[i] / (1.0 + 0.2) * projector(generalized_bell_state(mu, nu, chi_a, chi_b))
        n_cfg = int(rng.integers(1, d + 1))
        configs = sorted(rng.choice(d, size=n_cfg, replace=False).tolist())
        strategy = CHI_STRATEGIES[int(rng.integers(0, len(CHI_STRATEGIES)))]
        counts["sandwich"][1] += 1
        try:
            report = adaptive_estimate(rho, configs, chi_strategy=strategy, schmidt=s)
        except ValueError:
            # adaptation may reject degenerate tables; the sandwich must
            # still hold for the closed-form pair
            report = adaptive_estimate(rho, configs, chi_strategy="symmetric", schmidt=s)
        fid = exact_fidelity(rho, psi)
        b = report.bounds["theorem1"]
        counts["sandwich"][0] += b.lower - SANDWICH_ATOL <= fid <= b.upper + SANDWICH_ATOL

    return {name: tuple(pair) for name, pair in counts.items()}
