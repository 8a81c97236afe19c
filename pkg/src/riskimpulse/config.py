"""Declarative run configuration: INI sections, closed function families.

Reward, cost, and weight functions are chosen from named built-in
families with numeric parameters, never from arbitrary expressions, so a
config file fully determines the run and two identical configs produce
byte-identical artifacts.  The effective (post-override) configuration is
hashed and embedded in every artifact.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .bellman import ImpulseProblem
from .errors import DomainError
from .norms import StateGrid
from .processes import DiffusionModel, PdmpModel, StepProcessModel

TOOL_VERSION = "0.1.0"

_DEFAULTS: Dict[str, Dict[str, str]] = {
    "model": {
        "kind": "diffusion",
        "alpha": "1.0",
        "sigma": "1.0",
        "g_amplitude": "0.0",
        "dimension": "1",
        "substeps": "16",
        # step-process family
        "base_rate": "1.0",
        "rate_exponent": "1.0",
        "jump_scale": "0.5",
        "noise_bound": "1.0",
        # pdmp family
        "flow_alpha": "1.0",
        "flow_offset": "0.0",
        "jump_rate": "1.0",
        "jump_noise_std": "1.0",
    },
    "problem": {
        "reward": "peak",
        "reward_h": "1.0",
        "cost": "affine",
        "cost_c0": "-0.3",
        "cost_kappa": "0.1",
        "gamma": "-0.5",
        "delta": "0.5",
        "shift_low": "-1.0",
        "shift_high": "1.0",
        "shift_count": "21",
    },
    "grid": {
        "L": "5.0",
        "n_nodes": "201",
        "omega": "abs",
    },
    "kernel": {
        "n_samples": "2000",
        "seed": "42",
    },
    "solver": {
        "tol": "1e-9",
        "max_iter": "500",
    },
    "simulate": {
        "n_steps": "400",
        "n_reps": "400",
        "start": "0.0",
        "seed": "4242",
    },
    "verify": {
        "gammas": "-2, -1, -0.5, -0.1, -0.01",
        "drift_gammas": "0, 0.5, 1",
        "drift_states": "17",
        "drift_samples": "4000",
        "radius_R": "3.0",
        "bins": "64",
        "minorisation_probes": "5",
        "minorisation_samples": "10000",
        "noise_t": "0.5",
        "noise_samples": "100000",
        "holder_instances": "10000",
        "contraction_pairs": "100",
        "contraction_span": "5.0",
        "seed": "777",
    },
}


@dataclass
class RunConfig:
    """Parsed and validated configuration; see _DEFAULTS for the schema."""

    values: Dict[str, Dict[str, str]]
    source_path: str = ""

    # -- access helpers ----------------------------------------------------

    def get(self, section: str, key: str) -> str:
        return self.values[section][key]

    def getfloat(self, section: str, key: str) -> float:
        return float(self.get(section, key))

    def getint(self, section: str, key: str) -> int:
        return int(self.get(section, key))

    def getfloats(self, section: str, key: str) -> List[float]:
        raw = self.get(section, key).replace(",", " ").split()
        return [float(tok) for tok in raw]

    # -- construction ------------------------------------------------------

    @classmethod
    def load(cls, path, seed_override: Optional[int] = None) -> "RunConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                           strict=False)
        parser.optionxform = str  # keep key case (radius_R)
        try:
            with open(path, "r") as fh:
                parser.read_file(fh)
        except configparser.Error as err:
            raise DomainError(f"config parse error: {err}") from err
        values = {sec: dict(kv) for sec, kv in _DEFAULTS.items()}
        errors = []
        for sec in parser.sections():
            if sec not in values:
                errors.append(f"{sec}: unknown section")
                continue
            for key, val in parser.items(sec):
                if key not in values[sec]:
                    errors.append(f"{sec}.{key}: unknown key")
                else:
                    values[sec][key] = val.strip()
        if errors:
            raise DomainError("config errors: " + "; ".join(errors))
        if seed_override is not None:
            values["kernel"]["seed"] = str(int(seed_override))
            values["simulate"]["seed"] = str(int(seed_override) + 1)
            values["verify"]["seed"] = str(int(seed_override) + 2)
        cfg = cls(values=values, source_path=str(path))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Collect all violations with field paths; raise once."""
        errors = []

        def check(cond, path, msg):
            if not cond:
                errors.append(f"{path}: {msg}")

        def num(section, key, kind=float):
            try:
                return kind(self.get(section, key))
            except ValueError:
                errors.append(f"{section}.{key}: not a number")
                return None

        kind = self.get("model", "kind")
        check(kind in ("diffusion", "step", "pdmp"), "model.kind",
              f"must be diffusion|step|pdmp, got {kind!r}")
        gamma = num("problem", "gamma")
        if gamma is not None:
            check(gamma < 0.0, "problem.gamma", "gamma must be negative")
        delta = num("problem", "delta")
        if delta is not None:
            check(delta > 0.0, "problem.delta", "delta must be positive")
        c0 = num("problem", "cost_c0")
        if c0 is not None:
            check(c0 < 0.0, "problem.cost_c0", "cost ceiling must be negative")
        kappa = num("problem", "cost_kappa")
        if kappa is not None:
            check(kappa >= 0.0, "problem.cost_kappa", "must be nonnegative")
        check(self.get("problem", "reward") in ("peak", "constant"),
              "problem.reward", "unknown reward family")
        check(self.get("problem", "cost") in ("affine", "constant"),
              "problem.cost", "unknown cost family")
        L = num("grid", "L")
        n_nodes = num("grid", "n_nodes", int)
        if n_nodes is not None:
            check(n_nodes >= 3, "grid.n_nodes", "must be >= 3")
        shift_high = num("problem", "shift_high")
        shift_low = num("problem", "shift_low")
        if None not in (L, shift_high, shift_low):
            check(L > max(abs(shift_low), abs(shift_high)), "grid.L",
                  "must exceed the largest |shift target|")
            check(shift_low <= shift_high, "problem.shift_low",
                  "must not exceed shift_high")
        check(self.get("grid", "omega") == "abs", "grid.omega",
              "only the 'abs' weight family is built in")
        ns = num("kernel", "n_samples", int)
        if ns is not None:
            check(ns >= 1, "kernel.n_samples", "must be >= 1")
        tol = num("solver", "tol")
        if tol is not None:
            check(tol > 0.0, "solver.tol", "must be positive")
        n_steps = num("simulate", "n_steps", int)
        if n_steps is not None:
            check(n_steps >= 1, "simulate.n_steps", "must be >= 1")
        n_reps = num("simulate", "n_reps", int)
        if n_reps is not None:
            check(n_reps >= 2, "simulate.n_reps", "must be >= 2")
        try:
            sweep = self.getfloats("verify", "gammas")
            check(all(g < 0 for g in sweep), "verify.gammas",
                  "sweep gammas must be negative")
            check(all(b > a for a, b in zip(sweep, sweep[1:])), "verify.gammas",
                  "sweep gammas must be strictly increasing")
        except ValueError:
            errors.append("verify.gammas: not a number list")
        if errors:
            raise DomainError("config errors: " + "; ".join(errors))

    # -- canonical form and hash --------------------------------------------

    def canonical_text(self) -> str:
        out = io.StringIO()
        for sec in sorted(self.values):
            for key in sorted(self.values[sec]):
                out.write(f"{sec}.{key}={self.values[sec][key]}\n")
        return out.getvalue()

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]

    # -- object builders -----------------------------------------------------

    def build_model(self):
        kind = self.get("model", "kind")
        substeps = self.getint("model", "substeps")
        if kind == "diffusion":
            amp = self.getfloat("model", "g_amplitude")
            drift = None if amp == 0.0 else (lambda x, a=amp: a * np.tanh(x))
            return DiffusionModel.ornstein_uhlenbeck(
                alpha=self.getfloat("model", "alpha"),
                sigma=self.getfloat("model", "sigma"),
                dimension=self.getint("model", "dimension"),
                substeps=substeps,
                drift_bounded=drift,
                drift_bound=abs(amp),
            )
        if kind == "step":
            scale = self.getfloat("model", "jump_scale")
            bound = self.getfloat("model", "noise_bound")
            if not abs(scale) < 1.0:
                raise DomainError("model.jump_scale: |scale| must be < 1")
            return StepProcessModel(
                base_rate=self.getfloat("model", "base_rate"),
                rate_exponent=self.getfloat("model", "rate_exponent"),
                jump_map=lambda x, s=scale: s * x,
                jump_noise=lambda rng, b=bound: float(rng.uniform(-b, b)),
                noise_bound=bound,
                contraction_beta=abs(scale),
                contraction_offset=bound,
                substeps=substeps,
            )
        alpha = self.getfloat("model", "flow_alpha")
        scale = self.getfloat("model", "jump_scale")
        if not abs(scale) <= 1.0:
            raise DomainError("model.jump_scale: |scale| must be <= 1 for pdmp")
        return PdmpModel(
            flow=lambda x, t, a=alpha: x * np.exp(-a * t),
            flow_alpha=alpha,
            flow_offset=self.getfloat("model", "flow_offset"),
            jump_rate=self.getfloat("model", "jump_rate"),
            jump_map=lambda x, s=scale: s * x,
            jump_noise_std=self.getfloat("model", "jump_noise_std"),
            substeps=substeps,
        )

    def model_tag(self) -> str:
        keys = sorted(self.values["model"])
        return "model:" + ",".join(f"{k}={self.values['model'][k]}" for k in keys)

    def reward_tag(self) -> str:
        p = self.values["problem"]
        return f"reward:{p['reward']},h={p['reward_h']}"

    def shift_targets(self) -> np.ndarray:
        return np.linspace(
            self.getfloat("problem", "shift_low"),
            self.getfloat("problem", "shift_high"),
            self.getint("problem", "shift_count"),
        )

    def build_grid(self) -> StateGrid:
        return StateGrid.uniform(
            L=self.getfloat("grid", "L"),
            n_nodes=self.getint("grid", "n_nodes"),
            weight=np.abs,
            shift_targets=self.shift_targets(),
        )

    def reward_function(self):
        h = self.getfloat("problem", "reward_h")
        if self.get("problem", "reward") == "peak":
            return lambda x: h / (1.0 + np.asarray(x) ** 2)
        return lambda x: h * np.ones_like(np.asarray(x, dtype=float))

    def cost_function(self):
        c0 = self.getfloat("problem", "cost_c0")
        if self.get("problem", "cost") == "affine":
            kappa = self.getfloat("problem", "cost_kappa")
            return lambda x, xi: c0 - kappa * abs(x - xi)
        return lambda x, xi: c0

    def build_problem(self, grid: StateGrid) -> ImpulseProblem:
        return ImpulseProblem.for_grid(
            grid=grid,
            reward=self.reward_function(),
            shift_cost=self.cost_function(),
            cost_ceiling=self.getfloat("problem", "cost_c0"),
            shift_targets=self.shift_targets(),
            delta=self.getfloat("problem", "delta"),
            weight=np.abs,
        )

    def risk_params(self):
        from .entropic import RiskParams
        return RiskParams(self.getfloat("problem", "gamma"))

    def drift_test_states(self) -> np.ndarray:
        L = self.getfloat("grid", "L")
        return np.linspace(-L, L, self.getint("verify", "drift_states"))

    def minorisation_probes(self) -> np.ndarray:
        R = self.getfloat("verify", "radius_R")
        return np.linspace(-R, R, max(5, self.getint("verify", "minorisation_probes")))
