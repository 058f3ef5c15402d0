"""
Experiment configuration: a versioned YAML tree validated before dispatch.

Example::

    schema_version: 1
    potential: {family: coulomb, kappa: 1.0, r0: 0.05}
    d: 3
    m: 1
    epsilon: 0.5
    lambda: 0.0
    seed: 20240101
    profile: quick

Unknown keys are rejected and every violated field is reported at once.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, DomainError
from .potentials import FAMILIES, PotentialModel, from_spec

SCHEMA_VERSION = 1
PROFILES = ("quick", "full")

_POTENTIAL_KEYS = {"family", "kappa", "alpha", "delta", "r0", "width"}
_TOLERANCE_DEFAULTS = {
    "ort": 1e-12,
    "eikonal": 1e-6,
    "laplacian": 1e-6,
    "mourre_slack": -1e-8,
    "transport_residual": 1e-3,
    "airy": 1e-6,
    "slope_band": 0.3,
    "gamma": 1e-8,
    "elebnd": 1e-10,
    "exponent_band": 0.05,
    "coefficient_rel": 0.05,
    "phase": 0.1,
    "drift": 0.02,
    "born_rel": 0.1,
}
_GRID_DEFAULTS = {
    "n_points": 10000,
    "flow_time": 100.0,
    "flow_steps": 401,
    "transport_points": 100,
    "x_list": [25.0, 100.0, 400.0, 1600.0],
    "omega": 1.2,
    "y_min": 0.02,
    "y_max": 2000.0,
    "born_scale": 100.0,
    "born_R": 1.5,
}
_SCALAR_DEFAULTS = {"d": 3, "m": 1, "epsilon": 0.5, "lambda": 0.0, "seed": 20240101}
_TOP_KEYS = {"schema_version", "potential", "d", "m", "epsilon", "lambda", "seed", "profile",
             "tolerances", "grids", "output"}


@dataclass
class ExperimentConfig:
    potential: PotentialModel = field(default_factory=PotentialModel)
    d: int = 3
    m: int = 1
    epsilon: float = 0.5
    lam: float = 0.0
    seed: int = 20240101
    profile: str = "quick"
    tolerances: dict = field(default_factory=lambda: dict(_TOLERANCE_DEFAULTS))
    grids: dict = field(default_factory=lambda: copy.deepcopy(_GRID_DEFAULTS))
    output: str = "out"

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "potential": self.potential.to_dict(),
            "d": self.d,
            "m": self.m,
            "epsilon": self.epsilon,
            "lambda": self.lam,
            "seed": self.seed,
            "profile": self.profile,
            "tolerances": dict(self.tolerances),
            "grids": copy.deepcopy(self.grids),
            "output": self.output,
        }

    def dump(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping", ["<root>"])
        bad = []
        msgs = []

        def fail(name, msg):
            bad.append(name)
            msgs.append(f"{name}: {msg}")

        for key in sorted(set(data) - _TOP_KEYS):
            fail(key, "unknown key")
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            fail("schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")

        pot = data.get("potential", {"family": "coulomb"})
        potential = PotentialModel()
        if isinstance(pot, str):
            pot = {"family": pot}
        if not isinstance(pot, dict):
            fail("potential", "must be a mapping")
        else:
            for key in sorted(set(pot) - _POTENTIAL_KEYS):
                fail(f"potential.{key}", "unknown key")
            if pot.get("family", "coulomb") not in FAMILIES:
                fail("potential.family", f"must be one of {FAMILIES}")
            elif not set(pot) - _POTENTIAL_KEYS:
                try:
                    potential = from_spec(pot)
                except (DomainError, TypeError, ValueError) as exc:
                    fail("potential", str(exc))

        def number(name, kind, check, why):
            val = data.get(name, _SCALAR_DEFAULTS[name])
            try:
                if kind is int and (isinstance(val, bool) or int(val) != val):
                    raise ValueError
                val = kind(val)
            except (TypeError, ValueError):
                fail(name, f"must be {kind.__name__}")
                return None
            if not check(val):
                fail(name, why)
            return val

        d = number("d", int, lambda v: v in (2, 3), "must be 2 or 3")
        m = number("m", int, lambda v: v >= 1, "must be a positive integer")
        eps = number("epsilon", float, lambda v: 0 < v < 1, "must lie in (0, 1)")
        lam = number("lambda", float, lambda v: abs(v) < 1e6, "must be finite")
        seed = number("seed", int, lambda v: 0 <= v < 2**64, "must be a 64-bit unsigned integer")
        profile = data.get("profile", "quick")
        if profile not in PROFILES:
            fail("profile", f"must be one of {PROFILES}")

        tol = dict(_TOLERANCE_DEFAULTS)
        for key, val in (data.get("tolerances") or {}).items():
            if key not in tol:
                fail(f"tolerances.{key}", "unknown key")
            elif not isinstance(val, (int, float)) or isinstance(val, bool):
                fail(f"tolerances.{key}", "must be a number")
            else:
                tol[key] = float(val)
        grids = copy.deepcopy(_GRID_DEFAULTS)
        for key, val in (data.get("grids") or {}).items():
            if key not in grids:
                fail(f"grids.{key}", "unknown key")
            elif isinstance(grids[key], list):
                if not isinstance(val, list) or not all(isinstance(v, (int, float)) for v in val):
                    fail(f"grids.{key}", "must be a list of numbers")
                else:
                    grids[key] = [float(v) for v in val]
            elif not isinstance(val, (int, float)) or isinstance(val, bool) or val <= 0:
                fail(f"grids.{key}", "must be a positive number")
            else:
                grids[key] = type(grids[key])(val)
        output = data.get("output", "out")
        if not isinstance(output, str):
            fail("output", "must be a path string")
        if bad:
            raise ConfigError("invalid config: " + "; ".join(msgs), bad)
        return cls(potential, d, m, eps, lam, seed, profile, tol, grids, output)

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}", ["<file>"]) from exc
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML in {path}: {exc}", ["<file>"]) from exc
        return cls.from_dict(data)


def make_rng(seed):
    """Counter-based generator (Philox) so sweeps do not depend on worker order."""
    return np.random.Generator(np.random.Philox(int(seed)))
