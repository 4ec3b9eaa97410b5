"""Run configuration: one JSON document per experiment.

Schema:

    {
      "model": {"variant": "separable_quadratic",
                "alpha": 1.0, "V": "-0.25", "lambda": "sin(x)"}
               or {"variant": "general", "H": "p^2 + sin(x)*u - 0.25"},
      "grid": {"n": 512},
      "numerics": {"tau": 0.0625, "v_max": 8.0, "u_clip": 1e4,
                   "tol": 1e-5, "t_max": 80.0, "window": 2.0,
                   "char_tol": 0.05, "class_tol": 5e-3,
                   "accept_tol": 1e-2, "seed": 0},
      "phi": "0.2*sin(x)",
      "out": "results"
    }

The time step is shrunk automatically (with a notice) whenever
tau * Lambda > 1/2 for the configured model.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field

from . import expr as ex
from .geometry import PeriodicGrid, ScalarField
from .model import ContactModel
from .variational import LaxParams

NUMERIC_DEFAULTS = {
    "tau": 1.0 / 16.0,
    "v_max": 8.0,
    "u_clip": 1e4,
    "tol": 1e-5,
    "t_max": 80.0,
    "window": 2.0,
    "char_tol": 0.05,
    "class_tol": 5e-3,
    "accept_tol": 1e-2,
    "seed": 0,
}

EX63_CONFIG = {
    "model": {"variant": "separable_quadratic", "alpha": 1.0,
              "V": "-0.25", "lambda": "sin(x)"},
    "grid": {"n": 512},
    "numerics": {},
    "phi": "0.2*sin(x)",
    "out": "out",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: ContactModel
    grid: PeriodicGrid
    numerics: dict
    phi_source: str | None
    out_dir: str
    config_hash: str
    notices: list[str] = field(default_factory=list)

    @property
    def tau(self) -> float:
        return self.numerics["tau"]

    def lax_params(self) -> LaxParams:
        return LaxParams(grid=self.grid, tau=self.tau,
                         v_max=self.numerics["v_max"],
                         u_clip=self.numerics["u_clip"])

    def phi_field(self, source: str | None = None) -> ScalarField:
        src = source if source is not None else self.phi_source
        if src is None:
            raise ConfigError("no initial field: pass --phi or set 'phi' in the config")
        tree = ex.parse_expression(src)
        bad = ex.free_variables(tree) - {"x"}
        if bad:
            raise ConfigError(f"initial field may depend on x only, found {sorted(bad)}")
        import numpy as np

        vals = ex.evaluate(tree, x=self.grid.nodes) * np.ones(self.grid.n)
        return ScalarField(self.grid, vals)


def _build_model(spec: dict) -> ContactModel:
    variant = spec.get("variant", "separable_quadratic")
    v_max = float(spec.get("v_max", 8.0))
    if variant == "separable_quadratic":
        return ContactModel.separable_quadratic(
            float(spec.get("alpha", 1.0)),
            spec.get("V", "0"),
            spec.get("lambda", "0"),
            v_max=v_max)
    if variant == "general":
        if "H" not in spec:
            raise ConfigError("general model requires an 'H' expression")
        return ContactModel.general(spec["H"], v_max=v_max)
    raise ConfigError(f"unknown model variant {variant!r}")


def config_from_dict(doc: dict, raw_bytes: bytes | None = None) -> RunConfig:
    if raw_bytes is None:
        raw_bytes = json.dumps(doc, sort_keys=True).encode()
    digest = hashlib.sha256(raw_bytes).hexdigest()
    try:
        model = _build_model(doc.get("model", {}))
    except (ex.ExprSyntaxError, ex.ExprNameError) as err:
        raise ConfigError(f"model expression: {err}") from err
    grid = PeriodicGrid(int(doc.get("grid", {}).get("n", 512)))
    numerics = dict(NUMERIC_DEFAULTS)
    numerics.update(doc.get("numerics", {}))
    for key, value in numerics.items():
        if key != "seed" and value <= 0:
            raise ConfigError(f"numerics entry {key!r} must be positive")
    notices = []
    lam = model.u_lipschitz_bound()
    if numerics["tau"] * lam > 0.5:
        old = numerics["tau"]
        numerics["tau"] = 0.45 / lam
        notices.append(
            f"tau shrunk from {old:.6g} to {numerics['tau']:.6g} to keep "
            f"tau*Lambda <= 1/2 (Lambda = {lam:.6g})")
    return RunConfig(model=model, grid=grid, numerics=numerics,
                     phi_source=doc.get("phi"), out_dir=doc.get("out", "out"),
                     config_hash=digest, notices=notices)


def load_config(path: str) -> RunConfig:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    cfg = config_from_dict(doc, raw_bytes=raw)
    for note in cfg.notices:
        print(f"notice: {note}", file=sys.stderr)
    return cfg
