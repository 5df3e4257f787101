"""Run configuration: INI-style parsing, validation, canonical serialization.

A run document has three flat sections::

    [lattice]     k, a, b, kappa, mu, num_sites
    [integrator]  scheme, dt, fast_resolution, t_star, sample_dt
    [experiment]  levels, mu_grid, seed, output_dir

Every key is optional (defaults below); unknown sections or keys are
rejected with their location.  ``serialize_config`` emits a canonical
document whose reparse compares equal, and whose hash stamps every output
artifact.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, replace
from typing import Dict, Tuple

from .core import LatticeParams, Potential
from .dynamics import StepPolicy
from .errors import ConfigParseError, ValidationError
from .experiments import DEFAULT_MU_GRID, ExperimentConfig


@dataclass(frozen=True)
class RunConfig:
    """Fully validated configuration of one CLI invocation."""

    params: LatticeParams
    policy: StepPolicy
    t_star: float = 10.0
    sample_dt: float = 0.1
    levels: Tuple[int, ...] = (0, 1, 2)
    mu_grid: Tuple[float, ...] = DEFAULT_MU_GRID
    seed: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        if not (self.t_star > 0):
            raise ValidationError("t_star must be > 0")
        if not (self.sample_dt > 0):
            raise ValidationError("sample_dt must be > 0")
        if any(lv not in (0, 1, 2) for lv in self.levels):
            raise ValidationError("levels must be chosen from 0, 1, 2")
        if len(set(self.levels)) != len(self.levels):
            raise ValidationError("levels must not repeat")
        if any(m <= 0 for m in self.mu_grid):
            raise ValidationError("mu_grid values must be > 0")
        if list(self.mu_grid) != sorted(set(self.mu_grid), reverse=True):
            raise ValidationError("mu_grid must be strictly decreasing")

    def experiment_config(self) -> ExperimentConfig:
        return ExperimentConfig(
            kappa=self.params.kappa,
            potential=self.params.potential,
            num_sites=self.params.num_sites,
            t_star=self.t_star,
            sample_dt=self.sample_dt,
            policy=self.policy,
        )


def default_config() -> RunConfig:
    return RunConfig(
        params=LatticeParams(
            kappa=1.0,
            mu=1e-2,
            potential=Potential(k=1.0, a=1.0, b=0.0),
            num_sites=256,
        ),
        policy=StepPolicy(),
    )


# key -> (section-local name, parser)
def _parse_float(s: str) -> float:
    return float(s)


def _parse_int(s: str) -> int:
    f = float(s)
    i = int(f)
    if f != i:
        raise ValueError(f"{s!r} is not an integer")
    return i


def _parse_str(s: str) -> str:
    return s.strip()


def _parse_int_list(s: str) -> Tuple[int, ...]:
    return tuple(_parse_int(tok) for tok in s.split(",") if tok.strip())


def _parse_float_list(s: str) -> Tuple[float, ...]:
    return tuple(float(tok) for tok in s.split(",") if tok.strip())


_SCHEMA: Dict[str, Dict[str, object]] = {
    "lattice": {
        "k": _parse_float,
        "a": _parse_float,
        "b": _parse_float,
        "kappa": _parse_float,
        "mu": _parse_float,
        "num_sites": _parse_int,
    },
    "integrator": {
        "scheme": _parse_str,
        "dt": _parse_float,
        "fast_resolution": _parse_float,
        "t_star": _parse_float,
        "sample_dt": _parse_float,
    },
    "experiment": {
        "levels": _parse_int_list,
        "mu_grid": _parse_float_list,
        "seed": _parse_int,
        "output_dir": _parse_str,
    },
}


def parse_config(text: str) -> RunConfig:
    """Parse and validate an INI document into a ``RunConfig``.

    Parse failures carry a line number; unknown keys and invariant
    violations name the offending location or rule.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if getattr(exc, "errors", None) else None
        raise ConfigParseError(f"config parse error: {exc}", line=line) from exc
    except configparser.Error as exc:
        raise ConfigParseError(f"config parse error: {exc}") from exc

    values: Dict[str, Dict[str, object]] = {sec: {} for sec in _SCHEMA}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ValidationError(f"unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in _SCHEMA[sec]:
                raise ValidationError(f"unknown key [{sec}] {key}")
            try:
                values[sec][key] = _SCHEMA[sec][key](raw)
            except ValueError as exc:
                raise ValidationError(f"bad value for [{sec}] {key}: {exc}") from exc

    base = default_config()
    lat = values["lattice"]
    integ = values["integrator"]
    expt = values["experiment"]

    potential = Potential(
        k=lat.get("k", base.params.potential.k),
        a=lat.get("a", base.params.potential.a),
        b=lat.get("b", base.params.potential.b),
    )
    params = LatticeParams(
        kappa=lat.get("kappa", base.params.kappa),
        mu=lat.get("mu", base.params.mu),
        potential=potential,
        num_sites=lat.get("num_sites", base.params.num_sites),
    )
    policy = StepPolicy(
        scheme=integ.get("scheme", base.policy.scheme),
        dt=integ.get("dt", base.policy.dt),
        fast_resolution=integ.get("fast_resolution", base.policy.fast_resolution),
    )
    mu_grid = expt.get("mu_grid", base.mu_grid)
    mu_grid = tuple(sorted(set(mu_grid), reverse=True))
    return RunConfig(
        params=params,
        policy=policy,
        t_star=integ.get("t_star", base.t_star),
        sample_dt=integ.get("sample_dt", base.sample_dt),
        levels=tuple(expt.get("levels", base.levels)),
        mu_grid=mu_grid,
        seed=expt.get("seed", base.seed),
        output_dir=expt.get("output_dir", base.output_dir),
    )


def parse_config_file(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(cfg: RunConfig) -> str:
    """Canonical INI form; ``parse_config`` of the result compares equal."""
    out = io.StringIO()
    pot = cfg.params.potential
    out.write("[lattice]\n")
    out.write(f"k = {pot.k!r}\n")
    out.write(f"a = {pot.a!r}\n")
    out.write(f"b = {pot.b!r}\n")
    out.write(f"kappa = {cfg.params.kappa!r}\n")
    out.write(f"mu = {cfg.params.mu!r}\n")
    out.write(f"num_sites = {cfg.params.num_sites}\n")
    out.write("\n[integrator]\n")
    out.write(f"scheme = {cfg.policy.scheme}\n")
    out.write(f"dt = {cfg.policy.dt!r}\n")
    out.write(f"fast_resolution = {cfg.policy.fast_resolution!r}\n")
    out.write(f"t_star = {cfg.t_star!r}\n")
    out.write(f"sample_dt = {cfg.sample_dt!r}\n")
    out.write("\n[experiment]\n")
    out.write("levels = " + ",".join(str(lv) for lv in cfg.levels) + "\n")
    out.write("mu_grid = " + ",".join(repr(m) for m in cfg.mu_grid) + "\n")
    out.write(f"seed = {cfg.seed}\n")
    out.write(f"output_dir = {cfg.output_dir}\n")
    return out.getvalue()


def config_hash(cfg: RunConfig) -> str:
    """Hex digest identifying the effective configuration."""
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()[:16]


def with_overrides(cfg: RunConfig, *, mu=None, seed=None, output_dir=None) -> RunConfig:
    """Apply CLI flag overrides, revalidating the result."""
    if mu is not None:
        cfg = replace(cfg, params=replace(cfg.params, mu=mu))
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if output_dir is not None:
        cfg = replace(cfg, output_dir=str(output_dir))
    return cfg
