"""Run configuration: parsing, validation and initial conditions.

Configurations are INI-style ``key = value`` text. Section headers are
optional and purely organisational: every key has a single global name, so
``gamma`` may appear at the top or under ``[physics]``. Lists are comma
separated. Unknown keys are rejected so typos do not silently fall back to
defaults.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace

from .admissible import two_bump
from .checkpoint import read_checkpoint
from .distribution import Distribution
from .equilibrium import epsilon_sat, evaluate_equilibrium, saturated_state, solve_fermi_dirac
from .errors import ConfigurationError, ParseError, ValidationError
from .grid import VelocityGrid

__all__ = ["SimulationConfig", "InitialSpec", "parse_config", "initial_condition", "INITIAL_KINDS"]

INITIAL_KINDS = ("equilibrium", "saturated", "two-bump", "from-checkpoint")
SCHEMES = ("euler", "rk2")
BACKENDS = ("fft", "direct")
ROOT = "__root__"


@dataclass(frozen=True)
class InitialSpec:
    kind: str = "equilibrium"
    separation: float = 2.0
    width: float = 0.7
    path: str | None = None
    rho: float = 1.0
    u: tuple = (0.0, 0.0, 0.0)
    theta: float = 1.0


@dataclass(frozen=True)
class SimulationConfig:
    gamma: float
    epsilon: float = 0.0
    R: float = 6.0
    N: int = 17
    nu: float | str = "auto"
    cfl: float = 0.4
    scheme: str = "rk2"
    t_final: float = 1.0
    diagnostics_every: int = 20
    snapshot_every: int = 0
    s_list: tuple = (0.0, 2.0, 3.0, 4.0)
    eta_list: tuple = (0.0, 1.0, 2.0)
    p_list: tuple = (2.0,)
    exp_moment: tuple | None = None
    initial: InitialSpec = field(default_factory=InitialSpec)
    output: str = "out"
    seed: int = 0
    threads: int = 1
    backend: str = "fft"
    collisions: bool = True
    clip: bool = False
    max_pair_n: int = 33
    trials: int = 100
    convergence_n: tuple = (17, 25, 33)
    convergence_nu: float = 0.01

    @property
    def grid(self) -> VelocityGrid:
        return VelocityGrid(self.R, self.N)

    @property
    def nu_value(self) -> float:
        """Regularization parameter; ``"auto"`` resolves to the grid spacing."""
        return self.grid.h if self.nu == "auto" else float(self.nu)

    def with_overrides(self, **kw) -> "SimulationConfig":
        return replace(self, **kw)


# key -> (parser, target) where target is a config field or "initial.<field>"
def _float(key, text):
    try:
        x = float(text)
    except ValueError as exc:
        raise ValidationError(key, f"not a number: {text!r}") from exc
    if not math.isfinite(x):
        raise ValidationError(key, f"not finite: {text!r}")
    return x


def _int(key, text):
    try:
        return int(text)
    except ValueError as exc:
        raise ValidationError(key, f"not an integer: {text!r}") from exc


def _bool(key, text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValidationError(key, f"not a boolean: {text!r}")


def _floats(key, text):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    return tuple(_float(key, p) for p in parts)


def _ints(key, text):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    return tuple(_int(key, p) for p in parts)


def _str(key, text):
    return text.strip()


def _nu(key, text):
    return "auto" if text.strip().lower() == "auto" else _float(key, text)


def _exp(key, text):
    if not text.strip() or text.strip().lower() == "none":
        return None
    vals = _floats(key, text)
    if len(vals) != 2:
        raise ValidationError(key, "expected 'a, q'")
    return vals


KEYS = {
    "gamma": (_float, "gamma"),
    "epsilon": (_float, "epsilon"),
    "r": (_float, "R"),
    "n": (_int, "N"),
    "nu": (_nu, "nu"),
    "cfl": (_float, "cfl"),
    "scheme": (_str, "scheme"),
    "t_final": (_float, "t_final"),
    "diagnostics_every": (_int, "diagnostics_every"),
    "snapshot_every": (_int, "snapshot_every"),
    "s_list": (_floats, "s_list"),
    "eta_list": (_floats, "eta_list"),
    "p_list": (_floats, "p_list"),
    "exp_moment": (_exp, "exp_moment"),
    "output": (_str, "output"),
    "seed": (_int, "seed"),
    "threads": (_int, "threads"),
    "backend": (_str, "backend"),
    "collisions": (_bool, "collisions"),
    "clip": (_bool, "clip"),
    "max_pair_n": (_int, "max_pair_n"),
    "trials": (_int, "trials"),
    "convergence_n": (_ints, "convergence_n"),
    "convergence_nu": (_float, "convergence_nu"),
    "initial": (_str, "initial.kind"),
    "separation": (_float, "initial.separation"),
    "width": (_float, "initial.width"),
    "checkpoint": (_str, "initial.path"),
    "rho": (_float, "initial.rho"),
    "u": (_floats, "initial.u"),
    "theta": (_float, "initial.theta"),
}


def _read(text: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__",
                                       inline_comment_prefixes=("#", ";"))
    parser.optionxform = str.lower
    try:
        parser.read_string(f"[{ROOT}]\n" + text)
    except configparser.Error as exc:
        raise ParseError(str(exc)) from exc
    flat: dict = {}
    for section in parser.sections():
        for key, value in parser.items(section, raw=True):
            if key in flat:
                raise ParseError(f"key {key!r} given more than once")
            flat[key] = value
    return flat


def parse_config(text: str) -> SimulationConfig:
    """Parse and validate a configuration text.

    Raises
    ------
    ParseError
        On malformed text or a repeated key.
    ValidationError
        On a missing, unknown or out-of-range key; ``.key`` names it.
    """
    flat = _read(text)
    top, init = {}, {}
    for key, value in flat.items():
        if key not in KEYS:
            raise ValidationError(key, "unknown key")
        conv, target = KEYS[key]
        if not value.strip() and key != "exp_moment":
            raise ValidationError(key, "empty value")
        parsed = conv(key, value)
        if target.startswith("initial."):
            init[target.split(".", 1)[1]] = parsed
        else:
            top[target] = parsed
    if "gamma" not in top:
        raise ValidationError("gamma", "required")
    cfg = SimulationConfig(**top, initial=InitialSpec(**init))
    validate(cfg)
    return cfg


def validate(cfg: SimulationConfig) -> None:
    """Check ranges; raises :class:`ValidationError` naming the first offending key."""
    if not (-2.0 < cfg.gamma < 0.0):
        raise ValidationError("gamma", f"must lie in (-2, 0), got {cfg.gamma}")
    if cfg.epsilon < 0:
        raise ValidationError("epsilon", f"must be nonnegative, got {cfg.epsilon}")
    ini = cfg.initial
    if ini.rho <= 0:
        raise ValidationError("rho", "must be positive")
    if ini.theta <= 0:
        raise ValidationError("theta", "must be positive")
    if len(ini.u) != 3:
        raise ValidationError("u", "expected three components")
    if ini.kind not in INITIAL_KINDS:
        raise ValidationError("initial", f"expected one of {INITIAL_KINDS}, got {ini.kind!r}")
    if ini.kind == "saturated":
        if cfg.epsilon <= 0:
            raise ValidationError("epsilon", "a saturated initial state needs epsilon > 0")
    elif cfg.epsilon >= epsilon_sat(ini.rho, ini.theta):
        raise ValidationError("epsilon", f"must be below eps_sat = {epsilon_sat(ini.rho, ini.theta):.6g}")
    if ini.kind == "from-checkpoint" and not ini.path:
        raise ValidationError("checkpoint", "from-checkpoint needs a checkpoint path")
    if ini.width <= 0:
        raise ValidationError("width", "must be positive")
    if cfg.R <= 0:
        raise ValidationError("r", "must be positive")
    if cfg.N < 8:
        raise ValidationError("n", "need at least 8 points per axis")
    nu = cfg.nu_value
    if not (0 < nu <= 1):
        raise ValidationError("nu", f"must lie in (0, 1], got {nu:.6g}")
    if not (0 < cfg.cfl <= 1):
        raise ValidationError("cfl", f"must lie in (0, 1], got {cfg.cfl}")
    if cfg.scheme not in SCHEMES:
        raise ValidationError("scheme", f"expected one of {SCHEMES}")
    if cfg.backend not in BACKENDS:
        raise ValidationError("backend", f"expected one of {BACKENDS}")
    if cfg.t_final < 0:
        raise ValidationError("t_final", "must be nonnegative")
    if cfg.diagnostics_every < 1:
        raise ValidationError("diagnostics_every", "must be >= 1")
    if cfg.snapshot_every < 0:
        raise ValidationError("snapshot_every", "must be >= 0")
    if cfg.threads < 0:
        raise ValidationError("threads", "must be >= 0")
    if cfg.trials < 1:
        raise ValidationError("trials", "must be >= 1")
    if any(p < 1 for p in cfg.p_list):
        raise ValidationError("p_list", "norm exponents must be >= 1")
    if any(e < -2 for e in cfg.eta_list):
        raise ValidationError("eta_list", "kernel exponents must be >= -2")
    if cfg.exp_moment is not None:
        a, q = cfg.exp_moment
        if not (a > 0 and 0 < q < 1):
            raise ValidationError("exp_moment", "need a > 0 and 0 < q < 1")
    if len(cfg.convergence_n) < 2 or any(n < 8 for n in cfg.convergence_n):
        raise ValidationError("convergence_n", "need at least two grids with N >= 8")
    if not (0 < cfg.convergence_nu <= 1):
        raise ValidationError("convergence_nu", "must lie in (0, 1]")


def initial_condition(spec: InitialSpec, grid: VelocityGrid, epsilon: float) -> Distribution:
    """Initial distribution on ``grid``.

    ``equilibrium`` samples the Fermi-Dirac state; ``two-bump`` is moment
    corrected to ``(rho, u, theta)``; ``saturated`` is the indicator state of
    mass ``rho``; ``from-checkpoint`` reads a file (a differing header
    epsilon is logged and ``epsilon`` wins).

    Raises
    ------
    ValidationError, CheckpointCorrupt, MomentCorrectionFailed
    """
    if spec.kind == "equilibrium":
        eq = solve_fermi_dirac(spec.rho, spec.u, spec.theta, epsilon)
        return evaluate_equilibrium(eq, grid)
    if spec.kind == "two-bump":
        return two_bump(grid, epsilon, spec.separation, spec.width, spec.rho, spec.u, spec.theta)
    if spec.kind == "saturated":
        if epsilon <= 0:
            raise ValidationError("epsilon", "a saturated initial state needs epsilon > 0")
        return saturated_state(spec.rho, spec.u, epsilon, grid)
    if spec.kind == "from-checkpoint":
        ck = read_checkpoint(spec.path, epsilon=epsilon)
        if ck.distribution.grid != grid:
            raise ConfigurationError(
                f"checkpoint grid (R={ck.distribution.grid.extent}, N={ck.distribution.grid.n}) "
                f"differs from the configured grid (R={grid.extent}, N={grid.n})")
        return ck.distribution
    raise ValidationError("initial", f"unknown initial condition {spec.kind!r}")
