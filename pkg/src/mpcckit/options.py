"""Option registries for the two interior-point algorithms.

Every algorithmic knob is registered here with its default, so the CLI can
validate ``--set key=value`` pairs and ``list --options`` can print the full
surface.  Option names follow the solver's published tables; a handful of
plumbing options (iteration caps, debug hooks) are registered alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

from .errors import OptionError


@dataclass(frozen=True)
class OptionSpec:
    name: str
    default: Any
    doc: str
    choices: tuple | None = None
    parse: Callable[[str], Any] | None = None


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _auto_parse(s: str):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        pass
    try:
        return _parse_bool(s)
    except ValueError:
        pass
    return s


_COMMON = [
    OptionSpec("tol", 1e-8, "Stationarity tolerance."),
    OptionSpec("max_iter", 3000, "Iteration cap."),
    OptionSpec("barrier.mu_init", 0.1, "Initial barrier parameter."),
    OptionSpec("barrier", "monotone", "Barrier update rule.",
               choices=("monotone", "loqo", "quality")),
    OptionSpec("mu_min", None, "Barrier floor; defaults to tol/10."),
    OptionSpec("kappa_epsilon", 10.0,
               "Barrier subproblem is 'solved' when its error <= kappa_epsilon*mu."),
    OptionSpec("alpha_mu", 0.2, "Monotone rule linear factor."),
    OptionSpec("beta_mu", 1.5, "Monotone rule superlinear exponent."),
    OptionSpec("loqo_classic", False,
               "Use the lower-level-only centrality measure in the LOQO mu rule."),
    OptionSpec("quality_sigma_lo", 1e-4, "Lower end of the quality-rule sigma search."),
    OptionSpec("quality_sigma_hi", 10.0, "Upper end of the quality-rule sigma search."),
    OptionSpec("q_regularization", "critical",
               "Complementarity Hessian-block regularization scheme.",
               choices=("critical", "eigenclip", "off")),
    OptionSpec("min_eig_value", 1e-8,
               "Minimum eigenvalue kept by the eigenvalue-clipping scheme."),
    OptionSpec("inertia_correction", True,
               "Enable the staged delta_w/delta_c inertia correction."),
    OptionSpec("delta_c_fixed", None,
               "Fixed dual regularization; None defers to inertia correction, "
               "0.0 forbids dual regularization entirely."),
    OptionSpec("scaled_termination", False,
               "Scale residuals by multiplier magnitude before comparing to tol "
               "(the published termination test is unscaled)."),
    OptionSpec("diverge_threshold", 1e12, "Primal-norm divergence threshold."),
    OptionSpec("time_limit", None, "Wall-clock limit in seconds (None = off)."),
    OptionSpec("restoration_max_iter", 100, "Iteration cap for one restoration phase."),
    OptionSpec("bound_push", 0.01, "Initial-point push away from bounds."),
    OptionSpec("mu_thresh", 5e-6,
               "Barrier value gating an extra KKT regularization (reserved; no-op)."),
    OptionSpec("debug_kkt_callback", None,
               "Called with (K, inertia, delta_w, delta_c) after each corrected "
               "factorization; testing hook."),
    OptionSpec("debug_quality_callback", None,
               "Called with quality-update directions each iteration; testing hook."),
]

_RELAX_ONLY = [
    OptionSpec("critical_rho_factor", 0.9999,
               "Fraction of the critical multiplier kept when clamping."),
    OptionSpec("relaxation_update", "rolloff", "Update rule for tau.",
               choices=("proportional", "rolloff", "loqo")),
    OptionSpec("sigma_mu_ratio", 1.0, "Proportional rule factor alpha_tau."),
    OptionSpec("sigma_mu_exp", 1.0, "Proportional rule exponent beta_tau."),
    OptionSpec("sigma_min", 1e-8, "Floor for tau."),
    OptionSpec("rolloff_slope", 2.0, "Rolloff rule slope a."),
    OptionSpec("rolloff_point", 1e-6, "Rolloff rule knee b."),
    OptionSpec("rolloff_max", 1.0, "Rolloff rule plateau c."),
    OptionSpec("gamma", 2.0, "LOQO rule scaling factor."),
    OptionSpec("r", 1e-8, "LOQO rule step-length parameter."),
    OptionSpec("endgame_strategy", "relax_lb", "Endgame bound-relaxation scheme.",
               choices=("relax_lb", "off")),
    OptionSpec("endgame_threshold", 1e-6,
               "KKT error below which the endgame algorithm is triggered."),
    OptionSpec("delta_max", 1e-4, "Maximum allowed lower-bound relaxation."),
    OptionSpec("tau", 0.5,
               "Exponent applied to the residual norm in the endgame trigger "
               "threshold."),
    OptionSpec("center_complementarities", True,
               "Initialize complementarity variables on the centered curve."),
    OptionSpec("centering_factor", 0.5,
               "Position along the x1 = x2 line for centered initialization."),
    OptionSpec("centering_slack_mode", "feasible",
               "Scholtes slack initialization formula.",
               choices=("feasible", "sqrt")),
]

_PENALTY_ONLY = [
    OptionSpec("critical_rho_factor", 0.99,
               "Fraction of the critical penalty kept when clamping."),
    OptionSpec("rho_0", 1.0, "Initial penalty."),
    OptionSpec("rho_max", 1e10, "Maximum penalty."),
    OptionSpec("rho_growth_rate", 10.0, "Penalty increase factor alpha_rho."),
    OptionSpec("rho_update", "static", "Penalty update rule.",
               choices=("static", "dynamic")),
    OptionSpec("gamma", 0.4, "Exponent in the dynamic penalty update trigger."),
    OptionSpec("comp_history_length", 10,
               "Ring-buffer length for complementarity history."),
    OptionSpec("eta_dynamic_update", 0.99,
               "Required complementarity decrease for the dynamic trigger."),
]


def _build(table):
    registry = {}
    for spec in table:
        registry[spec.name] = spec
    return registry


RELAXATION_OPTIONS = _build(_COMMON + _RELAX_ONLY)
PENALTY_OPTIONS = _build(_COMMON + _PENALTY_ONLY)


def registry_for(algorithm: str):
    if algorithm == "relaxation":
        return RELAXATION_OPTIONS
    if algorithm == "penalty":
        return PENALTY_OPTIONS
    raise OptionError(f"unknown algorithm {algorithm!r}")


def resolve(algorithm: str, overrides: dict | None = None) -> dict:
    """Merge user overrides into the defaults, validating keys and choices."""
    registry = registry_for(algorithm)
    opts = {name: spec.default for name, spec in registry.items()}
    for key, value in (overrides or {}).items():
        if key not in registry:
            raise OptionError(f"unknown option {key!r} for algorithm {algorithm!r}")
        spec = registry[key]
        if isinstance(value, str) and spec.choices is None and not isinstance(spec.default, str):
            value = _auto_parse(value)
        if spec.choices is not None and value not in spec.choices:
            raise OptionError(
                f"option {key!r} must be one of {spec.choices}, got {value!r}"
            )
        opts[key] = value
    if opts["mu_min"] is None:
        opts["mu_min"] = opts["tol"] / 10.0
    if opts["delta_c_fixed"] is not None and not isinstance(opts["delta_c_fixed"], float):
        opts["delta_c_fixed"] = float(opts["delta_c_fixed"])
    for key in ("tol", "barrier.mu_init", "mu_min"):
        v = opts[key]
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise OptionError(f"option {key!r} must be a positive number, got {v!r}")
    return opts


def parse_cli_value(algorithm: str, key: str, raw: str):
    """Parse a ``--set key=value`` string against the registry."""
    registry = registry_for(algorithm)
    if key not in registry:
        raise OptionError(f"unknown option {key!r}")
    spec = registry[key]
    if spec.parse is not None:
        return spec.parse(raw)
    if spec.choices is not None:
        if raw not in spec.choices:
            raise OptionError(f"option {key!r} must be one of {spec.choices}, got {raw!r}")
        return raw
    if isinstance(spec.default, bool):
        return _parse_bool(raw)
    if isinstance(spec.default, int) and not isinstance(spec.default, bool):
        return int(raw)
    if isinstance(spec.default, float):
        return float(raw)
    if spec.default is None:
        return _auto_parse(raw)
    return raw
