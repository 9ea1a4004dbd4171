"""
Physical parameters of the hybrid atom-optomechanical system.

Every rate and frequency is stored as a dimensionless multiple of the bare
mechanical frequency ``omega_m``; the only quantities kept in SI units are
``omega_m`` itself (rad/s) and the drive power (W). The two SI crossings are
:func:`drive_amplitude` and :func:`thermal_occupation`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .steady_state import LinearizedParams, SteadyAmplitudes

# CODATA 2018 exact values
HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K

DEFAULT_MUCH_GREATER = 5.0


class ParameterError(ValueError):
    """Raised for physically invalid or malformed parameters."""


@dataclass(frozen=True)
class PhysicalParams:
    omega_m: float
    omega_a: float
    delta_a: float
    delta_c: float
    g0_collective: float
    g_single: float
    eta: float
    kappa: float
    gamma_c: float
    gamma_m: float
    drive_power: float
    n_th: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ParameterError(f"{f.name} must be finite, got {value!r}")
        if self.omega_m <= 0:
            raise ParameterError("omega_m must be positive")
        for name in ("kappa", "gamma_c", "gamma_m"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")
        for name in ("eta", "n_th", "drive_power"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be non-negative")

    def with_(self, **changes) -> PhysicalParams:
        return replace(self, **changes)


def drive_amplitude(p: PhysicalParams) -> float:
    """Drive strength Omega_d = sqrt(2 P kappa / (hbar omega_d)) in units of omega_m.

    ``omega_d`` is the laser frequency ``omega_a + delta_a``.
    """
    if p.drive_power < 0:
        raise ParameterError("drive_power must be non-negative")
    laser = p.omega_a + p.delta_a
    if laser <= 0:
        raise ParameterError("drive frequency omega_a + delta_a must be positive")
    kappa_si = p.kappa * p.omega_m
    omega_d_si = laser * p.omega_m
    with_units = math.sqrt(2.0 * p.drive_power * kappa_si / (HBAR * omega_d_si))
    value = with_units / p.omega_m
    if not math.isfinite(value):
        raise ParameterError(f"drive amplitude is not finite ({value!r})")
    return value


def thermal_occupation(temperature: float, p: PhysicalParams) -> float:
    """Bose occupation of the mechanical bath at ``temperature`` kelvin."""
    if not temperature > 0:
        raise ParameterError("temperature must be positive")
    x = HBAR * p.omega_m / (K_B * temperature)
    return 1.0 / math.expm1(x)


def temperature_for_occupation(n_th: float, p: PhysicalParams) -> float:
    """Inverse of :func:`thermal_occupation`."""
    if not n_th > 0:
        raise ParameterError("n_th must be positive to define a temperature")
    return HBAR * p.omega_m / (K_B * math.log1p(1.0 / n_th))


# --------------------------------------------------------------------------
# presets and config files

_TWO_PI = 2.0 * math.pi
_OMEGA_M_SI = _TWO_PI * 5e6
_OMEGA_A_RATIO = (_TWO_PI * 500e12) / _OMEGA_M_SI

PRESETS: dict[str, PhysicalParams] = {
    "fig2_high_kappa": PhysicalParams(
        omega_m=_OMEGA_M_SI,
        omega_a=_OMEGA_A_RATIO,
        delta_a=2.0,
        delta_c=1.0,
        g0_collective=0.5,
        g_single=1e-2,
        eta=1e-4,
        kappa=10.0,
        gamma_c=0.1,
        gamma_m=1e-6,
        drive_power=2.4e-6,
        n_th=1.0,
    ),
    "fig4_low_kappa": PhysicalParams(
        omega_m=_OMEGA_M_SI,
        omega_a=_OMEGA_A_RATIO,
        delta_a=-0.25,
        delta_c=0.01,
        g0_collective=0.05,
        g_single=1e-3,
        eta=1e-4,
        kappa=0.1,
        gamma_c=0.1,
        gamma_m=1e-6,
        drive_power=0.38e-6,
        n_th=1.0,
    ),
}

# Presets whose regime report includes the kappa >> omega_m condition.
HIGH_KAPPA_PRESETS = {"fig2_high_kappa"}

_FIELD_NAMES = {f.name for f in fields(PhysicalParams)}
# fields that are natively SI: their plain key is the SI value
_SI_NATIVE = {"omega_m", "drive_power"}


def preset(name: str) -> PhysicalParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise ParameterError(
            f"unknown preset {name!r}; choose from {sorted(PRESETS)}"
        ) from None


def parse_params_text(text: str, base: PhysicalParams | None = None) -> PhysicalParams:
    """Parse ``name = value`` lines into :class:`PhysicalParams`.

    Keys without suffix are in units of omega_m (omega_m and drive_power are
    natively SI: rad/s and W). A ``_si`` suffix gives the value in SI units
    (rad/s for rates) and it is converted using omega_m. ``temperature_si``
    (kelvin) sets ``n_th``. Blank lines and ``#`` comments are ignored. Missing
    keys are taken from ``base``.
    """
    raw: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"line {lineno}: expected 'name = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            raw[key] = float(value)
        except ValueError:
            raise ParameterError(f"line {lineno}: cannot parse {value!r} as a number") from None

    values: dict[str, float] = {}
    if base is not None:
        values.update({f.name: getattr(base, f.name) for f in fields(base)})

    if "omega_m_si" in raw:
        values["omega_m"] = raw.pop("omega_m_si")
    if "omega_m" in raw:
        values["omega_m"] = raw.pop("omega_m")
    if "omega_m" not in values:
        raise ParameterError("omega_m (rad/s) is required")
    omega_m = values["omega_m"]

    temperature = raw.pop("temperature_si", None)
    for key, value in raw.items():
        if key.endswith("_si"):
            name = key[:-3]
            if name not in _FIELD_NAMES:
                raise ParameterError(f"unknown parameter {key!r}")
            values[name] = value if name in _SI_NATIVE or name == "n_th" else value / omega_m
        elif key in _FIELD_NAMES:
            values[key] = value
        else:
            raise ParameterError(f"unknown parameter {key!r}")

    missing = _FIELD_NAMES - set(values) - {"n_th"}
    if missing:
        raise ParameterError(f"missing parameters: {sorted(missing)}")
    p = PhysicalParams(**values)
    if temperature is not None:
        p = p.with_(n_th=thermal_occupation(temperature, p))
    return p


def load_params(path: str | Path, base: PhysicalParams | None = None) -> PhysicalParams:
    return parse_params_text(Path(path).read_text(), base=base)


def format_params(p: PhysicalParams) -> str:
    """Inverse of :func:`parse_params_text` (lossless ``repr`` floats)."""
    lines = []
    for f in fields(p):
        key = f.name + ("_si" if f.name in _SI_NATIVE else "")
        lines.append(f"{key} = {getattr(p, f.name)!r}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# regime checks


@dataclass(frozen=True)
class Condition:
    name: str
    lhs: float
    rhs: float
    satisfied: bool
    margin: float
    note: str = ""


@dataclass(frozen=True)
class RegimeReport:
    conditions: tuple[Condition, ...]
    threshold: float = DEFAULT_MUCH_GREATER
    notes: dict[str, str] = field(default_factory=dict)

    @property
    def violations(self) -> list[Condition]:
        return [c for c in self.conditions if not c.satisfied]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        rows = [f"regime checks ('>>' means ratio >= {self.threshold:g})"]
        for c in self.conditions:
            flag = "ok " if c.satisfied else "VIOLATED"
            note = f"  [{c.note}]" if c.note else ""
            rows.append(
                f"  {flag:8s} {c.name:28s} {c.lhs:12.5g} vs {c.rhs:12.5g}"
                f"  ratio {c.margin:10.4g}{note}"
            )
        return "\n".join(rows)


def _much_greater(name, lhs, rhs, threshold, note=""):
    lhs, rhs = abs(lhs), abs(rhs)
    if rhs == 0:
        margin = math.inf if lhs > 0 else 0.0
    else:
        margin = lhs / rhs
    return Condition(name, lhs, rhs, margin >= threshold, margin, note)


def validate_regime(
    p: PhysicalParams,
    amps: SteadyAmplitudes,
    lin: LinearizedParams,
    threshold: float = DEFAULT_MUCH_GREATER,
) -> RegimeReport:
    """Evaluate the smallness conditions behind linearization and elimination.

    Never raises on a violation; violated conditions are flagged. The
    ``kappa >> omega_m`` check is only meaningful for the highly dissipative
    cavity and is annotated accordingly.
    """
    t = threshold
    small_nl = max(abs(p.g_single), p.eta)
    conds = [
        _much_greater("|Delta_a| >> |Delta_c|", lin.Delta_a, p.delta_c, t),
        _much_greater("omega_m~ >> 2 Lambda", lin.omega_m_tilde, 2 * lin.Lambda, t),
        _much_greater("kappa >> gamma_c", p.kappa, p.gamma_c, t),
        _much_greater("kappa >> omega_m", p.kappa, 1.0, t, note="high-kappa regime only"),
        _much_greater("omega_m >> gamma_m", 1.0, p.gamma_m, t),
        _much_greater("kappa >> gamma_m", p.kappa, p.gamma_m, t),
        _much_greater("gamma_c >> gamma_m", p.gamma_c, p.gamma_m, t),
        _much_greater("eta >> gamma_m", p.eta, p.gamma_m, t),
        _much_greater("|alpha| >> 1", abs(amps.alpha), 1.0, t),
        _much_greater("beta >> 1", amps.beta, 1.0, t),
        _much_greater("Lambda >> max(g, eta)", lin.Lambda, small_nl, t),
        _much_greater("G >> max(g, eta)", lin.G, small_nl, t),
        _much_greater("G0 >> max(g, eta)", p.g0_collective, small_nl, t),
    ]
    return RegimeReport(tuple(conds), threshold)
