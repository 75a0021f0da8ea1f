"""Transfer functions of the opto-electronic primitives that make up a neuron.

A neuron is a bank of PIN attenuators (the weights), one photodiode per
attenuator with the photocurrents summed, a trans-impedance amplifier and a
micro-ring modulator acting as the ReLU on a shared supply laser.  Every
function here is a pure function of its arguments and accepts numpy arrays.

Units follow the device datasheets: currents into attenuators in mA, optical
power in W, photocurrent in A, wavelengths in nm, heater power in mW.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, ValidationError

LASER_WAVELENGTH_NM = 1559.93


class EvalMode(str, enum.Enum):
    PHYSICAL = "physical"
    IDEAL = "ideal"


@dataclass(frozen=True)
class AttenuatorParams:
    length: float = 500.0  # um
    atten_coeff: float = 8.0  # dB per mA
    max_current: float = 5.0  # mA

    def __post_init__(self):
        if self.length <= 0 or self.atten_coeff <= 0 or self.max_current <= 0:
            raise ValidationError(f"invalid attenuator parameters: {self}")

    @property
    def min_transmission(self) -> float:
        return float(10.0 ** (-self.atten_coeff * self.max_current / 10.0))


@dataclass(frozen=True)
class PhotodiodeParams:
    responsivity: float = 0.8  # A/W
    dark_current: float = 0.0  # A

    def __post_init__(self):
        if not 0 < self.responsivity <= 1.5:
            raise ValidationError(f"responsivity {self.responsivity} outside (0, 1.5]")
        if self.dark_current < 0:
            raise ValidationError("dark current must be non-negative")


@dataclass(frozen=True)
class TiaParams:
    gain: float = 1.0e5  # V/A
    v_out_max: float = 10.0  # V

    def __post_init__(self):
        if self.gain <= 0 or self.v_out_max <= 0:
            raise ValidationError(f"invalid TIA parameters: {self}")


@dataclass(frozen=True)
class RingParams:
    """Micro-ring modulator with a thermal tuner.

    The cold resonance sits on the blue side of the supply laser by design so
    that the heater, which can only red-shift it, can pull it onto the laser.
    """

    lambda_res0: float = LASER_WAVELENGTH_NM - 0.5  # nm
    fwhm: float = 0.2  # nm
    extinction: float = 0.01  # on-resonance transmission
    v_th: float = 0.7  # V
    eo_shift: float = 0.5  # nm/V above v_th
    heater_resistance: float = 1900.0  # ohm
    thermo_coeff: float = 0.25  # nm/mW
    v_heater_max: float = 3.0  # V

    def __post_init__(self):
        if self.fwhm <= 0:
            raise ValidationError("fwhm must be positive")
        if not 0 <= self.extinction < 0.5:
            raise ValidationError("extinction (T_min) must lie in [0, 0.5)")
        if self.eo_shift <= 0 or self.heater_resistance <= 0 or self.thermo_coeff <= 0:
            raise ValidationError(f"invalid ring parameters: {self}")
        if self.v_heater_max <= 0:
            raise ValidationError("v_heater_max must be positive")


@dataclass(frozen=True)
class NeuronBias:
    v_b: float = 0.7  # V, added to the TIA output


@dataclass(frozen=True)
class DeviceParams:
    attenuator: AttenuatorParams = field(default_factory=AttenuatorParams)
    photodiode: PhotodiodeParams = field(default_factory=PhotodiodeParams)
    tia: TiaParams = field(default_factory=TiaParams)
    ring: RingParams = field(default_factory=RingParams)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceParams":
        kinds = {
            "attenuator": AttenuatorParams,
            "photodiode": PhotodiodeParams,
            "tia": TiaParams,
            "ring": RingParams,
        }
        unknown = set(data) - set(kinds)
        if unknown:
            raise ValidationError(f"unknown device sections: {sorted(unknown)}")
        parts = {}
        for name, kind in kinds.items():
            section = data.get(name, {})
            allowed = {f.name for f in fields(kind)}
            bad = set(section) - allowed
            if bad:
                raise ValidationError(f"unknown {name} keys: {sorted(bad)}")
            parts[name] = kind(**{k: float(v) for k, v in section.items()})
        return cls(**parts)


def load_device_params(path: str | Path) -> DeviceParams:
    """Read a JSON parameter file; absent keys keep their defaults."""
    with open(path) as fh:
        return DeviceParams.from_dict(json.load(fh))


def attenuator_transmission(i, p: AttenuatorParams):
    i = np.asarray(i, dtype=float)
    if np.any(i < 0) or np.any(i > p.max_current):
        raise DomainError(f"attenuator current outside [0, {p.max_current}] mA")
    t = 10.0 ** (-p.atten_coeff * i / 10.0)
    return t if t.ndim else float(t)


def pd_current(p_opt, pd: PhotodiodeParams):
    p_opt = np.asarray(p_opt, dtype=float)
    if np.any(p_opt < 0):
        raise DomainError("optical power must be non-negative")
    i = pd.responsivity * p_opt + pd.dark_current
    return i if i.ndim else float(i)


def tia_voltage(i_sum, t: TiaParams):
    v = np.minimum(t.gain * np.asarray(i_sum, dtype=float), t.v_out_max)
    v = np.maximum(v, 0.0)
    return v if v.ndim else float(v)


def ring_transmission(delta_lambda, r: RingParams):
    """Lorentzian notch: ``T_min`` on resonance, rising to 1 far off it."""
    x2 = (2.0 * np.asarray(delta_lambda, dtype=float) / r.fwhm) ** 2
    t = r.extinction + (1.0 - r.extinction) * x2 / (1.0 + x2)
    return t if t.ndim else float(t)


def heater_shift(v_heater, r: RingParams):
    v_heater = np.asarray(v_heater, dtype=float)
    if np.any(v_heater < 0) or np.any(v_heater > r.v_heater_max):
        raise DomainError(f"heater voltage outside [0, {r.v_heater_max}] V")
    power_mw = v_heater**2 / r.heater_resistance * 1e3
    return r.thermo_coeff * power_mw


def ring_detuning(v_m, v_heater, laser_lambda, r: RingParams):
    eo = r.eo_shift * np.maximum(0.0, np.asarray(v_m, dtype=float) - r.v_th)
    d = r.lambda_res0 + heater_shift(v_heater, r) + eo - laser_lambda
    return d if np.ndim(d) else float(d)


def neuron_activation(
    v_m,
    v_heater,
    p_supply,
    mode: EvalMode,
    r: RingParams,
    g_ideal: float | None = None,
    laser_lambda: float = LASER_WAVELENGTH_NM,
):
    """Optical output power of the ring for drive voltage ``v_m``.

    ``Physical`` runs the drive through the detuning and Lorentzian models.
    ``Ideal`` is an exact clipped ReLU with knee at ``v_th`` and slope
    ``g_ideal`` (1/V); the heater and resonance position are ignored.
    """
    if np.any(np.asarray(p_supply) < 0):
        raise DomainError("supply power must be non-negative")
    mode = EvalMode(mode)
    if mode is EvalMode.IDEAL:
        if g_ideal is None:
            g_ideal = relu_window(r).g_ideal
        u = np.maximum(0.0, np.asarray(v_m, dtype=float) - r.v_th)
        out = p_supply * np.minimum(1.0, g_ideal * u)
    else:
        d = ring_detuning(v_m, v_heater, laser_lambda, r)
        out = p_supply * ring_transmission(d, r)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class ReluWindow:
    """Drive span above the knee used as the neuron's full-scale range."""

    dv_full_scale: float  # V above v_th reaching ``full_scale_fraction``
    g_ideal: float  # 1/V, slope of the matching ideal ReLU
    full_scale_fraction: float
    max_gap: float  # worst |physical - ideal| over the window, fraction of supply


def relu_window(r: RingParams, full_scale_fraction: float = 0.65, n: int = 2001) -> ReluWindow:
    """Size the operating window of an aligned ring and fit its ideal ReLU.

    The slope is the minimax fit of ``min(1, g u)`` to the aligned ring's
    normalized transmission over ``u`` in ``[0, dv_full_scale]``.
    """
    frac = float(full_scale_fraction)
    if not r.extinction < frac < 1.0:
        raise ValidationError(f"full-scale fraction {frac} outside (T_min, 1)")
    x = np.sqrt((frac - r.extinction) / (1.0 - frac))
    dv = x * r.fwhm / (2.0 * r.eo_shift)
    u = np.linspace(0.0, dv, n)
    phys = ring_transmission(r.eo_shift * u, r)

    def gap(g):
        return float(np.max(np.abs(phys - np.minimum(1.0, g * u))))

    res = minimize_scalar(gap, bounds=(0.05 / dv, 2.0 / dv), method="bounded",
                          options={"xatol": 1e-10 / dv})
    return ReluWindow(dv_full_scale=float(dv), g_ideal=float(res.x),
                      full_scale_fraction=frac, max_gap=gap(res.x))
