"""Forward path of the 30-pixel, 4-3-2 photonic network.

Layer 1 holds four 12-input neurons (one per sub-image), layer 2 three
4-input neurons, both driving micro-ring ReLUs R1..R7 on a shared supply
laser.  The output layer is two 3-input neurons without rings: their
photocurrents go off chip to a TIA giving Out1 and Out2.

``reference_forward`` is the same network in normalized units (pixels scaled
to the all-ones reference frame, weights as transmissions).  In ideal mode
the chip equals it up to one constant, see :func:`ideal_output_scale`.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .devices import (
    LASER_WAVELENGTH_NM,
    DeviceParams,
    EvalMode,
    ReluWindow,
    RingParams,
    TiaParams,
    attenuator_transmission,
    neuron_activation,
    relu_window,
    ring_detuning,
)
from .errors import CalibrationError, DomainError, ValidationError
from .optics import GRID_SHAPE, RoutingPlan, default_routing_plan, route_subimages

LAYER_SIZES = (4, 3, 2)
FAN_IN = (12, 4, 3)
WEIGHT_SHAPES = tuple(zip(LAYER_SIZES, FAN_IN))
RING_COUNT = 7
N_ATTENUATORS = sum(a * b for a, b in WEIGHT_SHAPES)  # 66

DEFAULT_FULL_SCALE = 0.75
OUT_FULL_SCALE_V = 1.0


@dataclass(frozen=True)
class Architecture:
    layer_sizes: tuple = LAYER_SIZES
    fan_in: tuple = FAN_IN
    ring_count: int = RING_COUNT

    def __post_init__(self):
        if (tuple(self.layer_sizes), tuple(self.fan_in), self.ring_count) != (LAYER_SIZES, FAN_IN, RING_COUNT):
            raise ValidationError("the chip topology is fixed at 30 -> 4 -> 3 -> 2 with 7 rings")

    @property
    def n_attenuators(self) -> int:
        return N_ATTENUATORS


def _as_weight_arrays(mats) -> tuple[np.ndarray, ...]:
    out = tuple(np.array(m, dtype=float) for m in mats)
    if len(out) != 3 or any(m.shape != s for m, s in zip(out, WEIGHT_SHAPES)):
        got = [np.shape(m) for m in mats]
        raise ValidationError(f"expected layer shapes {list(WEIGHT_SHAPES)}, got {got}")
    return out


@dataclass(frozen=True)
class ChipState:
    """Every writable analog setting of the chip."""

    attenuator_currents: tuple  # mA, shapes (4, 12), (3, 4), (2, 3)
    heater_voltages: np.ndarray  # V, (7,)
    relu_biases: np.ndarray  # V, (7,)

    def __post_init__(self):
        currents = _as_weight_arrays(self.attenuator_currents)
        heaters = np.array(self.heater_voltages, dtype=float).reshape(-1)
        biases = np.array(self.relu_biases, dtype=float).reshape(-1)
        if heaters.shape != (RING_COUNT,) or biases.shape != (RING_COUNT,):
            raise ValidationError("heater voltages and biases need 7 entries each")
        for arr in (*currents, heaters, biases):
            arr.setflags(write=False)
        object.__setattr__(self, "attenuator_currents", currents)
        object.__setattr__(self, "heater_voltages", heaters)
        object.__setattr__(self, "relu_biases", biases)

    @classmethod
    def zeros(cls, relu_bias: float = 0.7) -> "ChipState":
        return cls(tuple(np.zeros(s) for s in WEIGHT_SHAPES), np.zeros(RING_COUNT),
                   np.full(RING_COUNT, relu_bias))

    def validate(self, devices: DeviceParams) -> None:
        i_max = devices.attenuator.max_current
        for layer, cur in enumerate(self.attenuator_currents, start=1):
            if np.any(cur < 0) or np.any(cur > i_max) or not np.all(np.isfinite(cur)):
                raise ValidationError(f"layer {layer} attenuator current outside [0, {i_max}] mA")
        v_max = devices.ring.v_heater_max
        if np.any(self.heater_voltages < 0) or np.any(self.heater_voltages > v_max):
            raise ValidationError(f"heater voltage outside [0, {v_max}] V")

    @property
    def flat_currents(self) -> np.ndarray:
        return np.concatenate([c.ravel() for c in self.attenuator_currents])

    def with_heaters(self, voltages) -> "ChipState":
        return replace(self, heater_voltages=np.asarray(voltages, dtype=float))

    def with_biases(self, biases) -> "ChipState":
        return replace(self, relu_biases=np.asarray(biases, dtype=float))

    def to_dict(self) -> dict:
        return {
            "attenuator_currents_ma": [c.tolist() for c in self.attenuator_currents],
            "heater_voltages_v": self.heater_voltages.tolist(),
            "relu_biases_v": self.relu_biases.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ChipState":
        expected = {"attenuator_currents_ma", "heater_voltages_v", "relu_biases_v"}
        if set(data) != expected:
            raise ValidationError(f"chip state keys must be {sorted(expected)}")
        return cls(tuple(data["attenuator_currents_ma"]), data["heater_voltages_v"],
                   data["relu_biases_v"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "ChipState":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class SupplyPlan:
    laser_power: float = 2.5  # mW
    gc_efficiency: float = 0.40
    dist_loss_db: float = 3.0

    def __post_init__(self):
        if self.laser_power <= 0 or not 0 < self.gc_efficiency <= 1 or self.dist_loss_db < 0:
            raise ValidationError(f"invalid supply plan: {self}")

    @property
    def per_ring_supply(self) -> float:
        """Supply power reaching each ring, W (identical for all seven)."""
        coupled = self.laser_power * 1e-3 * self.gc_efficiency * 10.0 ** (-self.dist_loss_db / 10.0)
        return coupled / RING_COUNT


@dataclass(frozen=True)
class OperatingPoint:
    """TIA gains, ReLU biases and ideal slope chosen for a chip."""

    tia: tuple  # (layer-1 TiaParams, layer-2 TiaParams)
    out_tia: TiaParams
    relu_biases: tuple  # V_b for R1..R7
    g_ideal: float  # 1/V
    window: ReluWindow

    def to_dict(self) -> dict:
        return {
            "tia_gain_v_per_a": [t.gain for t in self.tia],
            "tia_v_out_max_v": [t.v_out_max for t in self.tia],
            "out_tia_gain_v_per_a": self.out_tia.gain,
            "relu_biases_v": list(self.relu_biases),
            "g_ideal_per_v": self.g_ideal,
            "window_dv_v": self.window.dv_full_scale,
            "full_scale_fraction": self.window.full_scale_fraction,
            "relu_max_gap": self.window.max_gap,
        }


def default_operating_point(devices: DeviceParams, full_scale_fraction: float = DEFAULT_FULL_SCALE) -> OperatingPoint:
    window = relu_window(devices.ring, full_scale_fraction)
    return OperatingPoint(
        tia=(devices.tia, devices.tia),
        out_tia=devices.tia,
        relu_biases=(devices.ring.v_th,) * RING_COUNT,
        g_ideal=window.g_ideal,
        window=window,
    )


@dataclass(frozen=True)
class PhotonicChip:
    """The fixed physical plant: device constants, per-ring resonances,
    routing, supply distribution and the current operating point."""

    devices: DeviceParams = field(default_factory=DeviceParams)
    supply: SupplyPlan = field(default_factory=SupplyPlan)
    plan: RoutingPlan = field(default_factory=default_routing_plan)
    ring_offsets: tuple = (0.0,) * RING_COUNT  # nm, fabrication/thermal spread
    op: OperatingPoint | None = None
    laser_lambda: float = LASER_WAVELENGTH_NM

    def __post_init__(self):
        offsets = tuple(float(v) for v in self.ring_offsets)
        if len(offsets) != RING_COUNT:
            raise ValidationError("ring_offsets needs 7 entries")
        object.__setattr__(self, "ring_offsets", offsets)
        if self.op is None:
            object.__setattr__(self, "op", default_operating_point(self.devices))

    @property
    def rings(self) -> tuple[RingParams, ...]:
        base = self.devices.ring
        return tuple(replace(base, lambda_res0=base.lambda_res0 + d) for d in self.ring_offsets)

    def with_op(self, op: OperatingPoint) -> "PhotonicChip":
        return replace(self, op=op)

    def with_ring_offsets(self, offsets) -> "PhotonicChip":
        return replace(self, ring_offsets=tuple(offsets))

    def nominal_heater_voltage(self) -> float:
        """Heater voltage that aligns a ring with zero offset."""
        r = self.devices.ring
        shift = self.laser_lambda - r.lambda_res0
        if shift < 0:
            return 0.0
        return float(np.sqrt(shift / r.thermo_coeff * 1e-3 * r.heater_resistance))

    def aligned_heater_voltages(self) -> np.ndarray:
        """Exact heater voltages putting every ring on the laser (0 V bias point)."""
        r = self.devices.ring
        shift = self.laser_lambda - np.array([ring.lambda_res0 for ring in self.rings])
        power_mw = np.clip(shift / r.thermo_coeff, 0.0, None)
        return np.minimum(np.sqrt(power_mw * 1e-3 * r.heater_resistance), r.v_heater_max)


@dataclass
class ForwardTrace:
    """Node values of one forward evaluation; leading axes follow the frames."""

    i_sum: list  # A, per layer: (..., 4), (..., 3), (..., 2)
    v_tia: list  # V, layers 1-2
    v_m: list  # V, layers 1-2
    detuning: list  # nm, layers 1-2 (nan in ideal mode)
    optical_out: list  # W, layers 1-2
    out: np.ndarray  # V, (..., 2)

    @property
    def out1(self):
        return self.out[..., 0]

    @property
    def out2(self):
        return self.out[..., 1]

    @property
    def hidden_outputs(self) -> np.ndarray:
        """H1..H3 output voltages (layer-2 TIA outputs)."""
        return self.v_tia[1]

    def to_csv(self, path: str | Path) -> None:
        """One row per neuron, columns for each frame index."""
        rows = []
        names = (["I1", "I2", "I3", "I4"], ["H1", "H2", "H3"], ["O1", "O2"])
        for layer, labels in enumerate(names):
            for k, name in enumerate(labels):
                row = {"neuron": name, "i_sum_a": self.i_sum[layer][..., k]}
                if layer < 2:
                    row.update(v_tia_v=self.v_tia[layer][..., k], v_m_v=self.v_m[layer][..., k],
                               detuning_nm=self.detuning[layer][..., k],
                               optical_out_w=self.optical_out[layer][..., k])
                else:
                    row.update(v_tia_v=self.out[..., k])
                rows.append(row)
        cols = ["neuron", "i_sum_a", "v_tia_v", "v_m_v", "detuning_nm", "optical_out_w"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame", *cols])
            n = int(np.prod(self.out.shape[:-1]))
            for f in range(n):
                for row in rows:
                    vals = [np.ravel(row.get(c, np.nan))[f] if c != "neuron" else row[c] for c in cols]
                    writer.writerow([f, *vals])


def _ring_layer(v_m, heaters, rings, p_supply, mode, g_ideal, laser):
    outs, dets = [], []
    for k, ring in enumerate(rings):
        if mode is EvalMode.PHYSICAL:
            d = ring_detuning(v_m[..., k], heaters[k], laser, ring)
            dets.append(np.asarray(d, dtype=float))
        else:
            dets.append(np.full(np.shape(v_m[..., k]), np.nan))
        outs.append(np.asarray(neuron_activation(v_m[..., k], heaters[k], p_supply, mode, ring,
                                                 g_ideal=g_ideal, laser_lambda=laser), dtype=float))
    return np.stack(outs, axis=-1), np.stack(dets, axis=-1)


def forward(chip: PhotonicChip, state: ChipState, frame, mode: EvalMode | str = EvalMode.PHYSICAL) -> ForwardTrace:
    """Propagate pixel powers (W, shape ``(..., 6, 5)``) through the chip."""
    mode = EvalMode(mode)
    state.validate(chip.devices)
    frame = np.asarray(frame, dtype=float)
    if frame.shape[-2:] != GRID_SHAPE:
        raise ValidationError(f"frame must end in shape {GRID_SHAPE}")
    if np.any(frame < 0):
        raise DomainError("pixel powers must be non-negative")
    dev, op = chip.devices, chip.op
    resp, dark = dev.photodiode.responsivity, dev.photodiode.dark_current
    trans = [attenuator_transmission(c, dev.attenuator) for c in state.attenuator_currents]
    p_s = chip.supply.per_ring_supply
    rings = chip.rings
    heaters = state.heater_voltages
    biases = state.relu_biases

    trace = ForwardTrace([], [], [], [], [], None)
    signal = route_subimages(frame, chip.plan)  # (..., 4, 12) optical powers
    for layer in range(3):
        w = trans[layer]
        if layer == 0:
            p_in = signal * w
        else:
            p_in = signal[..., None, :] * w
        i_sum = resp * p_in.sum(axis=-1) + FAN_IN[layer] * dark
        trace.i_sum.append(i_sum)
        if layer == 2:
            trace.out = np.clip(op.out_tia.gain * i_sum, 0.0, op.out_tia.v_out_max)
            break
        tia = op.tia[layer]
        v_tia = np.clip(tia.gain * i_sum, 0.0, tia.v_out_max)
        sl = slice(0, 4) if layer == 0 else slice(4, 7)
        v_m = v_tia + biases[sl]
        out, det = _ring_layer(v_m, heaters[sl], rings[sl], p_s, mode, op.g_ideal, chip.laser_lambda)
        trace.v_tia.append(v_tia)
        trace.v_m.append(v_m)
        trace.detuning.append(det)
        trace.optical_out.append(out)
        signal = out
    return trace


def v_out(trace: ForwardTrace):
    """Differential output Out1 - Out2, V."""
    return trace.out[..., 0] - trace.out[..., 1]


def reference_forward(weights, pixels, plan: RoutingPlan | None = None):
    """Pure-math twin of the chip: ReLU layers 1-2, linear layer 3.

    ``pixels`` are normalized ``(..., 6, 5)`` grids; shared pixels are divided
    among the patches they feed exactly as the splitter tree does.
    Returns ``(..., 2)``.
    """
    w1, w2, w3 = _as_weight_arrays(weights)
    plan = plan or default_routing_plan()
    pixels = np.asarray(pixels, dtype=float)
    if pixels.shape[-2:] != GRID_SHAPE:
        raise ValidationError(f"pixels must end in shape {GRID_SHAPE}")
    rows, cols = plan.index_arrays()
    x = pixels[..., rows, cols] / plan.split_counts[rows, cols]
    h1 = np.maximum(0.0, (x * w1).sum(axis=-1))
    h2 = np.maximum(0.0, h1 @ w2.T)
    return h2 @ w3.T


def ideal_output_scale(chip: PhotonicChip, pixel_scale: float) -> float:
    """Volts of ideal-mode Out per unit of ``reference_forward`` output.

    ``pixel_scale`` is the pixel power (W) corresponding to a normalized
    pixel value of 1.  Valid while no TIA saturates and dark current is 0.
    """
    op, dev = chip.op, chip.devices
    resp = dev.photodiode.responsivity
    p_s = chip.supply.per_ring_supply
    route = 10.0 ** (-chip.plan.route_loss_db / 10.0)
    c1 = p_s * op.g_ideal * op.tia[0].gain * resp * pixel_scale * route
    c2 = p_s * op.g_ideal * op.tia[1].gain * resp * c1
    return op.out_tia.gain * resp * c2


def calibrate_operating_point(
    chip: PhotonicChip,
    frame_max,
    weights=None,
    full_scale_fraction: float = DEFAULT_FULL_SCALE,
    saturation_headroom: float = 10.0,
) -> OperatingPoint:
    """Choose TIA gains, ReLU biases and the ideal slope for ``chip``.

    Zero optical input sits exactly on the ring knee.  Each layer's gain maps
    the largest i_sum reachable with ``weights`` (transmissions, all ones if
    omitted) onto the top of the ReLU window.  ``frame_max`` is the brightest
    expected frame, or a stack of expected frames whose per-neuron maximum is
    used.  The output TIA maps the largest output photocurrent to 1 V.
    """
    frame_max = np.asarray(frame_max, dtype=float)
    if frame_max.shape[-2:] != GRID_SHAPE or not np.any(frame_max > 0):
        raise CalibrationError("frame_max must hold a non-zero 6x5 frame")
    frames = frame_max.reshape(-1, *GRID_SHAPE)
    dev = chip.devices
    resp, dark = dev.photodiode.responsivity, dev.photodiode.dark_current
    window = relu_window(dev.ring, full_scale_fraction)
    if weights is None:
        weights = tuple(np.ones(s) for s in WEIGHT_SHAPES)
    w = _as_weight_arrays(weights)
    p_s = chip.supply.per_ring_supply

    gains, biases = [], []
    signal = route_subimages(frames, chip.plan)
    for layer in range(3):
        p_in = signal * w[layer] if layer == 0 else signal[..., None, :] * w[layer]
        i_sig = resp * p_in.sum(axis=-1)
        dark_total = FAN_IN[layer] * dark
        peak = float(i_sig.max())
        if not peak > 0:
            raise CalibrationError(f"layer {layer + 1} receives no signal at full scale")
        if layer == 2:
            out_gain = OUT_FULL_SCALE_V / (peak + dark_total)
            break
        gain = window.dv_full_scale / peak
        gains.append(TiaParams(gain=gain, v_out_max=saturation_headroom * (window.dv_full_scale + gain * dark_total)))
        biases.extend([dev.ring.v_th - gain * dark_total] * LAYER_SIZES[layer])
        signal = p_s * np.minimum(1.0, window.g_ideal * gain * i_sig)
    out_tia = TiaParams(gain=out_gain, v_out_max=saturation_headroom * OUT_FULL_SCALE_V)
    return OperatingPoint(tia=tuple(gains), out_tia=out_tia, relu_biases=tuple(biases),
                          g_ideal=window.g_ideal, window=window)
