"""Control loops around the chip: micro-ring alignment and class thresholds.

Ring alignment is cyclic coordinate descent over the seven heater voltages,
minimizing the dark-input sum of the H1..H3 and O1, O2 output voltages
(``V_SUM``).  Classification compares ``V_out = Out1 - Out2`` with K-1
thresholds fitted online from a labelled stream; cross-validation repeats
the fit on random subsets.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .devices import EvalMode
from .errors import IncompleteFitError, ValidationError
from .network import ChipState, PhotonicChip, forward
from .optics import GRID_SHAPE

log = logging.getLogger(__name__)

HIDDEN_AND_OUTPUT = ("H1", "H2", "H3", "O1", "O2")


@dataclass(frozen=True)
class AlignmentConfig:
    v_max: float = 3.0  # V
    step: float = 0.1  # V
    min_step: float = 1e-4  # V
    max_iters: int = 200  # full sweeps
    target_eps: float = 1e-9  # V

    def __post_init__(self):
        if self.step <= 0 or self.min_step <= 0 or self.min_step > self.step:
            raise ValidationError("need 0 < min_step <= step")
        if self.v_max <= 0 or self.max_iters < 1:
            raise ValidationError(f"invalid alignment config: {self}")


@dataclass
class AlignmentResult:
    heater_voltages: np.ndarray
    final_v_sum: float
    iterations: int
    converged: bool
    initial_v_sum: float = float("nan")
    pinned: list = field(default_factory=list)  # rings whose heater cap binds
    accepted_v_sums: list = field(default_factory=list)
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "heater_voltages_v": [float(v) for v in self.heater_voltages],
            "final_v_sum_v": self.final_v_sum,
            "initial_v_sum_v": self.initial_v_sum,
            "iterations": self.iterations,
            "converged": self.converged,
            "pinned_rings": [int(k) for k in self.pinned],
            "evaluations": self.evaluations,
            "accepted_v_sums_v": [float(v) for v in self.accepted_v_sums],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AlignmentResult":
        return cls(np.array(d["heater_voltages_v"], dtype=float), d["final_v_sum_v"], d["iterations"],
                   d["converged"], d["initial_v_sum_v"], list(d["pinned_rings"]),
                   list(d.get("accepted_v_sums_v", [])), d["evaluations"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def dark_frame() -> np.ndarray:
    return np.zeros(GRID_SHAPE)


def monitored_outputs(chip: PhotonicChip, state: ChipState, frame,
                      mode: EvalMode | str = EvalMode.PHYSICAL) -> np.ndarray:
    """H1..H3 and O1, O2 output voltages for one frame."""
    trace = forward(chip, state, frame, mode)
    return np.concatenate([trace.hidden_outputs, trace.out])


def v_sum(chip: PhotonicChip, state: ChipState, frame=None) -> float:
    frame = dark_frame() if frame is None else frame
    return float(monitored_outputs(chip, state, frame).sum())


def align_rings(chip: PhotonicChip, state: ChipState, cfg: AlignmentConfig = AlignmentConfig(),
                frame=None, probe_hook=None) -> AlignmentResult:
    """Tune the heaters so every ring notches the supply laser.

    Each sweep visits the heaters in order.  A heater probes ``+s`` then
    ``-s`` and keeps the first move that lowers ``V_SUM``; when neither does,
    ``s`` is halved down to ``min_step``.  A heater's step doubles after a
    success, capped at ``cfg.step``.  The reference ``V_REF`` takes the sweep's
    ``V_SUM`` when it is lower.  The loop stops after a sweep with no accepted
    move, when ``V_REF`` improves by less than ``target_eps``, or after
    ``max_iters`` sweeps.

    The weights in ``state`` are held fixed; only a copy of its heater
    voltages is modified.  ``probe_hook(k, voltages)`` sees every probe.
    """
    if cfg.v_max > chip.devices.ring.v_heater_max:
        raise ValidationError("alignment v_max exceeds the heater rating")
    frame = dark_frame() if frame is None else frame
    cap = cfg.v_max
    volts = np.clip(np.array(state.heater_voltages, dtype=float), 0.0, cap)
    n_eval = 0

    def cost(v):
        nonlocal n_eval
        n_eval += 1
        return v_sum(chip, state.with_heaters(v), frame)

    current = cost(volts)
    initial = current
    v_ref = current
    accepted = [current]
    steps = np.full(len(volts), cfg.step)
    converged = False
    sweeps = 0
    for sweeps in range(1, cfg.max_iters + 1):
        moved = False
        for k in range(len(volts)):
            s = steps[k]
            success = False
            while s >= cfg.min_step and not success:
                for direction in (1.0, -1.0):
                    cand = min(max(volts[k] + direction * s, 0.0), cap)
                    if cand == volts[k]:
                        continue
                    trial = volts.copy()
                    trial[k] = cand
                    if probe_hook is not None:
                        probe_hook(k, trial)
                    c = cost(trial)
                    if c < current:
                        volts, current = trial, c
                        accepted.append(c)
                        success = True
                        break
                else:
                    s /= 2.0
            moved |= success
            steps[k] = min(cfg.step, 2.0 * s) if success else 2.0 * cfg.min_step
        improvement = v_ref - current
        if current < v_ref:
            v_ref = current
        if not moved or improvement < cfg.target_eps:
            converged = True
            break

    pinned = []
    for k in np.nonzero(volts >= cap)[0]:
        below = volts.copy()
        below[k] = cap - cfg.min_step
        if cost(below) > current:
            pinned.append(int(k))
    if pinned:
        converged = False
    return AlignmentResult(volts, float(current), sweeps, converged, initial, pinned, accepted, n_eval)


def leakage_bounds(chip: PhotonicChip, state: ChipState) -> np.ndarray:
    """Upper limit for dark H1..H3, O1, O2 when every ring notches the laser.

    Twice the extinction-limited floor: each output's full-transmission value
    times ``T_min``.
    """
    from .devices import attenuator_transmission

    dev, op = chip.devices, chip.op
    resp = dev.photodiode.responsivity
    p_s = chip.supply.per_ring_supply
    t2 = attenuator_transmission(state.attenuator_currents[1], dev.attenuator)
    t3 = attenuator_transmission(state.attenuator_currents[2], dev.attenuator)
    full_h = op.tia[1].gain * resp * p_s * t2.sum(axis=1)
    full_o = op.out_tia.gain * resp * p_s * t3.sum(axis=1)
    return 2.0 * dev.ring.extinction * np.concatenate([full_h, full_o])


def verify_alignment(chip: PhotonicChip, state: ChipState, lit_frame) -> dict:
    """Outputs with the input laser off and with uniform illumination."""
    dark = monitored_outputs(chip, state, dark_frame())
    lit = monitored_outputs(chip, state, lit_frame)
    bounds = leakage_bounds(chip, state)
    return {
        "dark": dict(zip(HIDDEN_AND_OUTPUT, map(float, dark))),
        "lit": dict(zip(HIDDEN_AND_OUTPUT, map(float, lit))),
        "leakage_bound": dict(zip(HIDDEN_AND_OUTPUT, map(float, bounds))),
        "dark_below_bound": bool(np.all(dark < bounds)),
        "hidden_lit_over_dark": [float(x) for x in lit[:3] / np.maximum(dark[:3], 1e-300)],
    }


@dataclass(frozen=True)
class ThresholdSet:
    thresholds: np.ndarray  # strictly increasing, K-1 values
    class_order: tuple  # label of each bin, lowest bin first

    def __post_init__(self):
        th = np.asarray(self.thresholds, dtype=float).reshape(-1)
        if len(self.class_order) != len(th) + 1:
            raise ValidationError("need one more class than thresholds")
        if np.any(np.diff(th) <= 0):
            raise ValidationError("thresholds must be strictly increasing")
        object.__setattr__(self, "thresholds", th)
        object.__setattr__(self, "class_order", tuple(int(c) for c in self.class_order))

    def to_dict(self) -> dict:
        return {"thresholds_v": self.thresholds.tolist(), "class_order": list(self.class_order)}


def classify_by_threshold(v, t: ThresholdSet):
    """Label of the bin containing ``v``; a value on a threshold goes up."""
    bins = np.searchsorted(t.thresholds, v, side="right")
    labels = np.asarray(t.class_order)[bins]
    return labels if np.ndim(labels) else int(labels)


THRESHOLD_RULES = ("midpoint", "std_weighted", "gaussian", "count_optimal")


def _gaussian_crossing(m1, s1, m2, s2, fallback):
    """Point in [m1, m2] where two normal densities are equal, else ``fallback``."""
    if s1 <= 0 or s2 <= 0 or m2 <= m1:
        return fallback
    a = 1.0 / s1**2 - 1.0 / s2**2
    b = -2.0 * (m1 / s1**2 - m2 / s2**2)
    c = m1**2 / s1**2 - m2**2 / s2**2 + 2.0 * math.log(s1 / s2)
    if abs(a) < 1e-12 * abs(b):
        roots = [-c / b]
    else:
        disc = b * b - 4.0 * a * c
        if disc < 0:
            return fallback
        sq = math.sqrt(disc)
        roots = [(-b - sq) / (2 * a), (-b + sq) / (2 * a)]
    inside = [x for x in roots if m1 <= x <= m2]
    return min(inside, key=lambda x: abs(x - fallback)) if inside else fallback


def _count_optimal(lo, hi, below, above):
    """Threshold in [lo, hi] maximizing (#below < t) + (#above >= t).

    Ties go to the candidate nearest the interval midpoint.
    """
    below = below[(below >= lo) & (below <= hi)]
    above = above[(above >= lo) & (above <= hi)]
    vals = np.unique(np.concatenate([below, above, [lo, hi]]))
    cands = np.concatenate([[lo], 0.5 * (vals[:-1] + vals[1:]), [hi]])
    n_below = np.searchsorted(np.sort(below), cands, side="left")
    n_above = len(above) - np.searchsorted(np.sort(above), cands, side="left")
    score = n_below + n_above
    best = np.nonzero(score == score.max())[0]
    centre = 0.5 * (lo + hi)
    return float(cands[best[np.argmin(np.abs(cands[best] - centre))]])


def _thresholds_from_stats(count, mean, m2, rule, seen_v=None, seen_y=None):
    seen = np.nonzero(count > 0)[0]
    order = seen[np.argsort(mean[seen], kind="stable")]
    m = mean[order]
    mid = 0.5 * (m[:-1] + m[1:])
    if rule != "midpoint":
        var = np.where(count[order] > 1, m2[order] / np.maximum(count[order] - 1, 1), 0.0)
        s = np.sqrt(var)
        lo_s, hi_s = s[:-1], s[1:]
        denom = lo_s + hi_s
        weighted = np.where(denom > 0, (m[:-1] * hi_s + m[1:] * lo_s) / np.where(denom > 0, denom, 1.0), mid)
        if rule == "std_weighted":
            mid = weighted
        elif rule == "count_optimal":
            mid = np.array([_count_optimal(m[i], m[i + 1], seen_v[seen_y == order[i]],
                                           seen_v[seen_y == order[i + 1]]) for i in range(len(mid))])
        else:
            mid = np.array([_gaussian_crossing(m[i], s[i], m[i + 1], s[i + 1], weighted[i])
                            for i in range(len(mid))])
    for i in range(1, len(mid)):
        if mid[i] <= mid[i - 1]:
            mid[i] = np.nextafter(mid[i - 1], np.inf)
    return mid, tuple(order)


@dataclass
class ThresholdFit:
    thresholds: ThresholdSet
    trace: np.ndarray | None  # accuracy on ``eval_v`` after each update


def fit_thresholds_online(v_stream, labels, k: int, rule: str = "count_optimal", trace: bool = False,
                          eval_v=None, eval_labels=None, allow_incomplete: bool = False) -> ThresholdFit:
    """Update the thresholds one sample at a time.

    Running per-class statistics are kept; after each sample the classes seen
    so far are ordered by mean and each threshold sits between adjacent
    class means (``midpoint``), is pulled toward the tighter class
    (``std_weighted``), or sits where the two classes' normal fits cross
    (``gaussian``; equals the midpoint for equal spreads).  With ``trace`` the accuracy on ``eval_v`` (default:
    the whole stream) is recorded after every update.
    """
    v_stream = np.asarray(v_stream, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if rule not in THRESHOLD_RULES:
        raise ValidationError(f"unknown threshold rule {rule!r}")
    if len(v_stream) != len(labels):
        raise ValidationError("stream values and labels differ in length")
    if len(labels) and (labels.min() < 0 or labels.max() >= k):
        raise ValidationError(f"labels must lie in 0..{k - 1}")
    count = np.zeros(k)
    mean = np.zeros(k)
    m2 = np.zeros(k)
    if trace:
        ev = v_stream if eval_v is None else np.asarray(eval_v, dtype=float)
        ey = labels if eval_labels is None else np.asarray(eval_labels, dtype=int)
        acc = np.empty(len(v_stream))
    for i, (v, c) in enumerate(zip(v_stream, labels)):
        count[c] += 1
        delta = v - mean[c]
        mean[c] += delta / count[c]
        m2[c] += delta * (v - mean[c])
        if trace:
            th, order = _thresholds_from_stats(count, mean, m2, rule, v_stream[:i + 1], labels[:i + 1])
            pred = np.asarray(order)[np.searchsorted(th, ev, side="right")]
            acc[i] = np.mean(pred == ey)
    missing = np.nonzero(count == 0)[0]
    if len(missing) and not allow_incomplete:
        raise IncompleteFitError(missing)
    if len(missing) == k:
        raise IncompleteFitError(missing)
    th, order = _thresholds_from_stats(count, mean, m2, rule, v_stream, labels)
    return ThresholdFit(ThresholdSet(th, order), acc if trace else None)


@dataclass
class EvalReport:
    accuracies: np.ndarray  # per iteration, held-out split
    confusion: np.ndarray  # (K, K), rows true, columns predicted, summed over iterations
    curve_n: np.ndarray
    curve_mean: np.ndarray
    curve_min: np.ndarray
    curve_max: np.ndarray
    k: int
    fit_fraction: float
    seed: int
    resamples: int = 0

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.accuracies))

    def summary(self) -> dict:
        return {
            "classes": self.k,
            "iterations": int(len(self.accuracies)),
            "fit_fraction": self.fit_fraction,
            "seed": self.seed,
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "min_accuracy": float(np.min(self.accuracies)),
            "max_accuracy": float(np.max(self.accuracies)),
            "resamples": self.resamples,
            "confusion": self.confusion.astype(int).tolist(),
        }

    def to_dict(self) -> dict:
        d = self.summary()
        d["accuracies"] = self.accuracies.tolist()
        d["curve"] = {"n": self.curve_n.tolist(), "mean": self.curve_mean.tolist(),
                      "min": self.curve_min.tolist(), "max": self.curve_max.tolist()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        c = d["curve"]
        return cls(np.array(d["accuracies"]), np.array(d["confusion"]), np.array(c["n"]),
                   np.array(c["mean"]), np.array(c["min"]), np.array(c["max"]),
                   d["classes"], d["fit_fraction"], d["seed"], d.get("resamples", 0))

    def write_iterations_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "accuracy"])
            for i, a in enumerate(self.accuracies, start=1):
                w.writerow([i, repr(float(a))])

    def write_curve_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n_fit_samples", "mean_accuracy", "min_accuracy", "max_accuracy"])
            for row in zip(self.curve_n, self.curve_mean, self.curve_min, self.curve_max):
                w.writerow([int(row[0]), *(repr(float(x)) for x in row[1:])])

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def accuracy_vs_samples(v, labels, k: int, seed: int, repeats: int = 20, n_points=None,
                        rule: str = "count_optimal"):
    """Accuracy on all data against the number of stream samples fitted.

    Each repeat streams a fresh random permutation through the online fitter;
    the accuracy after ``n`` updates is the accuracy of thresholds fitted
    from those ``n`` samples.  Returns ``(n, mean, min, max)``.
    """
    v = np.asarray(v, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n_total = len(v)
    if n_points is None:
        n_points = np.unique(np.linspace(k, n_total, 40).round().astype(int))
    n_points = np.asarray(n_points, dtype=int)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    traces = np.empty((repeats, n_total))
    for r in range(repeats):
        perm = rng.permutation(n_total)
        fit = fit_thresholds_online(v[perm], labels[perm], k, rule=rule, trace=True,
                                    eval_v=v, eval_labels=labels, allow_incomplete=True)
        traces[r] = fit.trace
    pts = traces[:, n_points - 1]
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    # the float mean of equal values can land an ulp outside them
    return n_points, np.clip(pts.mean(axis=0), lo, hi), lo, hi


def cross_validate(v, labels, k: int, fit_fraction: float, iterations: int, seed: int,
                   rule: str = "count_optimal", curve_repeats: int = 20, max_resamples: int = 1000) -> EvalReport:
    """Fit thresholds on a random ``fit_fraction`` of the data and score the rest."""
    if not 0 < fit_fraction < 1:
        raise ValidationError("fit_fraction must lie in (0, 1)")
    if iterations < 1:
        raise ValidationError("iterations must be at least 1")
    v = np.asarray(v, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n = len(v)
    n_fit = int(round(fit_fraction * n))
    if not k <= n_fit < n:
        raise ValidationError(f"fit split of {n_fit} samples cannot cover {k} classes and leave a test set")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    accs = np.empty(iterations)
    confusion = np.zeros((k, k), dtype=int)
    resamples = 0
    for it in range(iterations):
        for _ in range(max_resamples):
            perm = rng.permutation(n)
            fit_idx, test_idx = perm[:n_fit], perm[n_fit:]
            if len(np.unique(labels[fit_idx])) == k:
                break
            resamples += 1
            log.info("iteration %d: fit split missing a class, resampling", it)
        else:
            raise IncompleteFitError(set(range(k)) - set(labels[fit_idx].tolist()))
        fit = fit_thresholds_online(v[fit_idx], labels[fit_idx], k, rule=rule)
        pred = classify_by_threshold(v[test_idx], fit.thresholds)
        accs[it] = np.mean(pred == labels[test_idx])
        np.add.at(confusion, (labels[test_idx], pred), 1)
    cn, cmean, cmin, cmax = accuracy_vs_samples(v, labels, k, seed, repeats=curve_repeats, rule=rule)
    return EvalReport(accs, confusion, cn, cmean, cmin, cmax, k, float(fit_fraction), int(seed), resamples)
