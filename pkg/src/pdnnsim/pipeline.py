"""End-to-end run: record -> train -> compile -> align -> simulate -> fit and
cross-validate -> report.

A run is described by one JSON document (:class:`RunConfig`).  Every random
draw comes from a named seed derived from the config; there is no wall-clock
entropy.  Expensive stages are cached under a key hashed from exactly the
inputs they depend on, so changing e.g. the fit fraction re-runs only the
evaluation.  Relative paths resolve against ``$PDNNSIM_ROOT`` when set,
otherwise the working directory.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import shutil
import tempfile
import time
import zlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__, plotting
from .calibration import (
    THRESHOLD_RULES,
    AlignmentConfig,
    AlignmentResult,
    EvalReport,
    align_rings,
    cross_validate,
    verify_alignment,
)
from .dataset import Dataset, DatasetSpec, PrintNoise, catalog_version, generate_dataset, load_dataset_csv
from .devices import DeviceParams, EvalMode
from .errors import ConfigError, PdnnError, StageError
from .network import (
    DEFAULT_FULL_SCALE,
    RING_COUNT,
    ChipState,
    PhotonicChip,
    SupplyPlan,
    calibrate_operating_point,
    forward,
    v_out,
)
from .optics import ArrayGeometry, BeamParams, ImageFormer, NoiseModel
from .training import (
    TrainConfig,
    WeightSolution,
    build_lookup_table,
    record_calibration_pixels,
    train_digital_twin,
    weights_to_currents,
    write_loss_csv,
)

log = logging.getLogger(__name__)

ROOT_ENV = "PDNNSIM_ROOT"
EXPERIMENTS = {"two_class": 2, "four_class": 4}
DEFAULT_FIT_FRACTION = {2: 0.25, 4: 0.5}
SEED_NAMES = ("eval_dataset", "train_dataset", "training", "chip", "pixel_noise", "cross_validation")
PATH_KEYS = ("out_dir", "cache_dir", "dataset", "weights", "chip_state")
INPUT_PATHS = ("dataset", "weights", "chip_state")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _build(kind, section: dict, where: str):
    """Instantiate a dataclass from a dict, rejecting unknown keys."""
    allowed = {f.name for f in fields(kind) if f.init}
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return kind(**{k: tuple(v) if isinstance(v, list) else v for k, v in section.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from None


def _check_keys(section, allowed, where: str) -> dict:
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return section


@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on.  See ``README.md`` for the schema."""

    experiment: str = "two_class"
    mode: str = "physical"
    seed: int = 0
    iterations: int = 200
    fit_fraction: float | None = None  # None: 0.25 for 2 classes, 0.5 for 4
    threshold_rule: str = "count_optimal"
    curve_repeats: int = 20
    seeds: dict = field(default_factory=dict)  # explicit named seeds
    paths: dict = field(default_factory=dict)
    devices: dict = field(default_factory=dict)
    optics: dict = field(default_factory=dict)  # {beam, geometry, noise}
    dataset: dict = field(default_factory=dict)  # {per_class, noise}
    training: dict = field(default_factory=dict)
    chip: dict = field(default_factory=dict)  # {ring_offset_spread_nm, supply}
    calibration: dict = field(default_factory=dict)  # {full_scale_fraction}
    alignment: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {sorted(EXPERIMENTS)}")
        try:
            EvalMode(self.mode)
        except ValueError:
            raise ConfigError("mode must be 'ideal' or 'physical'") from None
        if not isinstance(self.iterations, int) or self.iterations < 1:
            raise ConfigError("iterations must be a positive integer")
        if self.fit_fraction is not None and not 0 < self.fit_fraction < 1:
            raise ConfigError("fit_fraction must lie in (0, 1)")
        if self.threshold_rule not in THRESHOLD_RULES:
            raise ConfigError(f"threshold_rule must be one of {THRESHOLD_RULES}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        _check_keys(self.seeds, SEED_NAMES, "seeds")
        _check_keys(self.paths, PATH_KEYS, "paths")
        _check_keys(self.optics, ("beam", "geometry", "noise"), "optics")
        _check_keys(self.dataset, ("per_class", "noise"), "dataset")
        _check_keys(self.chip, ("ring_offset_spread_nm", "supply"), "chip")
        _check_keys(self.calibration, ("full_scale_fraction",), "calibration")
        # build every parameter object once so bad values fail at load time
        self.device_params()
        self.image_former()
        self.dataset_spec("eval_dataset")
        self.train_config()
        self.supply_plan()
        self.alignment_config()
        if self.chip.get("ring_offset_spread_nm", 0.0) < 0:
            raise ConfigError("ring_offset_spread_nm must be non-negative")

    @property
    def classes(self) -> int:
        return EXPERIMENTS[self.experiment]

    @property
    def effective_fit_fraction(self) -> float:
        return self.fit_fraction if self.fit_fraction is not None else DEFAULT_FIT_FRACTION[self.classes]

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        _check_keys(data, [f.name for f in fields(cls)], "config")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "classes" in kw:
            classes = kw.pop("classes")
            names = {v: k for k, v in EXPERIMENTS.items()}
            if classes not in names:
                raise ConfigError("classes must be 2 or 4")
            kw["experiment"] = names[classes]
        if "out_dir" in kw:
            kw["paths"] = {**self.paths, "out_dir": str(kw.pop("out_dir"))}
        return replace(self, **kw)

    # parameter objects

    def device_params(self) -> DeviceParams:
        try:
            return DeviceParams.from_dict(self.devices)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid devices: {exc}") from None

    def image_former(self) -> ImageFormer:
        beam = _build(BeamParams, self.optics.get("beam", {}), "optics.beam")
        geo = _build(ArrayGeometry, self.optics.get("geometry", {}), "optics.geometry")
        noise = _build(NoiseModel, self.optics.get("noise", {}), "optics.noise")
        try:
            return ImageFormer(beam, geo, noise)
        except ValueError as exc:
            raise ConfigError(f"invalid optics: {exc}") from None

    def dataset_spec(self, seed_name: str) -> DatasetSpec:
        noise = _build(PrintNoise, self.dataset.get("noise", {}), "dataset.noise")
        try:
            return DatasetSpec(self.classes, int(self.dataset.get("per_class", 108)),
                               self.named_seeds()[seed_name], noise)
        except ValueError as exc:
            raise ConfigError(f"invalid dataset: {exc}") from None

    def train_config(self) -> TrainConfig:
        section = {**self.training, "seed": self.named_seeds()["training"]}
        _build(TrainConfig, section, "training")  # key check
        try:
            return TrainConfig.for_classes(self.classes, **{
                k: tuple(v) if isinstance(v, list) else v for k, v in section.items()})
        except ValueError as exc:
            raise ConfigError(f"invalid training: {exc}") from None

    def supply_plan(self) -> SupplyPlan:
        return _build(SupplyPlan, self.chip.get("supply", {}), "chip.supply")

    def alignment_config(self) -> AlignmentConfig:
        return _build(AlignmentConfig, self.alignment, "alignment")

    def named_seeds(self) -> dict:
        """One integer seed per random source, derived from ``seed`` unless
        given explicitly."""
        out = {}
        for name in SEED_NAMES:
            if name in self.seeds:
                out[name] = int(self.seeds[name])
            else:
                seq = np.random.SeedSequence([self.seed, zlib.crc32(name.encode())])
                out[name] = int(seq.generate_state(1)[0])
        return out

    # paths

    def resolve(self, key: str) -> Path | None:
        value = self.paths.get(key)
        if value is None:
            if key == "out_dir":
                value = f"runs/{self.experiment}_{self.mode}"
            else:
                return None
        p = Path(os.path.expandvars(str(value))).expanduser()
        if not p.is_absolute():
            p = Path(os.environ.get(ROOT_ENV, ".")) / p
        return p

    def check_paths(self) -> None:
        for key in INPUT_PATHS:
            p = self.resolve(key)
            if p is not None and not p.is_file():
                raise ConfigError(f"paths.{key} does not exist: {p}")
        out = self.resolve("out_dir")
        if out.exists() and not out.is_dir():
            raise ConfigError(f"out_dir is not a directory: {out}")

    def config_hash(self) -> str:
        """Hash of everything that can change results; output locations
        are excluded, input files count by content."""
        d = self.to_dict()
        paths = d.pop("paths")
        d["inputs"] = {k: file_digest(self.resolve(k)) for k in INPUT_PATHS if paths.get(k)}
        d["package_version"] = __version__
        return digest(d)


class StageCache:
    """Content-addressed store: ``root/<stage>/<key>/`` holding ``meta.json``
    and optionally ``arrays.npz``."""

    def __init__(self, root: str | Path | None):
        self.root = Path(root) if root is not None else None

    def _dir(self, stage: str, key: str) -> Path:
        return self.root / stage / key

    def get(self, stage: str, key: str):
        if self.root is None:
            return None
        d = self._dir(stage, key)
        meta = d / "meta.json"
        if not meta.is_file():
            return None
        arrays = {}
        if (d / "arrays.npz").is_file():
            with np.load(d / "arrays.npz") as npz:
                arrays = {k: npz[k] for k in npz.files}
        return json.loads(meta.read_text()), arrays

    def put(self, stage: str, key: str, meta: dict, arrays: dict | None = None) -> None:
        if self.root is None:
            return
        final = self._dir(stage, key)
        final.parent.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(dir=final.parent, prefix=".tmp-"))
        try:
            (tmp / "meta.json").write_text(canonical_json(meta))
            if arrays:
                np.savez(tmp / "arrays.npz", **arrays)
            if final.exists():
                shutil.rmtree(tmp)
            else:
                tmp.rename(final)
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise


@dataclass
class PipelineReport:
    data: dict
    timings: dict = field(default_factory=dict)  # s per stage, not hashed
    cached: dict = field(default_factory=dict)  # stage -> cache hit, not hashed

    @property
    def report_hash(self) -> str:
        return digest(self.data)

    @property
    def mean_accuracy(self) -> float:
        return self.data["evaluation"]["mean_accuracy"]

    def to_dict(self) -> dict:
        return {**self.data, "report_hash": self.report_hash,
                "runtime": {"timings_s": self.timings, "cached": self.cached}}

    def save(self, path: str | Path) -> None:
        _atomic_write(path, json.dumps(self.to_dict(), indent=2, default=_jsonable))

    @classmethod
    def load(cls, path: str | Path) -> "PipelineReport":
        d = json.loads(Path(path).read_text())
        runtime = d.pop("runtime", {})
        d.pop("report_hash", None)
        return cls(d, runtime.get("timings_s", {}), runtime.get("cached", {}))


def _atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


class _Runner:
    def __init__(self, cfg: RunConfig, cache: StageCache, config_hash: str):
        self.cfg = cfg
        self.cache = cache
        self.config_hash = config_hash
        self.timings: dict = {}
        self.cached: dict = {}
        self.stamps: dict = {}

    def stage(self, name: str, key_payload, compute, seed: int | None = None,
              load=None, dump=None):
        """Run one stage, or reuse its cached result when ``load``/``dump``
        are given and the key matches."""
        key = digest({"stage": name, **key_payload}) if key_payload is not None else None
        self.stamps[name] = {"config_hash": self.config_hash, "seed": seed, "key": key}
        t0 = time.perf_counter()
        try:
            hit = self.cache.get(name, key) if (key and load) else None
            if hit is not None:
                result = load(*hit)
                self.cached[name] = True
            else:
                result = compute()
                # None marks cheap stages that are always recomputed
                self.cached[name] = False if (key and load) else None
                if key and dump:
                    self.cache.put(name, key, *dump(result))
        except PdnnError as exc:
            raise StageError(name, exc) from exc
        except (ValueError, ArithmeticError, OSError, KeyError) as exc:
            raise StageError(name, exc) from exc
        self.timings[name] = round(time.perf_counter() - t0, 4)
        log.info("stage %s done in %.2fs%s", name, self.timings[name],
                 " (cached)" if self.cached[name] else "")
        return result, key


def _dataset_stage(run: _Runner, name: str, spec: DatasetSpec, csv_path: Path | None):
    if csv_path is not None:
        payload = {"csv": file_digest(csv_path)}

        def compute():
            grids, labels = load_dataset_csv(csv_path)
            if labels.max() >= spec.classes:
                raise ValueError(f"dataset {csv_path} has more than {spec.classes} classes")
            n = len(labels)
            return Dataset(grids, labels, np.full(n, -1), np.zeros(n, dtype=np.int64), spec)
    else:
        payload = {"spec": spec.to_dict(), "catalog": catalog_version()}

        def compute():
            return generate_dataset(spec)

    def dump(ds):
        return {}, {"grids": ds.grids, "labels": ds.labels, "variants": ds.variants,
                    "noise_seeds": ds.noise_seeds}

    def load(meta, a):
        return Dataset(a["grids"], a["labels"], a["variants"], a["noise_seeds"], spec)

    return run.stage(name, payload, compute, seed=spec.seed, load=load, dump=dump)


def run_pipeline(cfg: RunConfig, write_outputs: bool = True) -> PipelineReport:
    """Execute every stage and, with ``write_outputs``, write the artifacts
    and figures to ``out_dir``."""
    cfg.check_paths()
    seeds = cfg.named_seeds()
    out_dir = cfg.resolve("out_dir")
    cache_dir = cfg.resolve("cache_dir") or (out_dir / ".cache")
    chash = cfg.config_hash()
    run = _Runner(cfg, StageCache(cache_dir if write_outputs or cfg.paths.get("cache_dir") else None), chash)
    k = cfg.classes
    mode = EvalMode(cfg.mode)
    devices = cfg.device_params()
    former = cfg.image_former()
    optics_key = {"optics": cfg.optics}

    budget, _ = run.stage("budget", None, lambda: former.budget)
    pd_current = float(devices.photodiode.responsivity * former.gain.mean())

    eval_ds, eval_key = _dataset_stage(run, "dataset_eval", cfg.dataset_spec("eval_dataset"),
                                       cfg.resolve("dataset"))
    train_ds, train_ds_key = _dataset_stage(run, "dataset_train", cfg.dataset_spec("train_dataset"), None)

    tcfg = cfg.train_config()
    weights_path = cfg.resolve("weights")
    if weights_path is not None:
        sol, train_key = run.stage("train", {"weights": file_digest(weights_path)},
                                   lambda: WeightSolution.load(weights_path))
    else:
        sol, train_key = run.stage(
            "train",
            {"data": train_ds_key, **optics_key, "train": asdict(tcfg)},
            lambda: train_digital_twin(record_calibration_pixels(train_ds.grids, former),
                                       train_ds.labels, tcfg),
            seed=tcfg.seed,
            load=lambda meta, a: WeightSolution.from_dict(meta),
            dump=lambda s: (s.to_dict(), None),
        )

    lut = build_lookup_table(devices.attenuator)
    (currents, compile_report), _ = run.stage("compile", None, lambda: weights_to_currents(sol, lut))

    spread = float(cfg.chip.get("ring_offset_spread_nm", devices.ring.fwhm))
    fs = float(cfg.calibration.get("full_scale_fraction", DEFAULT_FULL_SCALE))

    def build_chip():
        offsets = np.random.default_rng(seeds["chip"]).uniform(-spread, spread, RING_COUNT)
        chip = PhotonicChip(devices=devices, supply=cfg.supply_plan(), ring_offsets=tuple(offsets))
        # gains are set against the frames the chip is expected to see
        op = calibrate_operating_point(chip, former.form_image(train_ds.grids), weights=sol.weights,
                                       full_scale_fraction=fs)
        return chip.with_op(op)

    chip, _ = run.stage("calibrate", None, build_chip, seed=seeds["chip"])

    start_heaters = np.zeros(RING_COUNT)
    state_path = cfg.resolve("chip_state")
    if state_path is not None:
        start_heaters = ChipState.load(state_path).heater_voltages
    state0 = ChipState(currents, start_heaters, chip.op.relu_biases)
    acfg = cfg.alignment_config()
    align_payload = {"train": train_key, "train_data": train_ds_key, **optics_key, "devices": devices.to_dict(),
                     "supply": asdict(chip.supply), "offsets": list(chip.ring_offsets),
                     "full_scale": fs, "alignment": asdict(acfg), "start": start_heaters.tolist()}
    alignment, align_key = run.stage(
        "align", align_payload, lambda: align_rings(chip, state0, acfg), seed=seeds["chip"],
        load=lambda meta, a: AlignmentResult.from_dict(meta),
        dump=lambda r: (r.to_dict(), None),
    )
    state = state0.with_heaters(alignment.heater_voltages)
    verification, _ = run.stage("verify", None,
                                lambda: verify_alignment(chip, state, former.reference_frame()))

    def simulate():
        rng = np.random.default_rng(seeds["pixel_noise"])
        frames = former.form_image(eval_ds.grids, rng=rng)
        return {m.value: v_out(forward(chip, state, frames, m)) for m in EvalMode}

    sim, sim_key = run.stage(
        "simulate", {"align": align_key, "eval": eval_key, "seed": seeds["pixel_noise"]},
        simulate, seed=seeds["pixel_noise"],
        load=lambda meta, a: {m: a[m] for m in meta["modes"]},
        dump=lambda s: ({"modes": sorted(s)}, s),
    )

    ff = cfg.effective_fit_fraction

    def evaluate():
        return {m: cross_validate(v, eval_ds.labels, k, ff, cfg.iterations, seeds["cross_validation"],
                                  rule=cfg.threshold_rule, curve_repeats=cfg.curve_repeats)
                for m, v in sim.items()}

    evals, _ = run.stage(
        "evaluate",
        {"sim": sim_key, "fit_fraction": ff, "iterations": cfg.iterations, "rule": cfg.threshold_rule,
         "seed": seeds["cross_validation"], "curve_repeats": cfg.curve_repeats},
        evaluate, seed=seeds["cross_validation"],
        load=lambda meta, a: {m: EvalReport.from_dict(d) for m, d in meta.items()},
        dump=lambda e: ({m: r.to_dict() for m, r in e.items()}, None),
    )

    primary = evals[mode.value]
    ideal_acc = evals["ideal"].mean_accuracy
    phys_acc = evals["physical"].mean_accuracy
    metrics = {key: val for key, val in sol.train_metrics.items() if key != "epoch_losses"}
    data = {
        "config_hash": chash,
        "package_version": __version__,
        "config": {key: val for key, val in cfg.to_dict().items() if key != "paths"},
        "seeds": seeds,
        "stages": run.stamps,
        "classes": k,
        "mode": mode.value,
        "budget": budget.to_dict(),
        "photocurrent_per_pixel_a": pd_current,
        "dataset": {"eval": {"n": len(eval_ds), "class_counts": eval_ds.class_counts().tolist()},
                    "train": {"n": len(train_ds), "class_counts": train_ds.class_counts().tolist()}},
        "training": metrics,
        "compile": compile_report.to_dict(),
        "operating_point": chip.op.to_dict(),
        "ring_offsets_nm": list(chip.ring_offsets),
        "alignment": alignment.to_dict(),
        "verification": verification,
        "evaluation": primary.to_dict(),
        "mode_comparison": {"ideal": ideal_acc, "physical": phys_acc, "gap": ideal_acc - phys_acc},
    }
    data = json.loads(canonical_json(data))
    report = PipelineReport(data, run.timings, run.cached)

    if write_outputs:
        try:
            _write_outputs(out_dir, report, eval_ds, sol, state, sim, evals, alignment)
        except OSError as exc:
            raise StageError("report", exc) from exc
    return report


def _write_outputs(out_dir: Path, report: PipelineReport, eval_ds: Dataset, sol: WeightSolution,
                   state: ChipState, sim: dict, evals: dict, alignment: AlignmentResult) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    if (eval_ds.variants >= 0).all():
        eval_ds.save_csv(out_dir / "dataset_eval.csv")
        eval_ds.save_manifest(out_dir / "dataset_eval_manifest.json")
    _atomic_write(out_dir / "budget.json", json.dumps(report.data["budget"], indent=2))
    sol.save(out_dir / "weights.json")
    write_loss_csv(sol, out_dir / "training_loss.csv")
    state.save(out_dir / "chip_state.json")
    _atomic_write(out_dir / "alignment.json", alignment.to_json())
    with open(out_dir / "v_out.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "label", *(f"v_out_{m}_v" for m in sorted(sim))])
        for i, label in enumerate(eval_ds.labels):
            w.writerow([i, int(label), *(repr(float(sim[m][i])) for m in sorted(sim))])
    primary = evals[report.data["mode"]]
    primary.write_json(out_dir / "eval.json")
    report.save(out_dir / "report.json")
    write_plot_data(out_dir / "report.json", out_dir)
    figs = out_dir / "figures"
    plotting.loss_curve(sol.train_metrics.get("epoch_losses", [np.nan]), figs / "training_loss.png")
    if alignment.accepted_v_sums:
        plotting.alignment_descent(alignment.accepted_v_sums, figs / "alignment_v_sum.png")


def write_plot_data(report_path: str | Path, out_dir: str | Path) -> dict:
    """CSV series and figures for accuracy vs iteration and accuracy vs
    number of fit samples.  Returns the written paths."""
    report = PipelineReport.load(report_path)
    ev = EvalReport.from_dict(report.data["evaluation"])
    out_dir = Path(out_dir)
    figs = out_dir / "figures"
    figs.mkdir(parents=True, exist_ok=True)
    paths = {"iterations_csv": out_dir / "accuracy_vs_iteration.csv",
             "samples_csv": out_dir / "accuracy_vs_samples.csv"}
    acc = ev.accuracies
    running = np.cumsum(acc) / np.arange(1, len(acc) + 1)
    with open(paths["iterations_csv"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "accuracy", "running_mean"])
        for i, (a, r) in enumerate(zip(acc, running), start=1):
            w.writerow([i, repr(float(a)), repr(float(r))])
    ev.write_curve_csv(paths["samples_csv"])
    title = f"{ev.k}-class, {report.data['mode']}"
    paths["iterations_png"] = plotting.accuracy_vs_iteration(acc, figs / "accuracy_vs_iteration.png", title)
    paths["samples_png"] = plotting.accuracy_vs_samples(ev.curve_n, ev.curve_mean, ev.curve_min, ev.curve_max,
                                                        figs / "accuracy_vs_samples.png", title)
    letters = "pdat"[: ev.k]
    paths["confusion_png"] = plotting.confusion(ev.confusion, figs / "confusion.png", labels=letters, title=title)
    return paths
