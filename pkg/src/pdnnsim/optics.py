"""Free-space image formation on the 5x6 grating-coupler array and on-chip
routing of the pixels into four overlapping 3x4 sub-images.

Pixel grids are numpy arrays of shape ``(6, 5)`` (rows, columns); batches
carry leading axes.  Routing indices are ``(col, row)`` pairs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GeometryError, ValidationError

ROWS, COLS = 6, 5
GRID_SHAPE = (ROWS, COLS)
N_PIXELS = ROWS * COLS


def db(fraction: float) -> float:
    """Loss in dB of a power fraction (positive for fraction < 1)."""
    return -10.0 * math.log10(fraction)


@dataclass(frozen=True)
class BeamParams:
    power: float = 63.0  # mW at the collimator
    diameter: float = 870.0  # um
    profile: str = "uniform"  # or "gaussian"
    sigma: float | None = None  # um, gaussian only

    def __post_init__(self):
        if self.power <= 0 or self.diameter <= 0:
            raise ValidationError("beam power and diameter must be positive")
        if self.profile not in ("uniform", "gaussian"):
            raise ValidationError(f"unknown beam profile {self.profile!r}")
        if self.profile == "gaussian" and not (self.sigma and self.sigma > 0):
            raise ValidationError("gaussian profile needs a positive sigma")

    @property
    def area(self) -> float:
        return math.pi * (self.diameter / 2.0) ** 2


@dataclass(frozen=True)
class ArrayGeometry:
    cols: int = COLS
    rows: int = ROWS
    aperture_w: float = 140.0  # um
    aperture_h: float = 150.0  # um
    # 5 dB measured grating-coupler loss, i.e. "about 30%"
    gc_efficiency: float = 10.0 ** -0.5
    fill_factor: float = 0.0048

    def __post_init__(self):
        if self.cols * self.rows != N_PIXELS:
            raise ValidationError("the pixel array must have 30 elements")
        if not 0 < self.fill_factor <= 1 or not 0 < self.gc_efficiency <= 1:
            raise ValidationError("fill factor and coupling efficiency must lie in (0, 1]")

    @property
    def aperture_area(self) -> float:
        return self.aperture_w * self.aperture_h

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """(x, y) offsets of each pixel from the aperture center, um."""
        xs = (np.arange(self.cols) + 0.5) * self.aperture_w / self.cols - self.aperture_w / 2
        ys = (np.arange(self.rows) + 0.5) * self.aperture_h / self.rows - self.aperture_h / 2
        return np.meshgrid(xs, ys)


@dataclass(frozen=True)
class NoiseModel:
    pixel_nonuniformity: float = 0.03  # half-width of the multiplicative spread
    photocurrent_sigma: float = 0.0  # per-frame relative std
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.pixel_nonuniformity < 1:
            raise ValidationError("pixel non-uniformity must lie in [0, 1)")
        if self.photocurrent_sigma < 0:
            raise ValidationError("photocurrent sigma must be non-negative")


@dataclass(frozen=True)
class LossBudget:
    overlap_db: float
    fill_db: float
    gc_db: float

    @property
    def total_db(self) -> float:
        return self.overlap_db + self.fill_db + self.gc_db

    @property
    def components(self) -> list[tuple[str, float]]:
        return [("overlap", self.overlap_db), ("fill", self.fill_db), ("grating", self.gc_db)]

    def to_dict(self) -> dict:
        return {"overlap_db": self.overlap_db, "fill_db": self.fill_db,
                "gc_db": self.gc_db, "total_db": self.total_db}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def path_loss_budget(beam: BeamParams, geo: ArrayGeometry) -> LossBudget:
    """Collimator-to-waveguide loss for one pixel.

    Three terms: the share of the beam falling on the aperture, the share of
    the aperture covered by one grating coupler, and the coupler loss.
    """
    if beam.area < geo.aperture_area:
        raise GeometryError(
            f"beam area {beam.area:.0f} um^2 smaller than aperture {geo.aperture_area:.0f} um^2"
        )
    return LossBudget(
        overlap_db=db(geo.aperture_area / beam.area),
        fill_db=db(geo.fill_factor),
        gc_db=db(geo.gc_efficiency),
    )


@dataclass(frozen=True)
class ImageFormer:
    """One image-formation setup with its frozen non-uniformity realization.

    The same beam illuminates the classification array and the calibration
    array, so both see the same per-pixel gain map.
    """

    beam: BeamParams = field(default_factory=BeamParams)
    geo: ArrayGeometry = field(default_factory=ArrayGeometry)
    noise: NoiseModel = field(default_factory=NoiseModel)
    gain: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        budget = path_loss_budget(self.beam, self.geo)
        p_w = self.beam.power * 1e-3
        if self.beam.profile == "uniform":
            intensity = np.full(GRID_SHAPE, p_w / self.beam.area)
        else:
            x, y = self.geo.pixel_centers()
            s2 = self.beam.sigma**2
            intensity = p_w / (2 * math.pi * s2) * np.exp(-(x**2 + y**2) / (2 * s2))
        per_pixel = intensity * self.geo.aperture_area * 10.0 ** (-(budget.fill_db + budget.gc_db) / 10)
        u = self.noise.pixel_nonuniformity
        rng = np.random.default_rng(self.noise.seed)
        spread = 1.0 + rng.uniform(-u, u, size=GRID_SHAPE)
        gain = per_pixel * spread
        gain.setflags(write=False)
        object.__setattr__(self, "gain", gain)

    @property
    def budget(self) -> LossBudget:
        return path_loss_budget(self.beam, self.geo)

    def form_image(self, scene, rng: np.random.Generator | None = None) -> np.ndarray:
        """Coupled power per pixel (W) for a transmittance scene in [0, 1].

        ``scene`` may be a single ``(6, 5)`` grid or a batch.  Per-frame
        photocurrent noise is only drawn when ``rng`` is supplied.
        """
        scene = np.asarray(scene, dtype=float)
        if scene.shape[-2:] != GRID_SHAPE:
            raise ValidationError(f"scene must end in shape {GRID_SHAPE}, got {scene.shape}")
        if np.any(scene < 0) or np.any(scene > 1):
            raise ValidationError("scene transmittance must lie in [0, 1]")
        frame = scene * self.gain
        sigma = self.noise.photocurrent_sigma
        if rng is not None and sigma > 0:
            frame = frame * np.clip(1.0 + sigma * rng.standard_normal(frame.shape), 0.0, None)
        return frame

    def reference_frame(self) -> np.ndarray:
        return self.form_image(np.ones(GRID_SHAPE))


def pixel_spread(frame) -> float:
    """Non-uniformity of a frame, (max - min) / (max + min)."""
    frame = np.asarray(frame, dtype=float)
    hi, lo = frame.max(), frame.min()
    return float((hi - lo) / (hi + lo)) if hi + lo > 0 else 0.0


@dataclass(frozen=True)
class RoutingPlan:
    patches: tuple  # 4 tuples of 12 (col, row) pairs
    route_loss_db: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "patches",
                           tuple(tuple((int(c), int(r)) for c, r in p) for p in self.patches))
        self.validate()

    def validate(self) -> None:
        if len(self.patches) != 4:
            raise ValidationError("routing plan needs exactly 4 patches")
        covered = set()
        for k, patch in enumerate(self.patches):
            if len(patch) != 12 or len(set(patch)) != 12:
                raise ValidationError(f"patch {k} must list 12 distinct pixels")
            cols = sorted({c for c, _ in patch})
            rows = sorted({r for _, r in patch})
            block = {(c, r) for c in cols for r in rows}
            contiguous = (len(cols) == 3 and len(rows) == 4
                          and cols[-1] - cols[0] == 2 and rows[-1] - rows[0] == 3)
            if not contiguous or block != set(patch):
                raise ValidationError(f"patch {k} is not a contiguous 3x4 block")
            for c, r in patch:
                if not (0 <= c < COLS and 0 <= r < ROWS):
                    raise ValidationError(f"pixel {(c, r)} outside the array")
            covered |= set(patch)
        if len(covered) != N_PIXELS:
            raise ValidationError("patches must cover all 30 pixels")
        if self.route_loss_db < 0:
            raise ValidationError("route loss must be non-negative")

    @property
    def split_counts(self) -> np.ndarray:
        """How many patches each pixel feeds, shape ``(6, 5)``."""
        counts = np.zeros(GRID_SHAPE, dtype=int)
        for patch in self.patches:
            for c, r in patch:
                counts[r, c] += 1
        return counts

    def index_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        rows = np.array([[r for _, r in p] for p in self.patches])
        cols = np.array([[c for c, _ in p] for p in self.patches])
        return rows, cols

    def path_factors(self) -> np.ndarray:
        """Power fraction delivered along each of the 48 paths, shape ``(4, 12)``."""
        rows, cols = self.index_arrays()
        return 10.0 ** (-self.route_loss_db / 10.0) / self.split_counts[rows, cols]

    def to_dict(self) -> dict:
        return {"patches": [list(map(list, p)) for p in self.patches],
                "route_loss_db": self.route_loss_db}


def default_routing_plan(col_offsets=(0, 2), row_offsets=(0, 2),
                         route_loss_db: float = 2.0) -> RoutingPlan:
    patches = []
    for r0 in row_offsets:
        for c0 in col_offsets:
            patches.append([(c0 + dc, r0 + dr) for dr in range(4) for dc in range(3)])
    return RoutingPlan(tuple(patches), route_loss_db)


def route_subimages(frame, plan: RoutingPlan) -> np.ndarray:
    """Split a frame into the four sub-images, shape ``(..., 4, 12)``."""
    frame = np.asarray(frame, dtype=float)
    if frame.shape[-2:] != GRID_SHAPE:
        raise ValidationError(f"frame must end in shape {GRID_SHAPE}")
    rows, cols = plan.index_arrays()
    return frame[..., rows, cols] * plan.path_factors()


def load_scene(path: str | Path) -> np.ndarray:
    """Read a 6-row by 5-column grid from CSV or whitespace-separated text."""
    text = Path(path).read_text().strip()
    if "," in text:
        rows = [[float(v) for v in row if v.strip()] for row in csv.reader(text.splitlines())]
    else:
        rows = [[float(v) for v in line.split()] for line in text.splitlines() if line.strip()]
    grid = np.array(rows, dtype=float)
    if grid.shape != GRID_SHAPE:
        raise ValidationError(f"scene file must hold a {ROWS}x{COLS} grid, got {grid.shape}")
    return grid
