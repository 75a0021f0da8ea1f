"""Synthetic printed-letter datasets on the 5x6 pixel grid.

Letters are rendered as transmitting strokes (1) on an opaque background (0)
from the versioned bitmap catalog in ``assets/glyphs.json``; each letter has
nine designed forms.  Print noise (ink bleed, density jitter, dropouts) is
applied per sample from a seed derived from the dataset seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .optics import GRID_SHAPE

LETTERS = ("p", "d", "a", "t")


@lru_cache(maxsize=1)
def glyph_catalog() -> dict:
    text = resources.files("pdnnsim").joinpath("assets/glyphs.json").read_text()
    return json.loads(text)


def catalog_version() -> str:
    return glyph_catalog()["version"]


def base_bitmap(letter: str) -> np.ndarray:
    try:
        rows = glyph_catalog()["letters"][letter]["base"]
    except KeyError:
        raise ValidationError(f"unknown letter {letter!r}") from None
    return np.array([[int(ch) for ch in row] for row in rows], dtype=int)


def n_variants(letter: str) -> int:
    return len(glyph_catalog()["letters"][letter]["variants"])


def shift(grid: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Translate by ``dx`` columns and ``dy`` rows, filling with zeros."""
    out = np.zeros_like(grid)
    h, w = grid.shape
    src = grid[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)]
    out[max(0, dy):max(0, dy) + src.shape[0], max(0, dx):max(0, dx) + src.shape[1]] = src
    return out


def stroke_thicken(grid: np.ndarray, col: int, side: int = 1) -> np.ndarray:
    out = grid.copy()
    target = col + side
    if 0 <= target < grid.shape[1]:
        out[:, target] |= grid[:, col]
    return out


def stroke_thin(grid: np.ndarray, at) -> np.ndarray:
    out = grid.copy()
    for r, c in at:
        if not out[r, c]:
            raise ValidationError(f"stroke_thin at unlit pixel {(r, c)}")
        out[r, c] = 0
    return out


def corner_round(grid: np.ndarray, at) -> np.ndarray:
    r, c = at
    padded = np.pad(grid, 1)
    vert = padded[r, c + 1] + padded[r + 2, c + 1]
    horiz = padded[r + 1, c] + padded[r + 1, c + 2]
    if not grid[r, c] or vert != 1 or horiz != 1:
        raise ValidationError(f"pixel {(r, c)} is not a stroke corner")
    out = grid.copy()
    out[r, c] = 0
    return out


_OPS = {
    "shift": lambda g, o: shift(g, int(o["dx"]), int(o["dy"])),
    "stroke_thicken": lambda g, o: stroke_thicken(g, int(o["col"]), int(o.get("side", 1))),
    "stroke_thin": lambda g, o: stroke_thin(g, o["at"]),
    "corner_round": lambda g, o: corner_round(g, o["at"]),
}


def apply_ops(grid: np.ndarray, ops) -> np.ndarray:
    for op in ops:
        try:
            fn = _OPS[op["op"]]
        except KeyError:
            raise ValidationError(f"unknown variant op {op.get('op')!r}") from None
        grid = fn(grid, op)
    return grid


@dataclass(frozen=True)
class GlyphSpec:
    letter: str
    base_bitmap: np.ndarray = field(default=None, repr=False, compare=False)
    variant_ops: tuple = ()

    def __post_init__(self):
        if self.letter not in LETTERS:
            raise ValidationError(f"unknown letter {self.letter!r}")
        if self.base_bitmap is None:
            object.__setattr__(self, "base_bitmap", base_bitmap(self.letter))
        if not self.variant_ops:
            object.__setattr__(self, "variant_ops",
                               tuple(glyph_catalog()["letters"][self.letter]["variants"]))


def render_letter(spec: GlyphSpec | str, variant_index: int) -> np.ndarray:
    """Binary ``(6, 5)`` bitmap of one designed letter form."""
    if isinstance(spec, str):
        spec = GlyphSpec(spec)
    if not 0 <= variant_index < len(spec.variant_ops):
        raise ValidationError(f"letter {spec.letter!r} has no variant {variant_index}")
    return apply_ops(spec.base_bitmap.copy(), spec.variant_ops[variant_index])


@dataclass(frozen=True)
class PrintNoise:
    blur_mix: float = 0.1
    pixel_jitter_sigma: float = 0.05
    dropout_prob: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.blur_mix <= 0.3:
            raise ValidationError("blur_mix must lie in [0, 0.3]")
        if self.pixel_jitter_sigma < 0 or not 0 <= self.dropout_prob < 1:
            raise ValidationError(f"invalid print noise: {self}")


def apply_print_noise(grid, noise: PrintNoise, rng: np.random.Generator | None = None) -> np.ndarray:
    """Bleed into 4-neighbours, multiplicative density jitter, pixel dropout.

    Every step is a bleed or a multiplication, so a dark grid stays dark.
    """
    rng = rng if rng is not None else np.random.default_rng(noise.seed)
    g = np.asarray(grid, dtype=float)
    p = np.pad(g, 1)
    neighbours = p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:]
    out = (1.0 - noise.blur_mix) * g + noise.blur_mix / 4.0 * neighbours
    out = out * (1.0 + noise.pixel_jitter_sigma * rng.standard_normal(g.shape))
    out = np.where(rng.random(g.shape) < noise.dropout_prob, 0.0, out)
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class DatasetSpec:
    classes: int = 2
    per_class: int = 108
    seed: int = 0
    noise: PrintNoise = field(default_factory=PrintNoise)

    def __post_init__(self):
        if self.classes not in (2, 4):
            raise ValidationError("classes must be 2 or 4")
        if self.per_class < 1:
            raise ValidationError("per_class must be positive")

    @property
    def letters(self) -> tuple[str, ...]:
        return LETTERS[: self.classes]

    def to_dict(self) -> dict:
        return {"classes": self.classes, "per_class": self.per_class, "seed": self.seed,
                "noise": asdict(self.noise)}


@dataclass
class Dataset:
    grids: np.ndarray  # (N, 6, 5) transmittance
    labels: np.ndarray  # (N,) int
    variants: np.ndarray  # (N,) variant index
    noise_seeds: np.ndarray  # (N,)
    spec: DatasetSpec

    def __len__(self) -> int:
        return len(self.labels)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.spec.classes)

    def save_csv(self, path: str | Path) -> None:
        """30 pixel columns (row-major) plus the label; written atomically."""
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        try:
            with open(tmp, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow([f"px_r{r}c{c}" for r in range(GRID_SHAPE[0]) for c in range(GRID_SHAPE[1])]
                                + ["label"])
                for grid, label in zip(self.grids, self.labels):
                    writer.writerow([repr(float(v)) for v in grid.ravel()] + [int(label)])
            tmp.replace(path)
        finally:
            tmp.unlink(missing_ok=True)

    def manifest(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "letters": list(self.spec.letters),
            "asset_version": catalog_version(),
            "n_samples": len(self),
            "class_counts": self.class_counts().tolist(),
            "noise_seeds": [int(s) for s in self.noise_seeds],
            "variants": [int(v) for v in self.variants],
        }

    def save_manifest(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(self.manifest(), indent=2))
        tmp.replace(path)


def load_dataset_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) != 31 or header[-1] != "label":
            raise ValidationError("dataset CSV needs 30 pixel columns and a label")
        rows = list(reader)
    data = np.array([[float(v) for v in row[:30]] for row in rows])
    labels = np.array([int(row[30]) for row in rows], dtype=int)
    return data.reshape(-1, *GRID_SHAPE), labels


def generate_dataset(spec: DatasetSpec) -> Dataset:
    """``per_class`` noisy samples per letter, cycling through its variants."""
    root = np.random.SeedSequence(spec.seed)
    shuffle_seq, noise_seq = root.spawn(2)
    n = spec.classes * spec.per_class
    noise_seeds = noise_seq.generate_state(n, dtype=np.uint32)
    grids, labels, variants = [], [], []
    for label, letter in enumerate(spec.letters):
        glyph = GlyphSpec(letter)
        nv = len(glyph.variant_ops)
        for i in range(spec.per_class):
            v = i % nv
            idx = label * spec.per_class + i
            clean = render_letter(glyph, v)
            rng = np.random.default_rng(int(noise_seeds[idx]))
            grids.append(apply_print_noise(clean, spec.noise, rng))
            labels.append(label)
            variants.append(v)
    order = np.random.default_rng(shuffle_seq).permutation(n)
    return Dataset(
        grids=np.array(grids)[order],
        labels=np.array(labels, dtype=int)[order],
        variants=np.array(variants, dtype=int)[order],
        noise_seeds=np.asarray(noise_seeds, dtype=np.int64)[order],
        spec=spec,
    )
