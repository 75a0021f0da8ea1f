import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pdnnsim.dataset import (
    LETTERS,
    DatasetSpec,
    GlyphSpec,
    PrintNoise,
    apply_ops,
    apply_print_noise,
    base_bitmap,
    catalog_version,
    corner_round,
    generate_dataset,
    load_dataset_csv,
    n_variants,
    render_letter,
    shift,
    stroke_thin,
)
from pdnnsim.errors import ValidationError

binary_grids = arrays(np.int64, (6, 5), elements=st.integers(0, 1))


@pytest.mark.parametrize("letter", LETTERS)
def test_catalog_forms_are_distinct_and_lit(letter):
    assert n_variants(letter) == 9
    forms = [render_letter(letter, i) for i in range(9)]
    assert all(f.shape == (6, 5) and set(np.unique(f)) <= {0, 1} for f in forms)
    assert all(f.sum() >= 5 for f in forms)
    assert len({f.tobytes() for f in forms}) == 9
    assert np.array_equal(forms[0], base_bitmap(letter))


def test_forms_of_different_letters_never_coincide():
    seen = {}
    for letter in LETTERS:
        for i in range(9):
            key = render_letter(letter, i).tobytes()
            assert seen.setdefault(key, letter) == letter


def test_catalog_version_recorded():
    assert catalog_version()
    ds = generate_dataset(DatasetSpec(2, 9, seed=0))
    assert ds.manifest()["asset_version"] == catalog_version()


@pytest.mark.parametrize("k,n", [(2, 216), (4, 432)])
def test_default_sizes_and_balance(k, n):
    ds = generate_dataset(DatasetSpec(k, seed=3))
    assert len(ds) == n
    assert np.all(ds.class_counts() == 108)
    assert ds.grids.shape == (n, 6, 5)
    assert ds.grids.min() >= 0 and ds.grids.max() <= 1
    # every designed form is used equally often
    for label in range(k):
        assert np.all(np.bincount(ds.variants[ds.labels == label], minlength=9) == 12)


def test_determinism_and_seed_sensitivity():
    a = generate_dataset(DatasetSpec(4, 20, seed=5))
    b = generate_dataset(DatasetSpec(4, 20, seed=5))
    c = generate_dataset(DatasetSpec(4, 20, seed=6))
    assert np.array_equal(a.grids, b.grids) and np.array_equal(a.labels, b.labels)
    assert not np.array_equal(a.grids, c.grids)


def test_noisy_samples_stay_nearest_their_letter():
    ds = generate_dataset(DatasetSpec(4, 54, seed=1))
    templates = np.array([[render_letter(l, i) for i in range(9)] for l in LETTERS], dtype=float)
    d = ((ds.grids[:, None, None] - templates[None]) ** 2).sum(axis=(-1, -2)).min(axis=2)
    assert np.mean(d.argmin(axis=1) == ds.labels) > 0.95


def test_csv_roundtrip(tmp_path):
    ds = generate_dataset(DatasetSpec(2, 12, seed=2))
    ds.save_csv(tmp_path / "d.csv")
    ds.save_manifest(tmp_path / "m.json")
    grids, labels = load_dataset_csv(tmp_path / "d.csv")
    assert np.array_equal(grids, ds.grids) and np.array_equal(labels, ds.labels)
    m = json.loads((tmp_path / "m.json").read_text())
    assert m["n_samples"] == 24 and m["class_counts"] == [12, 12]
    assert not list(tmp_path.glob("*.tmp"))


def test_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValidationError):
        load_dataset_csv(p)


def test_spec_validation():
    with pytest.raises(ValidationError):
        DatasetSpec(3)
    with pytest.raises(ValidationError):
        DatasetSpec(2, 0)
    with pytest.raises(ValidationError):
        PrintNoise(blur_mix=0.5)
    with pytest.raises(ValidationError):
        GlyphSpec("q")
    with pytest.raises(ValidationError):
        render_letter("p", 9)


def test_variant_op_errors():
    g = base_bitmap("t")
    with pytest.raises(ValidationError):
        apply_ops(g, [{"op": "rotate"}])
    dark = tuple(map(int, np.argwhere(g == 0)[0]))
    with pytest.raises(ValidationError):
        stroke_thin(g, [dark])
    with pytest.raises(ValidationError):
        corner_round(g, dark)


@given(binary_grids, st.integers(-2, 2), st.integers(-2, 2))
def test_shift_moves_pixels_and_inverts_when_nothing_falls_off(grid, dx, dy):
    out = shift(grid, dx, dy)
    assert out.sum() <= grid.sum()
    if out.sum() == grid.sum():
        assert np.array_equal(shift(out, -dx, -dy), grid)


@given(binary_grids, st.floats(0, 0.3), st.floats(0, 0.2), st.floats(0, 0.5), st.integers(0, 2**32 - 1))
def test_print_noise_bounded_and_dark_stays_dark(grid, blur, jitter, drop, seed):
    noise = PrintNoise(blur, jitter, drop, seed)
    out = apply_print_noise(grid, noise)
    assert out.shape == (6, 5) and out.min() >= 0 and out.max() <= 1
    assert np.array_equal(out, apply_print_noise(grid, noise))
    assert np.all(apply_print_noise(np.zeros((6, 5)), noise) == 0)


@given(binary_grids)
def test_noise_free_print_is_identity(grid):
    assert np.array_equal(apply_print_noise(grid, PrintNoise(0, 0, 0)), grid.astype(float))


def test_base_bitmaps_of_distinct_letters_differ():
    for i, a in enumerate(LETTERS):
        for b in LETTERS[i + 1:]:
            assert np.sum(base_bitmap(a) != base_bitmap(b)) >= 4, (a, b)


@pytest.mark.parametrize("letter", LETTERS)
def test_variants_share_most_lit_pixels_with_base(letter):
    base = base_bitmap(letter)
    for i in range(n_variants(letter)):
        form = render_letter(letter, i)
        assert np.sum(form & base) >= 0.6 * base.sum()


@pytest.mark.parametrize("letter", LETTERS)
def test_mean_perturbation_bound(letter):
    noise = PrintNoise()
    grid = base_bitmap(letter)
    dev = [np.abs(apply_print_noise(grid, noise, np.random.default_rng(s)) - grid).mean() for s in range(1000)]
    assert np.mean(dev) <= noise.blur_mix + 2 * noise.pixel_jitter_sigma


@pytest.mark.parametrize("k", [2, 4])
def test_zero_noise_dataset_is_learnable(k):
    from pdnnsim.optics import ImageFormer, default_routing_plan
    from pdnnsim.training import TrainConfig, extract_patches, predict, record_calibration_pixels, train_digital_twin

    ds = generate_dataset(DatasetSpec(k, seed=0, noise=PrintNoise(0, 0, 0)))
    px = record_calibration_pixels(ds.grids, ImageFormer())
    cfg = TrainConfig.for_classes(k)
    sol = train_digital_twin(px, ds.labels, cfg)
    pred = predict(sol.weights, extract_patches(px, default_routing_plan()), cfg)
    assert np.mean(pred == ds.labels) >= 0.99
