import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adeffect.detection_features import (
    FAMILIES,
    VOCAB_SIZES,
    DetectionFile,
    audio_loudness,
    compute_priors,
    load_detections,
    priors_from_counts,
    ratio_features,
    ratio_from_counts,
)


def test_prior_from_pooled_counts():
    files = [DetectionFile(objects=[0] * 800 + [1] * 200)]
    priors = compute_priors(files)
    assert priors["objects"][0] == pytest.approx(0.8)
    assert priors["objects"][1] == pytest.approx(0.2)


def test_worked_ratio_example_exact():
    prior = np.zeros(80)
    prior[0], prior[1] = 0.8, 0.2
    counts = np.zeros(80)
    counts[0], counts[1] = 3, 2  # p_v(person) = 0.6
    assert ratio_from_counts(counts, prior)[0] == 0.75


def test_zero_prior_gives_zero_ratio():
    prior = np.array([0.5, 0.5, 0.0])
    assert ratio_from_counts(np.array([1, 1, 0]), prior)[2] == 0.0


def test_video_without_detections_is_zero():
    np.testing.assert_array_equal(ratio_from_counts(np.zeros(8), np.full(8, 1 / 8)), np.zeros(8))


def test_priors_are_distributions(rng):
    tables = [{fam: rng.integers(0, 4, size=size) for fam, size in VOCAB_SIZES.items()} for _ in range(10)]
    priors = priors_from_counts(tables)
    for fam in FAMILIES:
        assert priors[fam].min() >= 0
        assert priors[fam].sum() == pytest.approx(1.0)


def test_priors_of_empty_family_are_zero():
    priors = priors_from_counts([DetectionFile().counts()])
    assert all(priors[f].sum() == 0 for f in FAMILIES)


def test_label_outside_vocabulary():
    with pytest.raises(ValueError):
        DetectionFile(expressions=[8])


@st.composite
def multiset(draw):
    n = draw(st.integers(1, 40))
    return draw(st.lists(st.integers(0, 25), min_size=n, max_size=n))


@given(multiset(), st.integers(2, 50), st.lists(st.integers(0, 25), min_size=1, max_size=200))
@settings(max_examples=100)
def test_ratio_is_scale_invariant(labels, k, corpus):
    prior = priors_from_counts([{**{f: np.zeros(s, dtype=int) for f, s in VOCAB_SIZES.items()},
                                 "emotions": np.bincount(corpus + labels, minlength=26)}])["emotions"]
    counts = np.bincount(labels, minlength=26)
    a = ratio_from_counts(counts, prior)
    b = ratio_from_counts(k * counts, prior)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=0)
    assert np.all(a >= 0)


def test_audio_and_climax(tmp_path):
    p = tmp_path / "d.json"
    p.write_text(json.dumps({"objects": [0, 0, 1], "audio": [0.5, -0.5, 1.0], "climaxes": [1.0, 4.5]}))
    det = load_detections(p)
    block = ratio_features(det, compute_priors([det]))
    assert block.audio_loudness == pytest.approx(2 / 3)
    assert block.climax_count == 2
    np.testing.assert_allclose(block.objects_ratio[:2], [1.0, 1.0])
    assert audio_loudness([]) == 0.0
