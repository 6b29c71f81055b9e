import numpy as np
import pandas as pd
import pytest
from sklearn.metrics import adjusted_rand_score

from hashtag_lifecycle.synth import gen_trajectory_features
from hashtag_lifecycle.taxonomy import ALSO_RAN, WINNER, TrajectoryClusterer, assignment_frame, label_classes


def test_separated_blobs_recovered():
    df, labels = gen_trajectory_features(n_winners=40, n_also=120, separation=8.0, seed=1)
    assignments, model = label_classes(df)
    pred = np.array([a.cls for a in assignments])
    assert adjusted_rand_score(labels, pred) == 1.0
    assert model.centers_.shape == (2, 3)


def test_winner_is_larger_final_size():
    X = np.array([[10, 1, 5], [12, 1, 6], [11, 2, 5], [1000, 20, 90], [1100, 22, 95]], dtype=float)
    m = TrajectoryClusterer(n_init=5).fit(X)
    assert list(m.labels_) == [ALSO_RAN] * 3 + [WINNER] * 2
    assert list(m.predict([[1050, 21, 92], [9, 1, 5]])) == [WINNER, ALSO_RAN]


def test_growth_breaks_final_size_tie():
    X = np.array([[5, 1, 1], [5, 1, 2], [5, 9, 1], [5, 9, 2]], dtype=float)
    m = TrajectoryClusterer(n_init=5).fit(X)
    assert list(m.labels_) == [ALSO_RAN, ALSO_RAN, WINNER, WINNER]


def test_deterministic_for_fixed_seed():
    df, _ = gen_trajectory_features(seed=4)
    a1, _ = label_classes(df, random_state=3)
    a2, _ = label_classes(df.sample(frac=1.0, random_state=0), random_state=3)
    assert [(a.tag, a.cls) for a in a1] == [(a.tag, a.cls) for a in a2]


def test_degenerate_and_too_small():
    with pytest.warns(UserWarning):
        m = TrajectoryClusterer().fit(np.ones((4, 3)))
    assert m.degenerate_ and set(m.labels_) == {ALSO_RAN}
    with pytest.raises(ValueError):
        TrajectoryClusterer().fit(np.ones((1, 3)))
    with pytest.raises(ValueError):
        TrajectoryClusterer().fit(np.ones((4, 2)))


def test_distances_pick_own_centroid():
    df, _ = gen_trajectory_features(seed=2)
    assignments, _ = label_classes(df)
    frame = assignment_frame(assignments)
    own = np.where(frame["class"] == WINNER, frame["dist_winner"], frame["dist_also_ran"])
    other = np.where(frame["class"] == WINNER, frame["dist_also_ran"], frame["dist_winner"])
    assert np.all(own <= other)
    assert list(frame.columns) == ["tag", "class", "dist_winner", "dist_also_ran"]
