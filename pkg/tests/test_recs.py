import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stereogen.ingest import build_vocabulary, catalog_from_rows, encode_multi_hot
from stereogen.recs import (
    assemble_features,
    build_item_features,
    clamp_rating,
    cross_validate,
    denormalize,
    denormalize_and_clamp,
    error_metrics,
    make_split,
    normalize,
    reports_csv,
    split_kind,
    train_linear,
)
from stereogen.stereotype import generate_stereotypes


def frame(rows):
    return pd.DataFrame(rows, columns=["user_id", "item_id", "rating"])


def test_normalize_examples():
    n = normalize(frame([("u", "a", 1), ("u", "b", 3), ("u", "c", 5), ("v", "a", 4), ("v", "b", 4), ("w", "c", 2)]))
    r = n.records.set_index(["user_id", "item_id"])["r_tilde"]
    assert np.round(r.loc["u"].to_numpy(), 4).tolist() == [-1.2247, 0.0, 1.2247]
    assert r.loc["v"].tolist() == [0.0, 0.0]
    assert r.loc["w"].tolist() == [0.0]


def test_zero_spread_user_denormalizes_to_mean():
    n = normalize(frame([("v", "a", 4), ("v", "b", 4), ("u", "a", 1), ("u", "b", 2)]))
    mu, sigma = n.user_params(["v"])
    assert denormalize_and_clamp(0.0, mu[0], sigma[0]) == 4.0
    assert denormalize_and_clamp(3.0, mu[0], sigma[0]) == 4.0


def test_unknown_user_uses_global_stats():
    n = normalize(frame([("u", "a", 1), ("u", "b", 5), ("v", "a", 3)]))
    mu, sigma = n.user_params(["nobody", "u"])
    assert mu[0] == pytest.approx(3.0)
    assert sigma[0] == pytest.approx(np.std([1, 5, 3]))
    assert (mu[1], sigma[1]) == (3.0, 2.0)


def test_clamp_examples():
    assert clamp_rating(5.7) == 5
    assert clamp_rating(0.2) == 1
    assert clamp_rating(3.4) == 3.4
    assert denormalize_and_clamp(1.35, 3.0, 2.0) == 5.0
    assert denormalize_and_clamp(-1.4, 3.0, 2.0) == 1.0
    assert denormalize_and_clamp(0.2, 3.0, 2.0) == pytest.approx(3.4)


def test_error_metrics_examples():
    assert error_metrics([2, 3, 4], [2, 3, 4]) == (0.0, 0.0)
    assert error_metrics([3, 3], [1, 5]) == (2.0, 2.0)
    with pytest.raises(ValueError):
        error_metrics([], [])


def test_round_trip(mini_ratings):
    n = normalize(mini_ratings)
    mu, sigma = n.user_params(n.records["user_id"].tolist())
    ok = sigma > 0
    back = denormalize(n.records["r_tilde"].to_numpy(), mu, sigma)
    assert np.max(np.abs(back[ok] - n.records["rating"].to_numpy()[ok])) <= 1e-9
    g = n.records.groupby("user_id")["r_tilde"]
    spread = n.user_stats["sigma"] > 0
    assert np.allclose(g.mean()[spread], 0, atol=1e-9)
    assert np.allclose(g.std(ddof=0)[spread], 1, atol=1e-9)


def test_split_kind_aliases():
    assert split_kind("new-user") == "new_user"
    assert split_kind("A") == "new_user"
    assert split_kind("B") == "new_item"
    with pytest.raises(ValueError):
        split_kind("new-genre")


@pytest.mark.parametrize("kind,column", [("new_user", "user_id"), ("new_item", "item_id")])
def test_splits_have_no_leakage_and_disjoint_folds(mini_ratings, kind, column):
    pools = []
    for fold in range(6):
        split = make_split(mini_ratings, kind, 1 / 6, seed=3, fold=fold)
        train_ids = set(split.train[column])
        test_ids = set(split.test[column])
        assert not train_ids & test_ids
        assert test_ids == set(split.held_out)
        assert len(split.train) + len(split.test) == len(mini_ratings.records)
        pools.append(test_ids)
    for i in range(6):
        for j in range(i + 1, 6):
            assert not pools[i] & pools[j]
    assert set().union(*pools) == set(mini_ratings.records[column])


def test_split_is_seeded(mini_ratings):
    a = make_split(mini_ratings, "new_user", seed=1, fold=2)
    b = make_split(mini_ratings, "new_user", seed=1, fold=2)
    c = make_split(mini_ratings, "new_user", seed=2, fold=2)
    assert a.held_out == b.held_out
    assert a.held_out != c.held_out


def test_split_errors():
    one_user = frame([("u", "a", 3), ("u", "b", 4)])
    with pytest.raises(ValueError, match="degenerate"):
        make_split(one_user, "new_user", 0.5, fold=1)
    with pytest.raises(ValueError):
        make_split(one_user, "new_user", 1.0)
    with pytest.raises(ValueError):
        make_split(one_user, "new_item", 0.5, fold=2)


@pytest.fixture(scope="module")
def fixture_features(mini_catalog):
    vocabs = {f: build_vocabulary(mini_catalog, f) for f in ("genre", "keywords")}
    sets = {
        f: generate_stereotypes(encode_multi_hot(mini_catalog, v), f).stereotypes for f, v in vocabs.items()
    }
    base = build_item_features(mini_catalog, "baseline", vocabs)
    stereo = build_item_features(mini_catalog, "stereotype", vocabs, sets)
    return vocabs, sets, base, stereo


def test_feature_widths(fixture_features):
    vocabs, sets, base, stereo = fixture_features
    assert base.complex_width == sum(len(v.labels) for v in vocabs.values())
    assert stereo.complex_width == sum(len(s) for s in sets.values())
    assert stereo.complex_width < base.complex_width
    # simple columns are shared
    assert base.columns[base.complex_width :] == stereo.columns[stereo.complex_width :]
    assert base.dimension - base.complex_width == stereo.dimension - stereo.complex_width


def test_simple_features_encoding(fixture_features):
    _, _, base, _ = fixture_features
    simple = base.matrix[:, base.complex_width :]
    cols = base.columns[base.complex_width :]
    year = simple[:, cols.index("year")]
    assert year.mean() == pytest.approx(0, abs=1e-12)
    assert year.std() == pytest.approx(1)
    lang = [i for i, c in enumerate(cols) if c.startswith("language=")]
    assert lang and np.all(simple[:, lang].sum(axis=1) == 1)


def test_item_without_labels_gets_zero_block():
    rows = [
        {"item_id": "a", "genre": "X|Y"},
        {"item_id": "b", "genre": "Y"},
        {"item_id": "c", "genre": ""},
    ]
    cat = catalog_from_rows(rows, ["genre"])
    vocabs = {"genre": build_vocabulary(cat, "genre")}
    sets = {"genre": generate_stereotypes(encode_multi_hot(cat, vocabs["genre"]), "genre").stereotypes}
    for mode in ("baseline", "stereotype"):
        f = build_item_features(cat, mode, vocabs, sets)
        row = f.matrix[f.row_index()["c"], : f.complex_width]
        assert np.all(row == 0)
    with pytest.raises(ValueError):
        build_item_features(cat, "stereotype", vocabs)
    with pytest.raises(ValueError):
        build_item_features(cat, "hybrid", vocabs)


def test_assemble_skips_unknown_items(fixture_features, caplog):
    _, _, base, _ = fixture_features
    known = base.item_ids[0]
    recs = pd.DataFrame({"user_id": ["u", "u"], "item_id": [known, "ghost"], "r_tilde": [0.5, 1.0]})
    dm = assemble_features(base, recs)
    assert dm.n_skipped == 1
    assert dm.x.shape == (1, base.dimension + 1)
    assert dm.x[0, 0] == 1.0 and dm.y.tolist() == [0.5]
    assert "skipped 1" in caplog.text


def test_train_linear():
    rng = np.random.default_rng(0)
    x = np.hstack([np.ones((50, 1)), rng.normal(size=(50, 3))])
    coef = np.array([0.5, 1.0, -2.0, 0.25])
    model = train_linear(x, x @ coef)
    assert np.allclose(model.coef, coef, atol=1e-6)
    # more columns than rows still solves
    wide = train_linear(rng.normal(size=(3, 6)), np.ones(3))
    assert np.all(np.isfinite(wide.coef))
    assert np.array_equal(train_linear(x, x @ coef).coef, model.coef)
    bad = x.copy()
    bad[0, 1] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        train_linear(bad, np.ones(50))


@pytest.mark.parametrize("kind", ["new_user", "new_item"])
def test_cross_validate_report(mini_ratings, fixture_features, kind):
    _, _, base, stereo = fixture_features
    reports = [cross_validate(mini_ratings, f, kind, folds=6, seed=0) for f in (base, stereo)]
    for r in reports:
        assert len(r.folds) == 6
        assert r.rmse == pytest.approx(np.mean([f.rmse for f in r.folds]))
        assert all(f.rmse >= f.mae for f in r.folds)
        assert r.rmse >= r.mae
        assert 0 < r.rmse < 2
        doc = r.to_dict(timings=False)
        assert "wall_seconds" not in doc and "wall_seconds" not in doc["folds"][0]
    assert len(reports_csv(reports).splitlines()) == 3


def test_clamped_predictions_in_range(mini_ratings, fixture_features):
    _, _, base, _ = fixture_features
    split = make_split(mini_ratings, "new_item", seed=4)
    norm = normalize(split.train)
    model = train_linear(*_xy(assemble_features(base, norm.records)))
    test = assemble_features(base, split.test, target="rating")
    mu, sigma = norm.user_params(split.test["user_id"][test.kept].tolist())
    pred = denormalize_and_clamp(model.predict(test.x) * 10, mu, sigma)
    assert np.all((pred >= 1) & (pred <= 5))


def _xy(dm):
    return dm.x, dm.y


@given(st.lists(st.floats(1, 5), min_size=1, max_size=30), st.integers(0, 1000))
@settings(max_examples=50)
def test_rmse_at_least_mae(actual, seed):
    rng = np.random.default_rng(seed)
    predicted = np.asarray(actual) + rng.normal(size=len(actual))
    rmse, mae = error_metrics(predicted, actual)
    assert rmse >= mae - 1e-12
