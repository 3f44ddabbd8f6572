import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stereogen.errors import InputFormatError, NoLabels
from stereogen.ingest import (
    build_vocabulary,
    catalog_from_rows,
    encode_multi_hot,
    load_catalog,
    load_ratings,
    save_ratings,
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_ratings_user_stats(tmp_path):
    path = write(tmp_path, "r.csv", "user_id,item_id,rating\nu1,i1,3\nu1,i2,5\n")
    table = load_ratings(path)
    assert table.user_stats.loc["u1", "mu"] == 4.0
    assert table.user_stats.loc["u1", "sigma"] == 1.0


def test_single_rating_has_zero_sigma(tmp_path):
    table = load_ratings(write(tmp_path, "r.csv", "user_id,item_id,rating\nu1,i1,4\n"))
    assert table.user_stats.loc["u1"].tolist() == [4.0, 0.0]


def test_out_of_range_rating_rejected(tmp_path):
    path = write(tmp_path, "r.csv", "user_id,item_id,rating\nu1,i1,3\nu1,i1,7\n")
    with pytest.raises(InputFormatError, match="line 3"):
        load_ratings(path)


@pytest.mark.parametrize("row", ["u1,i1", "u1,i1,abc", "u1,i1,3.5", ",i1,3"])
def test_malformed_row_names_line(tmp_path, row):
    path = write(tmp_path, "r.csv", f"user_id,item_id,rating\nu1,i0,2\n{row}\n")
    with pytest.raises(InputFormatError, match="line 3"):
        load_ratings(path)


def test_bad_header(tmp_path):
    with pytest.raises(InputFormatError, match="line 1"):
        load_ratings(write(tmp_path, "r.csv", "user,item,rating\nu1,i1,3\n"))


def test_ratings_roundtrip_is_byte_identical(tmp_path, mini_ratings):
    from stereogen.config import bundled

    out = tmp_path / "copy.csv"
    save_ratings(mini_ratings, out)
    assert out.read_bytes() == bundled("mini_ratings.csv").read_bytes()
    assert mini_ratings.records["user_id"].iloc[0] == "u00000"


def test_catalog_dedup_and_empty(tmp_path):
    path = write(
        tmp_path,
        "c.csv",
        "item_id,genre,year\nm1,Drama|Romance|Drama,1990\nm2,,2001\nm3,drama|Romance|historic,\n",
    )
    cat = load_catalog(path, ["genre"])
    assert cat.labels("m1", "genre") == ["Drama", "Romance"]
    assert cat.labels("m2", "genre") == []
    # case-insensitive match, stored in first-seen casing
    assert cat.labels("m3", "genre") == ["Drama", "Romance", "historic"]
    assert cat.items["m1"]["year"] == 1990
    assert cat.items["m3"]["year"] is None
    assert cat.simple_features == ("year",)


def test_catalog_json_and_custom_delimiter(tmp_path):
    doc = [{"item_id": "a", "genre": ["X", "Y"]}, {"item_id": "b", "genre": "X;Z"}]
    path = write(tmp_path, "c.json", json.dumps(doc))
    cat = load_catalog(path, ["genre"], delimiter=";")
    assert cat.labels("a", "genre") == ["X", "Y"]
    assert cat.labels("b", "genre") == ["X", "Z"]


def test_catalog_errors(tmp_path):
    with pytest.raises(InputFormatError, match="item_id"):
        load_catalog(write(tmp_path, "c.csv", "id,genre\n1,A\n"), ["genre"])
    with pytest.raises(InputFormatError, match="unknown feature"):
        load_catalog(write(tmp_path, "d.csv", "item_id,genre\n1,A\n"), ["keywords"])
    with pytest.raises(InputFormatError, match="missing item_id"):
        load_catalog(write(tmp_path, "e.csv", "item_id,genre\n,A\n"), ["genre"])


def test_vocabulary_filter_and_order():
    rows = [
        {"item_id": "1", "g": "B|A"},
        {"item_id": "2", "g": "A|C"},
        {"item_id": "3", "g": "C|B"},
        {"item_id": "4", "g": "A|D"},
    ]
    cat = catalog_from_rows(rows, ["g"])
    vocab = build_vocabulary(cat, "g", 2)
    assert vocab.labels == ("A", "B", "C")
    assert vocab.counts == (3, 2, 2)


def test_vocabulary_nothing_survives():
    cat = catalog_from_rows([{"item_id": str(i), "g": "A"} for i in range(3)], ["g"])
    with pytest.raises(NoLabels):
        build_vocabulary(cat, "g", 4)


def test_encode_multi_hot_examples():
    cat = catalog_from_rows(
        [
            {"item_id": "1", "g": "Drama|Romance"},
            {"item_id": "2", "g": "Historic"},
            {"item_id": "3", "g": "War|Drama|Romance"},
        ],
        ["g"],
    )
    vocab = build_vocabulary(cat, "g")
    assert vocab.labels == ("Drama", "Romance", "Historic", "War")
    m = encode_multi_hot(cat, build_vocabulary(cat.subset(["1", "3"]), "g"))
    assert m.labels == ("Drama", "Romance", "War")
    assert m.values.tolist() == [[1, 1, 0], [0, 0, 0], [1, 1, 1]]


def test_encode_two_items():
    cat = catalog_from_rows([{"item_id": "1", "g": "A"}, {"item_id": "2", "g": "A|B"}], ["g"])
    m = encode_multi_hot(cat, build_vocabulary(cat, "g"))
    assert m.values.tolist() == [[1, 0], [1, 1]]


def test_fixture_vocabulary(mini_catalog):
    genre = build_vocabulary(mini_catalog, "genre")
    assert len(genre) == 24
    assert "Sci-Fi" in genre.labels and "Science Fiction" in genre.labels


label_sets = st.lists(
    st.lists(st.sampled_from(list("ABCDEFG")), max_size=5), min_size=1, max_size=30
)


@given(label_sets, st.integers(1, 4))
@settings(max_examples=60, deadline=None)
def test_column_sums_equal_counts(lists, min_count):
    cat = catalog_from_rows(
        [{"item_id": str(i), "g": "|".join(ls)} for i, ls in enumerate(lists)], ["g"]
    )
    try:
        vocab = build_vocabulary(cat, "g", min_count)
    except NoLabels:
        return
    m = encode_multi_hot(cat, vocab)
    assert m.values.sum(axis=0).tolist() == list(vocab.counts)
    assert all(c >= min_count for c in vocab.counts)
    # ordering is a pure function of (count, label)
    again = build_vocabulary(cat.subset(reversed(cat.item_ids)), "g", min_count)
    assert again.labels == vocab.labels
    assert list(vocab.labels) == sorted(vocab.labels, key=lambda l: (-vocab.counts[vocab.labels.index(l)], l))
    assert np.isin(m.values, [0, 1]).all()
