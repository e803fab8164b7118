import numpy as np
import pytest

from conftest import write_csv
from figkit import RecipeError
from figkit.csvdata import pivot_grid, read_columns, select_rows


def test_read_columns_roundtrip(tmp_path):
    p = tmp_path / "d.csv"
    vals = {"a": [1.0, 2.5e-17, 3.0], "b": [-1.0, 0.125, 9.0]}
    write_csv(p, vals)
    cols = read_columns(p)
    assert list(cols) == ["a", "b"]
    assert np.array_equal(cols["a"], vals["a"])
    assert np.array_equal(cols["b"], vals["b"])


def test_read_errors(tmp_path):
    with pytest.raises(RecipeError, match="not found"):
        read_columns(tmp_path / "missing.csv")
    p = tmp_path / "empty.csv"
    p.write_text("", encoding="utf-8")
    with pytest.raises(RecipeError, match="is empty"):
        read_columns(p)
    p.write_text("a,b\n", encoding="utf-8")
    with pytest.raises(RecipeError, match="no data rows"):
        read_columns(p)
    p.write_text("a,b\n1.0\n", encoding="utf-8")
    with pytest.raises(RecipeError, match="row 2"):
        read_columns(p)
    p.write_text("a,b\n1.0,zebra\n", encoding="utf-8")
    with pytest.raises(RecipeError, match="row 2"):
        read_columns(p)


def test_pivot_both_orientations(grid_csv, tmp_path):
    path, x, k, W = grid_csv
    cols = read_columns(path)
    ux, uy, V = pivot_grid(cols, "x", "k", "W", path)
    assert np.array_equal(ux, x) and np.array_equal(uy, k)
    assert np.allclose(V, W, rtol=1e-15)
    i, j = np.unravel_index(np.argmax(V), V.shape)
    assert abs(ux[i] - 0.25) < 0.02 and abs(uy[j] - 1.0) < 0.04
    # transposed row order (k block-repeated) pivots to the same matrix
    p2 = tmp_path / "t.csv"
    write_csv(p2, {"x": np.tile(x, k.size), "k": np.repeat(k, x.size),
                   "W": W.T.ravel()})
    ux2, uy2, V2 = pivot_grid(read_columns(p2), "x", "k", "W", p2)
    assert np.array_equal(V2, V)


def test_pivot_rejects_ragged_and_shuffled(tmp_path):
    p = tmp_path / "bad.csv"
    write_csv(p, {"x": [0, 0, 1], "k": [0, 1, 0], "W": [1, 2, 3]})
    with pytest.raises(RecipeError, match="do not form a grid"):
        pivot_grid(read_columns(p), "x", "k", "W", p)
    write_csv(p, {"x": [0, 1, 1, 0], "k": [0, 1, 0, 1], "W": [1, 2, 3, 4]})
    with pytest.raises(RecipeError, match="grid order"):
        pivot_grid(read_columns(p), "x", "k", "W", p)


def test_pivot_names_missing_column(grid_csv):
    path, *_ = grid_csv
    cols = read_columns(path)
    with pytest.raises(RecipeError, match="'p'.*available: x, k, W"):
        pivot_grid(cols, "x", "p", "W", path)


def test_select_nearest_first_last(tmp_path):
    p = tmp_path / "s.csv"
    t = np.repeat([0.0, 0.2, 0.4], 3)
    x = np.tile([0.0, 0.5, 1.0], 3)
    write_csv(p, {"t": t, "x": x, "rho": np.arange(9.0)})
    cols = read_columns(p)
    sel = select_rows(cols, {"t": 0.19}, p)  # nearest level is 0.2
    assert np.array_equal(sel["rho"], [3.0, 4.0, 5.0])
    assert np.array_equal(select_rows(cols, {"t": "first"}, p)["rho"],
                          [0.0, 1.0, 2.0])
    assert np.array_equal(select_rows(cols, {"t": "last"}, p)["rho"],
                          [6.0, 7.0, 8.0])
    with pytest.raises(RecipeError, match="'first', or 'last'"):
        select_rows(cols, {"t": "final"}, p)
    with pytest.raises(RecipeError, match="no column 'tau'"):
        select_rows(cols, {"tau": 0.0}, p)
