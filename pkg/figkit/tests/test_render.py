import numpy as np
import pytest

from conftest import write_csv
from figkit import RecipeError, fit_slope, render
from figkit.recipes import recipe_from_dict


def _recipe(tmp_path, raw):
    return recipe_from_dict(raw, tmp_path)


def _decay_recipe(tmp_path, errors_csv, out="decay.png", slope=2):
    return _recipe(tmp_path, {
        "kind": "ErrorDecay", "output": out,
        "style": {"reference_slope": slope, "title": "decay"},
        "series": [
            {"path": errors_csv.name, "y": "err_rho", "label": "density"},
            {"path": errors_csv.name, "y": "err_J", "label": "current"},
        ],
    })


def test_error_decay_annotates_exact_slopes(tmp_path, errors_csv):
    """Synthetic data decaying exactly like eps^2 (and eps^1) must be
    annotated 2.00 (and 1.00) to +-0.01."""
    res = render(_decay_recipe(tmp_path, errors_csv))
    assert res.path.is_file() and res.path.stat().st_size > 0
    assert abs(res.slopes["density"] - 2.00) <= 0.01
    assert abs(res.slopes["current"] - 1.00) <= 0.01
    # the fit is exact up to rounding on exact power-law data
    assert abs(res.slopes["density"] - 2.00) < 1e-12


def test_fit_slope_validation():
    with pytest.raises(RecipeError, match="at least two"):
        fit_slope(np.array([1.0]), np.array([1.0]))
    with pytest.raises(RecipeError, match="positive"):
        fit_slope(np.array([1.0, 2.0]), np.array([1.0, -2.0]))


def test_render_is_deterministic_and_never_mutates(tmp_path, errors_csv,
                                                   grid_csv):
    before = errors_csv.read_bytes()
    a = render(_decay_recipe(tmp_path, errors_csv, out="a.png")).path
    b = render(_decay_recipe(tmp_path, errors_csv, out="b.png")).path
    assert a.read_bytes() == b.read_bytes()
    assert errors_csv.read_bytes() == before
    phase, *_ = grid_csv
    raw = {"kind": "Contour", "output": "w.png",
           "input": {"path": phase.name, "x": "x", "y": "k", "value": "W"}}
    one = render(_recipe(tmp_path, raw)).path.read_bytes()
    two = render(_recipe(tmp_path, raw)).path.read_bytes()
    assert one == two


def test_contour_and_heatmap_render(tmp_path, grid_csv):
    phase, *_ = grid_csv
    for kind, out in (("Contour", "c.png"), ("Heatmap", "h.png")):
        res = render(_recipe(tmp_path, {
            "kind": kind, "output": out,
            "input": {"path": phase.name, "x": "x", "y": "k", "value": "W"},
            "style": {"title": kind, "xlabel": "x", "ylabel": "k"},
        }))
        assert res.path.is_file() and res.path.stat().st_size > 0
        assert res.slopes == {}


def test_svg_output_is_deterministic(tmp_path, grid_csv):
    phase, *_ = grid_csv
    raw = {"kind": "Heatmap", "output": "h.svg",
           "input": {"path": phase.name, "x": "x", "y": "k", "value": "W"}}
    one = render(_recipe(tmp_path, raw)).path.read_bytes()
    (tmp_path / "h.svg").unlink()
    two = render(_recipe(tmp_path, raw)).path.read_bytes()
    assert one == two and b"<svg" in one


def test_overlay_with_select(tmp_path):
    t = np.repeat([0.0, 0.4], 5)
    x = np.tile(np.linspace(0, 1, 5), 2)
    rho = np.concatenate([np.ones(5), 2 * np.ones(5)])
    write_csv(tmp_path / "stats.csv",
              {"t": t, "x": x, "mean_rho": rho})
    write_csv(tmp_path / "ref.csv",
              {"x": np.linspace(0, 1, 5), "rho0": 1.5 * np.ones(5)})
    res = render(_recipe(tmp_path, {
        "kind": "ProfileOverlay", "output": "o.png",
        "series": [
            {"path": "stats.csv", "x": "x", "y": "mean_rho",
             "label": "mean", "select": {"t": "last"}},
            {"path": "ref.csv", "x": "x", "y": "rho0",
             "label": "limit", "linestyle": "dashed"},
        ],
    }))
    assert res.path.is_file()


def test_render_surfaces_missing_column(tmp_path, errors_csv):
    rec = _recipe(tmp_path, {
        "kind": "ErrorDecay", "output": "d.png",
        "style": {"reference_slope": 2},
        "series": [{"path": errors_csv.name, "y": "err_mass",
                    "label": "mass"}],
    })
    with pytest.raises(RecipeError, match="err_mass"):
        render(rec)


def test_render_surfaces_empty_data(tmp_path):
    (tmp_path / "none.csv").write_text("eps,err_rho\n", encoding="utf-8")
    rec = _recipe(tmp_path, {
        "kind": "ErrorDecay", "output": "d.png",
        "style": {"reference_slope": 2},
        "series": [{"path": "none.csv", "y": "err_rho", "label": "r"}],
    })
    with pytest.raises(RecipeError, match="no data rows"):
        render(rec)
