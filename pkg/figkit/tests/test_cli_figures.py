import json

import pytest

from figkit.cli import main

RECIPE = """
kind = "ErrorDecay"
output = "decay.png"
[style]
reference_slope = 2
[[series]]
path = "errors.csv"
y = "err_rho"
label = "density"
"""


def test_cli_success_prints_output_path(tmp_path, errors_csv, capsys):
    rec = tmp_path / "fig.toml"
    rec.write_text(RECIPE, encoding="utf-8")
    assert main(["--recipe", str(rec)]) == 0
    out = capsys.readouterr().out.strip()
    assert out == str(tmp_path / "decay.png")
    assert (tmp_path / "decay.png").is_file()


def test_cli_renders_multiple_recipes(tmp_path, errors_csv, capsys):
    r1 = tmp_path / "a.toml"
    r1.write_text(RECIPE, encoding="utf-8")
    r2 = tmp_path / "b.toml"
    r2.write_text(RECIPE.replace("decay.png", "decay2.png"),
                  encoding="utf-8")
    assert main(["--recipe", str(r1), "--recipe", str(r2)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2 and lines[0] != lines[1]


def test_cli_recipe_error_exits_2_with_json(tmp_path, capsys):
    rec = tmp_path / "fig.toml"
    rec.write_text(RECIPE.replace('kind = "ErrorDecay"',
                                  'kind = "Sparkline"'), encoding="utf-8")
    assert main(["--recipe", str(rec)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "RecipeError"
    assert "Sparkline" in err["message"]


def test_cli_missing_input_file_exits_2(tmp_path, capsys):
    rec = tmp_path / "fig.toml"
    rec.write_text(RECIPE, encoding="utf-8")  # errors.csv not created
    assert main(["--recipe", str(rec)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert "errors.csv" in err["message"]


def test_cli_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "UsageError"
