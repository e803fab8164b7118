"""``figures`` — render figure recipes to image files.

    figures --recipe decay.toml [--recipe overlay.toml ...]

Each recipe is rendered in order; the produced image paths are printed one
per line. Exit codes: 0 success, 2 unusable recipe or data, 3 render
failure. Failures emit a single JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import FigkitError, RecipeError
from .recipes import parse_recipe
from .render import render


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # emit the same JSON error contract
        _fail("UsageError", message)
        raise SystemExit(2)


def _fail(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def main(argv=None) -> int:
    parser = _Parser(prog="figures",
                     description="Render figure recipes to image files.")
    parser.add_argument("--recipe", action="append", required=True,
                        metavar="PATH", help="recipe file (repeatable)")
    args = parser.parse_args(argv)
    try:
        for path in args.recipe:
            result = render(parse_recipe(path))
            print(result.path)
    except RecipeError as exc:
        _fail("RecipeError", str(exc))
        return 2
    except FigkitError as exc:
        _fail(type(exc).__name__, str(exc))
        return 3
    except Exception as exc:  # pragma: no cover - defensive
        _fail(type(exc).__name__, str(exc))
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
