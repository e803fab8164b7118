import numpy as np
import pytest


def write_csv(path, cols: dict) -> None:
    """Minimal writer for the flat CSV dialect (comma, header, LF)."""
    names = list(cols)
    arrays = [np.asarray(cols[n]).ravel() for n in names]
    lines = [",".join(names)]
    for row in zip(*arrays):
        lines.append(",".join(f"{v:.17g}" for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


@pytest.fixture
def grid_csv(tmp_path):
    """Long-form gridded field: Gaussian blob centered at (0.25, 1.0)."""
    x = np.linspace(0.0, 1.25, 41)
    k = np.linspace(0.0, 2.0, 31)
    X, K = np.meshgrid(x, k, indexing="ij")
    W = np.exp(-80.0 * (X - 0.25) ** 2 - 40.0 * (K - 1.0) ** 2)
    path = tmp_path / "phase.csv"
    write_csv(path, {"x": np.repeat(x, k.size), "k": np.tile(k, x.size),
                     "W": W.ravel()})
    return path, x, k, W


@pytest.fixture
def errors_csv(tmp_path):
    """Error table decaying exactly like eps^2 (and a second column ~eps)."""
    eps = np.array([2.0**-4, 2.0**-5, 2.0**-6, 2.0**-7])
    path = tmp_path / "errors.csv"
    write_csv(path, {"eps": eps, "err_rho": 0.37 * eps**2,
                     "err_J": 1.21 * eps})
    return path
