import numpy as np
import pytest


def month_labels(n, start="1990-01"):
    first = np.datetime64(start, "M")
    return [str(first + i) for i in range(n)]


def write_panel(path, columns, values, dates=None, date_header="date"):
    """Write a small CSV panel; ``values`` is (T, k) and may hold strings."""
    values = np.asarray(values, dtype=object)
    if dates is None:
        dates = month_labels(values.shape[0])
    lines = [",".join([date_header, *columns])]
    for d, row in zip(dates, values):
        lines.append(",".join([d, *(str(v) for v in row)]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def csv_writer(tmp_path):
    def _write(columns, values, dates=None, name="panel.csv", **kw):
        return write_panel(tmp_path / name, columns, values, dates, **kw)

    return _write
