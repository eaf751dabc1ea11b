"""CSV ingestion, standardization, the inflation schema and result files."""

from __future__ import annotations

import csv
import json
import subprocess
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .datagen import Dataset
from .sampler import PosteriorSummary, compute_rmse


class DataError(ValueError):
    """Malformed or unusable input data."""


INFLATION_PREDICTORS = (
    "GDP", "PCE", "GPI", "RGEGI", "IMGS", "NFP", "M2", "ENERGY", "FOOD", "MATERIALS", "OUTPUT GAP",
    "GS10", "GS5", "GS3", "GS1", "PRIVATE EMPLOYMENT", "PMI MANU", "AHEPNSE", "DJIA", "M1", "ISM SDI",
    "CONSUMER", "UNRATE", "TBILL3", "TBILL SPREAD", "HOUSING STARTS", "INF EXP",
    "LAG1", "LAG2", "LAG3", "LAG4",
)
INFLATION_RESPONSE = "INFLATION"


def _norm(name: str) -> str:
    return " ".join(name.replace("_", " ").split()).upper()


def read_table(path, label_cols=()):
    """Header and numeric body of an RFC-4180 CSV file.

    Columns named in ``label_cols`` may hold text; they are returned in a
    dict of string lists and excluded from the numeric body. Without label
    columns only ``(header, body)`` is returned.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names")
        is_label = [h in label_cols for h in header]
        labels = {h: [] for h, lab in zip(header, is_label) if lab}
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}, line {line}: expected {len(header)} fields, found {len(row)}")
            vals = []
            for name, cell, lab in zip(header, row, is_label):
                cell = cell.strip()
                if cell == "":
                    raise DataError(f"{path}, line {line}: blank value in column '{name}'")
                if lab:
                    labels[name].append(cell)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(f"{path}, line {line}: non-numeric value {cell!r} in column '{name}'") from None
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    body = np.array(rows).reshape(len(rows), -1)
    if not np.all(np.isfinite(body)):
        raise DataError(f"{path}: non-finite values")
    if label_cols:
        return [h for h, lab in zip(header, is_label) if not lab], body, labels
    return header, body


def _column_index(header, name, path):
    lookup = {_norm(h): i for i, h in enumerate(header)}
    try:
        return lookup[_norm(name)]
    except KeyError:
        raise DataError(f"{path}: missing column '{name}'") from None


def load_csv(path, response_col: str, predictor_cols=None) -> Dataset:
    """Dataset from a CSV; predictors default to every non-response column."""
    header, body = read_table(path)
    iy = _column_index(header, response_col, path)
    if predictor_cols is None:
        ix = [i for i in range(len(header)) if i != iy]
    else:
        ix = [_column_index(header, c, path) for c in predictor_cols]
    if not ix:
        raise DataError(f"{path}: no predictor columns")
    return Dataset(y=body[:, iy], X=body[:, ix], names=[header[i] for i in ix],
                   meta={"source": str(path), "response": header[iy]})


def validate_inflation_schema(header) -> None:
    """Check a header against the 31-predictor inflation layout."""
    have = {_norm(h) for h in header}
    missing = [c for c in (INFLATION_RESPONSE,) + INFLATION_PREDICTORS if _norm(c) not in have]
    if missing:
        raise DataError(f"inflation file is missing columns: {', '.join(missing)}")


def fixture_path() -> Path:
    return Path(str(resources.files("dynspike") / "data" / "inflation_fixture.csv"))


def make_inflation_fixture(path, T: int = 20, seed: int = 7) -> None:
    """Synthetic file with the inflation column layout (not real data)."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((T + 4, len(INFLATION_PREDICTORS) - 4))
    y = np.zeros(T + 4)
    for t in range(1, T + 4):
        y[t] = 0.5 * y[t - 1] + 0.4 * X[t, 0] - 0.3 * X[t, 11] + 0.3 * rng.standard_normal()
    lags = np.column_stack([y[4 - k:T + 4 - k] for k in range(1, 5)])
    body = np.column_stack([y[4:], X[4:], lags])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow((INFLATION_RESPONSE,) + INFLATION_PREDICTORS)
        for row in body:
            w.writerow([f"{v:.10g}" for v in row])


# ---------------------------------------------------------------------------
# standardization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Standardization:
    y_loc: float
    y_scale: float
    x_loc: np.ndarray
    x_scale: np.ndarray

    def coefficient_factor(self) -> np.ndarray:
        """Multiplier taking standardized-scale coefficients to the original scale."""
        return self.y_scale / self.x_scale

    def back_transform(self, data: Dataset) -> Dataset:
        return Dataset(y=data.y * self.y_scale + self.y_loc, X=data.X * self.x_scale + self.x_loc,
                       truth=None if data.truth is None else data.truth * self.coefficient_factor(),
                       meta=dict(data.meta), names=list(data.names))


def standardize(data: Dataset) -> tuple[Dataset, Standardization]:
    """Zero mean and unit sample variance for the response and every predictor."""
    y_loc = float(np.mean(data.y))
    y_scale = float(np.std(data.y, ddof=1))
    x_loc = data.X.mean(axis=0)
    x_scale = data.X.std(axis=0, ddof=1)
    if not y_scale > 0:
        raise DataError(f"response '{data.meta.get('response', 'y')}' has zero variance")
    bad = [n for n, s in zip(data.names, x_scale) if not s > 0]
    if bad:
        raise DataError(f"zero-variance predictor column(s): {', '.join(bad)}")
    rec = Standardization(y_loc, y_scale, x_loc, x_scale)
    out = Dataset(y=(data.y - y_loc) / y_scale, X=(data.X - x_loc) / x_scale,
                  truth=None if data.truth is None else data.truth / rec.coefficient_factor(),
                  meta=dict(data.meta), names=list(data.names))
    return out, rec


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------


def version_string() -> str:
    from . import __version__

    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True, text=True,
                             cwd=Path(__file__).parent, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])


def write_dataset(data: Dataset, out_dir, stem: str = "data") -> list[Path]:
    out_dir = Path(out_dir)
    paths = [out_dir / f"{stem}.csv"]
    write_csv(paths[0], ["y"] + list(data.names), np.column_stack([data.y, data.X]).tolist())
    if data.truth is not None:
        paths.append(out_dir / f"{stem}_truth.csv")
        write_csv(paths[1], list(data.names), data.truth.tolist())
    return paths


def _summary_rows(summary: PosteriorSummary, factor=None):
    T, q = summary.beta_mean.shape
    f = np.ones(q) if factor is None else np.asarray(factor)
    rows = []
    for j, name in enumerate(summary.names):
        for t in range(T):
            rows.append([j + 1, name, t + 1, summary.beta_mean[t, j] * f[j], summary.beta_median[t, j] * f[j],
                         summary.beta_q025[t, j] * f[j], summary.beta_q975[t, j] * f[j],
                         summary.inclusion[t, j]])
    return rows


SUMMARY_HEADER = ["j", "predictor", "t", "mean", "median", "q025", "q975", "inclusion"]


def emit_results(summary: PosteriorSummary, out_dir, run_record: dict, truth=None,
                 transform: Standardization | None = None) -> list[Path]:
    """Write summary.csv, scalars.csv, run.json, rmse.csv (with truth) and draws/ (if kept)."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    written = []
    p = out_dir / "summary.csv"
    write_csv(p, SUMMARY_HEADER, _summary_rows(summary))
    written.append(p)
    if transform is not None:
        p = out_dir / "summary_original_scale.csv"
        write_csv(p, SUMMARY_HEADER, _summary_rows(summary, transform.coefficient_factor()))
        written.append(p)

    rows = [list(r) for r in summary.scalar_rows()]
    for block, rates in (("accept_phi", summary.acceptance_phi), ("accept_omega", summary.acceptance_omega)):
        for name, v in zip(summary.names, rates):
            rows.append([f"{block}[{name}]", float(v), float(v), float(v), float(v)])
    p = out_dir / "scalars.csv"
    write_csv(p, ["parameter", "mean", "q025", "median", "q975"], rows)
    written.append(p)

    if truth is not None:
        p = out_dir / "rmse.csv"
        write_csv(p, ["estimator", "rmse"], [["mean", compute_rmse(summary.beta_mean, truth)],
                                             ["median", compute_rmse(summary.beta_median, truth)]])
        written.append(p)

    if summary.draws is not None:
        ddir = out_dir / "draws"
        ddir.mkdir(exist_ok=True)
        for block, arr in summary.draws.items():
            p = ddir / f"{block}.npy"
            np.save(p, arr)
            written.append(p)

    p = out_dir / "run.json"
    with open(p, "w", encoding="utf-8") as fh:
        json.dump(run_record, fh, indent=2, sort_keys=True)
    written.append(p)
    return written
