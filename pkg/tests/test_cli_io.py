import csv
import json

import numpy as np
import pytest

from dynspike.cli import main
from dynspike.datagen import Dataset, generate_example1
from dynspike.dataio import (
    INFLATION_PREDICTORS,
    INFLATION_RESPONSE,
    SUMMARY_HEADER,
    DataError,
    emit_results,
    fixture_path,
    load_csv,
    make_inflation_fixture,
    read_table,
    standardize,
    validate_inflation_schema,
)
from dynspike.sampler import McmcConfig, run_chain


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


# --- ingestion ----------------------------------------------------------------------------------


def test_load_csv_selects_columns(tmp_path):
    p = write(tmp_path / "d.csv", "y,a,b,c\n1,2,3,4\n5,6,7,8\n9,10,11,12\n")
    d = load_csv(p, "y", ["c", "a"])
    assert d.T == 3 and d.q == 2 and d.names == ["c", "a"]
    assert np.array_equal(d.X[:, 0], [4, 8, 12]) and np.array_equal(d.y, [1, 5, 9])
    assert load_csv(p, "y").q == 3


def test_load_csv_single_predictor(tmp_path):
    p = write(tmp_path / "d.csv", "y,x\n1,2\n3,4\n")
    assert load_csv(p, "y").X.shape == (2, 1)


@pytest.mark.parametrize("text,needle", [
    ("y,x\n1,2\n3\n", "line 3"),
    ("y,x\n1,2\n3,\n", "blank value"),
    ("y,x\n1,abc\n", "non-numeric"),
    ("y,x\n", "no data rows"),
    ("", "empty file"),
    ("y,y\n1,2\n", "duplicate"),
])
def test_load_csv_rejects_malformed(tmp_path, text, needle):
    p = write(tmp_path / "bad.csv", text)
    with pytest.raises(DataError, match=needle):
        load_csv(p, "y")


def test_load_csv_missing_column(tmp_path):
    p = write(tmp_path / "d.csv", "y,x\n1,2\n")
    with pytest.raises(DataError, match="missing column 'z'"):
        load_csv(p, "y", ["z"])
    with pytest.raises(DataError):
        load_csv(tmp_path / "nope.csv", "y")


def test_label_columns(tmp_path):
    p = write(tmp_path / "d.csv", "date,y,x\n2001Q1,1,2\n2001Q2,3,4\n")
    header, body, labels = read_table(p, label_cols=("date",))
    assert header == ["y", "x"] and body.shape == (2, 2) and labels["date"] == ["2001Q1", "2001Q2"]


def test_inflation_schema():
    header, body = read_table(fixture_path())
    assert body.shape == (20, 32)
    validate_inflation_schema(header)
    validate_inflation_schema([h.lower().replace(" ", "_") for h in header])
    with pytest.raises(DataError, match="UNRATE"):
        validate_inflation_schema([h for h in header if h != "UNRATE"])


def test_fixture_is_regenerable(tmp_path):
    p = tmp_path / "fx.csv"
    make_inflation_fixture(p)
    assert p.read_text() == fixture_path().read_text()
    d = load_csv(p, INFLATION_RESPONSE, list(INFLATION_PREDICTORS))
    assert d.q == 31


# --- standardization ----------------------------------------------------------------------------


def test_standardize_round_trip():
    d = generate_example1(0)
    z, rec = standardize(d)
    assert np.allclose(z.y.mean(), 0, atol=1e-12) and np.isclose(z.y.std(ddof=1), 1)
    assert np.allclose(z.X.mean(0), 0, atol=1e-12) and np.allclose(z.X.std(0, ddof=1), 1)
    back = rec.back_transform(z)
    assert np.allclose(back.y, d.y, atol=1e-12) and np.allclose(back.X, d.X, atol=1e-12)
    assert np.allclose(back.truth, d.truth, atol=1e-12)


def test_standardized_coefficients_reproduce_fit():
    d = generate_example1(1)
    z, rec = standardize(d)
    # fitted values on the standardized scale map back to the original response
    fit_z = np.sum(z.X * z.truth, axis=1)
    fit = np.sum((d.X - rec.x_loc) * d.truth, axis=1)
    assert np.allclose(fit_z * rec.y_scale, fit)


def test_standardize_rejects_constant_column():
    d = Dataset(y=np.arange(4.0), X=np.column_stack([np.ones(4), np.arange(4.0)]), names=["c", "x"])
    with pytest.raises(DataError, match="'?c'?"):
        standardize(d)


# --- outputs ------------------------------------------------------------------------------------


def test_emit_results_layout(tmp_path):
    d = generate_example1(2)
    s = run_chain(d, McmcConfig(n_iter=12, n_burn=6, seed=1, save_paths=True))
    written = emit_results(s, tmp_path, {"config": {"seed": 1}}, truth=d.truth)
    names = {p.name for p in written}
    assert {"summary.csv", "scalars.csv", "rmse.csv", "run.json", "beta.npy", "K.npy"} <= names
    rows = read_rows(tmp_path / "summary.csv")
    assert rows[0] == SUMMARY_HEADER and len(rows) == 1 + 200 * 5
    body = np.array([[float(v) for v in r[3:]] for r in rows[1:]])
    assert np.all(body[:, 1] >= body[:, 2]) and np.all(body[:, 1] <= body[:, 3])
    assert np.allclose(body[:200, 0], s.beta_mean[:, 0], rtol=1e-10)
    assert np.all((body[:, 4] >= 0) & (body[:, 4] <= 1))
    scal = read_rows(tmp_path / "scalars.csv")
    assert any(r[0] == "accept_phi[x1]" for r in scal) and any(r[0] == "sigma2" for r in scal)
    assert np.load(tmp_path / "draws" / "beta.npy").shape == (6, 200, 5)


def test_emit_results_unwritable(tmp_path):
    blocker = write(tmp_path / "file", "x")
    s = run_chain(generate_example1(0), McmcConfig(n_iter=3, n_burn=1))
    with pytest.raises(OSError):
        emit_results(s, blocker / "sub", {})


# --- command line -------------------------------------------------------------------------------


def test_simulate_then_fit_with_truth(tmp_path):
    assert main(["simulate", "--seed", "3", "--out", str(tmp_path / "sim")]) == 0
    data, truth = tmp_path / "sim" / "data.csv", tmp_path / "sim" / "data_truth.csv"
    assert data.exists() and truth.exists()
    rc = main(["fit", "--data", str(data), "--truth", str(truth), "--iters", "20", "--burn", "10",
               "--out", str(tmp_path / "fit"), "--prior", "laplace"])
    assert rc == 0
    rmse = read_rows(tmp_path / "fit" / "rmse.csv")
    assert rmse[0] == ["estimator", "rmse"] and float(rmse[1][1]) > 0


def test_run_json_round_trip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["fit", "--iters", "15", "--burn", "5", "--seed", "4", "--set", "alpha=500", "--out", str(a)]) == 0
    rec = json.loads((a / "run.json").read_text())
    assert rec["config"]["hyper"] == {"alpha": 500.0} and rec["version"]
    assert main(["fit", "--config", str(a / "run.json"), "--out", str(b)]) == 0
    for name in ("summary.csv", "scalars.csv", "rmse.csv"):
        assert (a / name).read_text() == (b / name).read_text()


def test_ini_config(tmp_path):
    cfg = write(tmp_path / "run.ini", "iters = 12\nburn = 4\nprior = ng\nnu = 7\n")
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rec = json.loads((tmp_path / "o" / "run.json").read_text())
    assert rec["config"]["prior"] == "ng" and rec["config"]["hyper"]["nu"] == 7.0


def test_fit_inflation_fixture(tmp_path):
    out = tmp_path / "infl"
    assert main(["fit-inflation", "--iters", "30", "--burn", "10", "--out", str(out), "--original-scale"]) == 0
    assert len(read_rows(out / "summary.csv")) == 1 + 31 * 20
    assert (out / "summary_original_scale.csv").exists()


def test_tables_small(tmp_path):
    assert main(["reproduce-table2", "--reps", "1", "--iters", "6", "--burn", "3", "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "table2.csv")
    assert [r[0] for r in rows[1:]] == ["NMIG", "NG", "Laplace"]
    assert main(["reproduce-table3", "--q", "3", "--prior", "ng", "--iters", "6", "--burn", "3",
                 "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "table3.csv")
    assert len(rows) == 2 and rows[1][0] == "NG"
    assert len(read_rows(tmp_path / "table3_detail.csv")) == 1 + 2


@pytest.mark.parametrize("argv,code", [
    (["fit", "--data", "/nonexistent.csv"], 2),
    (["fit", "--iters", "10", "--burn", "10"], 2),
    (["fit", "--set", "nu=abc"], 2),
    (["fit", "--set", "bogus=1"], 2),
    (["fit", "--set", "r=0.9"], 2),
    (["reproduce-table3", "--q", "1"], 2),
    (["no-such-command"], 2),
])
def test_exit_codes_config(argv, code, tmp_path):
    assert main(argv + ["--out", str(tmp_path)] if argv[0] in ("fit", "reproduce-table3") else argv) == code


def test_exit_code_data(tmp_path):
    p = write(tmp_path / "bad.csv", "y,x\n1,2\n3,oops\n")
    assert main(["fit", "--data", str(p), "--out", str(tmp_path / "o")]) == 3
    p = write(tmp_path / "schema.csv", "INFLATION,GDP\n1,2\n")
    assert main(["fit-inflation", "--data", str(p), "--out", str(tmp_path / "o")]) == 3


def test_exit_code_numeric(tmp_path, monkeypatch):
    from dynspike import cli
    from dynspike.sampler import SamplerError

    def boom(*a, **k):
        raise SamplerError("phi", "forced")

    monkeypatch.setattr(cli, "run_chain", boom)
    assert main(["fit", "--iters", "4", "--burn", "2", "--out", str(tmp_path)]) == 4
