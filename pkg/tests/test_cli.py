import csv
import json
import subprocess
import sys
from collections import defaultdict
from pathlib import Path

import pytest

from oracles import betti_at
from tokentopo import cli
from tokentopo.ingest import daily_graphs, load_transactions

DATA = Path(cli.__file__).parent / "data"
TX = DATA / "toy_transactions.csv"
PRICES = DATA / "toy_prices.csv"


def run(tmp_path, *extra, name="out"):
    out = tmp_path / name
    code = cli.main(["--transactions", str(TX), "--prices", str(PRICES), "--out", str(out),
                     "--trees", "40", *extra])
    return code, out


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    code, out = run(tmp)
    return code, out


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_fixture_run_outputs(toy_run):
    code, out = toy_run
    assert code == 0
    for name in cli.OUTPUTS + ("manifest.json",):
        assert (out / name).is_file()
    feats = read_csv(out / "features.csv")
    assert list(feats[0]) == ["token", "date", "pn", "ne", "nv", "gc", "rd0", "rd1", "rd2", "label"]
    assert {r["token"] for r in feats} == {"alpha", "beta"}
    preds = read_csv(out / "predictions.csv")
    assert {r["model"] for r in preds} == {"M1", "M2", "M3", "M4"}
    assert all(0 <= float(r["vote_fraction"]) <= 1 for r in preds)
    metrics = json.loads((out / "metrics.json").read_text())
    assert set(metrics["per_token"]) == {"alpha", "beta"}
    assert set(metrics["aggregate"]) == {str(h) for h in range(1, 8)}
    assert metrics["per_token"]["alpha"]["train_rows"] == (2 * metrics["per_token"]["alpha"]["rows"]) // 3
    coint = json.loads((out / "cointegration.json").read_text())
    assert set(coint) == {"price", "rd1", "summary"}
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["trees"] == 40 and manifest["seed"] == 0
    assert set(manifest["outputs"]) == set(cli.OUTPUTS)


def test_betti_curves_csv_matches_oracle(toy_run):
    _, out = toy_run
    curves = defaultdict(list)
    for r in read_csv(out / "betti_curves.csv"):
        curves[(r["token"], r["date"], int(r["dim"]))].append((float(r["breakpoint"]), int(r["value"])))
    graphs = daily_graphs(load_transactions(TX, "alpha"))
    for d in sorted(graphs)[:2]:
        g = graphs[d]
        labels = sorted(g.nodes)
        idx = {a: i for i, a in enumerate(labels)}
        w = {(idx[a], idx[b]): e.weight for (a, b), e in g.edges.items()}
        key = d.isoformat()
        for eps in (0.0, 0.15, 0.5, 1.0):
            want = betti_at(len(labels), w, eps)
            for p in range(3):
                steps = curves[("alpha", key, p)]
                got = [v for b, v in steps if b <= eps][-1]
                assert got == want[p]


def test_deterministic_metrics(tmp_path):
    _, a = run(tmp_path, "--seed", "5", name="a")
    _, b = run(tmp_path, "--seed", "5", "--jobs", "2", name="b")
    for name in cli.OUTPUTS:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_missing_prices_no_outputs(tmp_path):
    out = tmp_path / "o"
    code = cli.main(["--transactions", str(TX), "--prices", str(tmp_path / "nope.csv"), "--out", str(out)])
    assert code == cli.EXIT_INPUT
    assert not out.exists()


def test_malformed_transactions_no_outputs(tmp_path):
    bad = tmp_path / "tx.csv"
    bad.write_text("token,from,to,amount,timestamp\nx,a,b,-1,5\n")
    out = tmp_path / "o"
    assert cli.main(["--transactions", str(bad), "--prices", str(PRICES), "--out", str(out)]) == cli.EXIT_INPUT
    assert not out.exists()


def test_unknown_token(tmp_path, caplog):
    code, out = run(tmp_path, "--token", "unknown")
    assert code == 0
    assert "unknown" in caplog.text
    assert len(read_csv(out / "features.csv")) == 0
    assert json.loads((out / "metrics.json").read_text())["per_token"] == {}


def test_token_filter(tmp_path):
    code, out = run(tmp_path, "--token", "beta", "--max-horizon", "0")
    assert code == 0
    assert {r["token"] for r in read_csv(out / "features.csv")} == {"beta"}
    assert set(json.loads((out / "metrics.json").read_text())["aggregate"]) == {"2"}


def test_token_failure_isolated(tmp_path):
    prices = tmp_path / "p.csv"
    lines = PRICES.read_text().splitlines()
    prices.write_text("\n".join(l for l in lines if not l.startswith("beta")) + "\n")
    out = tmp_path / "o"
    code = cli.main(["--transactions", str(TX), "--prices", str(prices), "--out", str(out), "--trees", "10"])
    assert code == cli.EXIT_TOKEN_FAILURE
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["errors"][0]["token"] == "beta" and metrics["errors"][0]["stage"] == "ingest"
    assert set(metrics["per_token"]) == {"alpha"}
    # alpha's rows are unaffected by beta's failure
    _, ref = run(tmp_path, "--token", "alpha", "--trees", "10", name="ref")
    assert (out / "features.csv").read_bytes() == (ref / "features.csv").read_bytes()


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["--transactions", "x"])
    assert exc.value.code == 2


def test_invalid_parameter(tmp_path):
    code, out = run(tmp_path, "--max-dim", "1", "--coint-channel", "rd2")
    assert code == cli.EXIT_INPUT and not out.exists()


def test_tx_count_column(tmp_path):
    code, out = run(tmp_path, "--tx-count-column", "--max-horizon", "0")
    assert "n_tx" in read_csv(out / "features.csv")[0]


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "tokentopo", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "--coint-channel" in res.stdout
