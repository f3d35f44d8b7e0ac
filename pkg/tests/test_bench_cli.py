import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from secsparse import bench
from secsparse import knowledge as kn
from secsparse.cli import main
from secsparse.protocols import compute_minmult
from secsparse.runtime import ConfigurationError
from secsparse.sparse import ingest_triplets


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_config_validation():
    with pytest.raises(ConfigurationError):
        bench.ScenarioConfig("x", sparsities=(1.0,))
    with pytest.raises(ConfigurationError):
        bench.ScenarioConfig("x", sizes=(0,))
    with pytest.raises(ConfigurationError):
        bench.ScenarioConfig("x", parties=3, threshold=2)
    with pytest.raises(ConfigurationError):
        bench.ScenarioConfig("x", mode="fast")


def test_matvec_sweep_rows():
    cfg = bench.ScenarioConfig("matvec", sizes=(64, 128), sparsities=(0.999,), cost_only=True, coord_bits=12)
    rows = bench.run_matvec_sweep(cfg)
    sparse = [r for r in rows if r["algo"] == "sparse"]
    dense = [r for r in rows if r["algo"] == "dense"]
    assert len(sparse) == len(dense) == 2
    assert dense[1]["elements_sent"] == 2 * dense[0]["elements_sent"]


def test_matvec_sweep_reproducible():
    cfg = bench.ScenarioConfig("matvec", sizes=(16,), sparsities=(0.9,), seed=5, cost_only=True)
    assert bench.write_csv(bench.run_matvec_sweep(cfg)) == bench.write_csv(bench.run_matvec_sweep(cfg))


def test_matmat_sweep_minmult_column():
    cfg = bench.ScenarioConfig("gram", sizes=(32,), sparsities=(0.95,), rows=20, cost_only=True)
    rows = bench.run_matmat_sweep(cfg)
    assert {r["algo"] for r in rows} == {"dense", "sparse"}
    Xp = bench.random_sparse(cfg.rng(1), (20, 32), bench.nnz_for(0.95, 640))
    # the inner index of X^T X runs over the rows of X
    c = Xp.group_counts(0)
    assert rows[0]["minmult"] == compute_minmult(c, c)


def test_matvec_sparse_bytes_shrink_with_sparsity():
    cfg = bench.ScenarioConfig("matvec", sizes=(256,), sparsities=(0.99, 0.999), cost_only=True)
    rows = {r["sparsity"]: r for r in bench.run_matvec_sweep(cfg) if r["algo"] == "sparse"}
    assert rows[0.999]["bytes_sent"] < rows[0.99]["bytes_sent"] / 5


def test_overhead_compare():
    out = bench.run_overhead_compare({"uniform": [4] * 50}, 20)
    v = {r["technique"]: r["storage_elements"] for r in out}
    assert v["dense"] == 1000
    assert v["max-pad"] == v["template"] == v["raw-sparse"] == v["anonymized"]
    deg = kn.sample_degrees(kn.PowerLawParams(2.5, 500), 2000, np.random.default_rng(0))
    v = {r["technique"]: r["storage_elements"] for r in bench.run_overhead_compare({"pl": deg}, 500)}
    assert v["template"] < v["max-pad"]
    with pytest.raises(ValueError):
        bench.run_overhead_compare({"bad": [30]}, 20)


def test_dp_and_pop_curves():
    rows = bench.run_dp_curves([1, 2, 3, 5, 8] * 20, 10, [1.0], 0.01, [25], noise_scale=0)
    params = kn.DpParams(1.0, 0.01, 4)
    for r in rows:
        assert r["bound"] == pytest.approx(r["ecdf"] + kn.dp_tree_offset(params))
    pop = bench.run_popbound_curves(kn.PowerLawParams(2.0, 5), 100, [0.0, 5.0], sample_size=50)
    zero = [r for r in pop if r["lambda"] == 0.0]
    assert all(r["upper_population"] == pytest.approx(r["tail"]) for r in zero)


def test_cli_generate_round_trip(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["generate", "--gamma", "2.5", "--rows", "40", "--cols", "30", "--seed", "3", "--out", str(out)]) == 0
    X = ingest_triplets(out, shape=(40, 30))
    assert X.nnz >= 40
    first = out.read_text()
    main(["generate", "--gamma", "2.5", "--rows", "40", "--cols", "30", "--seed", "3", "--out", str(out)])
    assert out.read_text() == first


def test_cli_sweeps_and_templates(tmp_path, capsys):
    assert main(["matvec-sweep", "--sizes", "16", "--sparsities", "0.9", "--cost-only"]) == 0
    rows = rows_of(capsys.readouterr().out)
    assert [r["algo"] for r in rows] == ["dense", "sparse"]
    counts = tmp_path / "c.txt"
    counts.write_text("\n".join(str(i) for i in range(1, 21)) + "\n")
    tmpl = tmp_path / "t.json"
    assert main(["quantile-template", str(counts), "--max-degree", "20", "--template-out", str(tmpl)]) == 0
    doc = json.loads(tmpl.read_text())
    assert doc["total_rows"] == 20 and [b[1] for b in doc["blocks"]] == [5, 10, 15, 18, 19, 20]
    out = tmp_path / "o.csv"
    assert main(["overhead", "--counts", str(counts), "--cols", "20", "--out", str(out)]) == 0
    assert len(rows_of(out.read_text())) == 5
    assert main(["dp-curves", "--counts", str(counts), "--max-degree", "20", "--block-rows", "5", "--out", str(out)]) == 0
    assert main(["pop-curves", "--gamma", "2", "--max-degree", "5", "--rows", "10", "--out", str(out)]) == 0


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("1\nx\n")
    assert main(["overhead", "--counts", str(bad), "--cols", "5"]) != 0
    assert "bad.txt:2" in capsys.readouterr().err
    assert main(["overhead", "--counts", str(tmp_path / "missing"), "--cols", "5"]) != 0
    assert main(["matvec-sweep", "--sparsities", "1.5"]) != 0
    assert main(["quantile-template", str(bad), "--max-degree", "3"]) != 0
    with pytest.raises(SystemExit):
        main(["matvec-sweep", "--sizes", "a,b"])


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "secsparse", "pop-curves", "--gamma", "3", "--max-degree", "2", "--rows", "5"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == "lambda,degree,tail,upper_population"
