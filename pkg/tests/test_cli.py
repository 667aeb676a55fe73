import csv
import json
from pathlib import Path

import pytest

from conftest import make_instance, make_service
from dwsc.cli import GENERATION_COLUMNS, IMPROVEMENT_COLUMNS, SUMMARY_COLUMNS, main
from dwsc.ingest import save_bundle

DATA = Path(__file__).parent / "data"
FAST = ["--population-size", "8", "--generations", "3", "--n-l", "4", "--p-local-search", "0.5"]


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    path = tmp_path_factory.mktemp("inst") / "syn40.json"
    assert main(["gen", "--n-services", "40", "--n-concepts", "20", "--layers", "4", "--seed", "5", "--out", str(path)]) == 0
    return path


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_zero_generations(bundle, tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["run", "--instance", str(bundle), "--seed", "7", "--generations", "0", "--out", str(out)]) == 0
    result = json.loads((out / "result.json").read_text())
    assert result["schema"] == "dwsc-result/1"
    assert result["generations"] == 0
    gens = rows(out / "generations.csv")
    assert len(gens) == 1
    assert float(gens[0]["best_f"]) == result["best"]["fitness"]["fitness"]
    assert (out / "best.dot").read_text().startswith("digraph")
    assert "best F" in capsys.readouterr().out


def test_run_is_byte_reproducible(bundle, tmp_path):
    outs = []
    for tag in "ab":
        out = tmp_path / tag
        assert main(["run", "--instance", str(bundle), *FAST, "--no-wallclock", "--out", str(out)]) == 0
        outs.append((out / "generations.csv").read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].decode().splitlines()[0] == ",".join(GENERATION_COLUMNS)


def test_run_without_instance_is_a_usage_error(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path)]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--bogus"])
    assert exc.value.code == 1


def test_bad_config_value_is_a_usage_error(bundle, tmp_path):
    assert main(["run", "--instance", str(bundle), "--n-l", "3", "--out", str(tmp_path)]) == 1


def test_malformed_bundle_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--instance", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["validate", "--instance", str(tmp_path / "missing.json")]) == 2


def test_malformed_xml_exits_2(tmp_path):
    broken = tmp_path / "services.xml"
    broken.write_text("<services><service")
    args = ["--services", str(broken), "--taxonomy", str(DATA / "taxonomy.xml"), "--problem", str(DATA / "problem.xml")]
    assert main(["run", *args, "--out", str(tmp_path / "o")]) == 2


@pytest.fixture
def infeasible(tmp_path):
    inst = make_instance([make_service("S1", ["z"], ["d"], items=())], ["a"], ["d"])
    path = tmp_path / "infeasible.json"
    save_bundle(inst, path)
    return path


def test_infeasible_instance_exits_3(infeasible, tmp_path):
    assert main(["run", "--instance", str(infeasible), "--out", str(tmp_path / "o")]) == 3
    assert main(["validate", "--instance", str(infeasible)]) == 3
    assert main(["bench", "--instance", str(infeasible), "--runs", "1", "--out", str(tmp_path / "b")]) == 3


def test_bench_single_run_statistics(bundle, tmp_path):
    out = tmp_path / "bench"
    assert main(["bench", "--instance", str(bundle), *FAST, "--runs", "1", "--out", str(out)]) == 0
    summary = rows(out / "summary.csv")
    assert list(summary[0]) == SUMMARY_COLUMNS
    assert {r["variant"] for r in summary} == {"full", "no_local_search", "type1_only"}
    for r in summary:
        assert r["runs"] == "1"
        assert float(r["std_f"]) == 0.0 and float(r["std_ms"]) == 0.0
    assert (out / "jobs" / "syn40" / "full" / "seed0" / "generations.csv").exists()


def test_bench_improvement_percentages(bundle, tmp_path):
    out = tmp_path / "bench"
    args = ["bench", "--instance", str(bundle), *FAST, "--runs", "2", "--p-local-search", "1.0", "--out", str(out)]
    assert main(args) == 0
    imp = rows(out / "improvements.csv")
    assert list(imp[0]) == IMPROVEMENT_COLUMNS
    for r in imp:
        total = float(r["pct_type1"]) + float(r["pct_type2"]) + float(r["pct_none"])
        assert total == pytest.approx(100.0, abs=0.02)
        if r["variant"] == "no_local_search":
            assert (float(r["pct_type1"]), float(r["pct_type2"]), float(r["pct_none"])) == (0.0, 0.0, 100.0)
        if r["variant"] == "type1_only":
            assert float(r["pct_type2"]) == 0.0
    runs = rows(out / "runs.csv")
    assert sorted({r["seed"] for r in runs}) == ["0", "1"]


def test_bench_rejects_unknown_variant(bundle, tmp_path):
    assert main(["bench", "--instance", str(bundle), "--variants", "full,best", "--out", str(tmp_path)]) == 1


def test_gen_rejects_impossible_sizes(tmp_path):
    assert main(["gen", "--n-services", "2", "--n-concepts", "10", "--layers", "3", "--out", str(tmp_path / "x.json")]) == 1


def test_augment_and_validate_xml(tmp_path, capsys):
    out = tmp_path / "wsc.json"
    triplet = ["--services", str(DATA / "services_two.xml"), "--taxonomy", str(DATA / "taxonomy.xml"),
               "--problem", str(DATA / "problem.xml")]
    assert main(["augment", *triplet, "--aug-seed", "4", "--items-per-service", "1,2", "--out", str(out)]) == 0
    assert main(["validate", "--instance", str(out)]) == 0
    assert "feasible=True" in capsys.readouterr().out
    assert main(["validate", *triplet, "--coords", str(DATA / "coords.csv")]) == 0


def test_augment_requires_triplet(tmp_path):
    assert main(["augment", "--out", str(tmp_path / "x.json")]) == 1


def test_gen_suite_matches_library(tmp_path):
    from dwsc.ingest import load_bundle, to_bundle
    from dwsc.suite import desk_instance

    out = tmp_path / "syn100.json"
    assert main(["gen", "--suite", "syn100", "--out", str(out)]) == 0
    assert to_bundle(load_bundle(out)) == to_bundle(desk_instance("syn100"))
    assert main(["gen", "--out", str(out)]) == 1
