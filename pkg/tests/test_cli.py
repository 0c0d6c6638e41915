import csv
import json

import pytest

from rff.cli import main
from rff.core import SearchTrace
from rff.game24 import NumberSet, check_expression, load_puzzles
from rff.llm.adapters import LlmGame24Adapter
from rff.llm.client import Cassette, CassetteTransport, ChatClient, LlmConfig
from rff.engines import run_rff_t
from rff.core import EngineConfig
from rff.mathdag import generate_problem, load_problems

from stubs import OracleEndpoint


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_game24(capsys, tmp_path):
    trace_path = tmp_path / "t.jsonl"
    code, out, _ = run(capsys, "solve", "1", "2", "12", "12", "-n", "13", "--trace", str(trace_path))
    assert code == 0
    first = out.splitlines()[0]
    assert first.startswith("rff-t: Solved  ")
    assert check_expression(first.split()[-1], NumberSet.of(1, 2, 12, 12))
    trace = SearchTrace.from_jsonl(trace_path.read_text())
    assert trace.solved and f"visited_states={trace.visited_states}" in out


def test_solve_unsolvable(capsys):
    code, out, _ = run(capsys, "solve", "1", "1", "1", "1")
    assert code == 1
    assert out.startswith("rff-t: Unsolved")


def test_solve_several_methods(capsys, tmp_path):
    code, out, _ = run(capsys, "solve", "4", "6", "1", "1", "--method", "rff-t", "--method", "cot",
                       "--trace", str(tmp_path / "t.jsonl"))
    assert code == 0
    assert {p.name for p in tmp_path.iterdir()} == {"t.rff-t.jsonl", "t.cot.jsonl"}


def test_solve_dag(capsys):
    p = generate_problem(1, 6, 2)
    code, out, _ = run(capsys, "solve", "--dag-seed", "1", "--dag-depth", "6", "--dag-width", "2")
    assert code == 0
    assert out.splitlines()[0] == p.surface_text
    assert out.splitlines()[1] == "rff-g: Solved  1192"


def test_gen_then_solve_from_file(capsys, tmp_path):
    path = tmp_path / "dags.jsonl"
    code, out, _ = run(capsys, "gen", str(path), "--count", "12", "--depth-max", "4", "--width", "2", "--seed", "5")
    assert code == 0 and out.strip() == f"wrote 12 problems to {path}"
    problems = load_problems(path)
    assert [p.depth for p in problems[:5]] == [1, 2, 3, 4, 1]
    code, out, _ = run(capsys, "solve", "--problems", str(path), "--index", "3")
    assert code == 0 and out.splitlines()[1].endswith(str(problems[2].answer))


def test_bench_writes_csv(capsys, tmp_path):
    code, out, _ = run(capsys, "bench", "--range", "901-905", "--method", "rff-t", "--method", "forward-tree",
                       "--beam", "2", "--out", str(tmp_path))
    assert code == 0
    with open(tmp_path / "runs.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 10
    assert [r["puzzle_id"] for r in rows[::2]] == ["901", "902", "903", "904", "905"]
    assert "wrote 10 runs" in out


def test_bench_variant_and_math(capsys, tmp_path):
    code, _, _ = run(capsys, "bench", "--range", "1-3", "--variant", "add-one", "-n", "13", "--out", str(tmp_path / "a"))
    assert code == 0
    with open(tmp_path / "a" / "runs.csv", newline="") as fh:
        assert [r["correct"] for r in csv.DictReader(fh)] == ["1", "1", "1"]
    run(capsys, "gen", str(tmp_path / "d.jsonl"), "--count", "4")
    code, out, _ = run(capsys, "bench", "--dataset", str(tmp_path / "d.jsonl"), "--out", str(tmp_path / "b"))
    assert code == 0 and out.splitlines()[2].split()[:3] == ["rff-g", "4", "1.000"]


def test_bench_empty_dataset(capsys, tmp_path):
    empty = tmp_path / "none.txt"
    empty.write_text("")
    code, out, _ = run(capsys, "bench", "--dataset", str(empty), "--out", str(tmp_path / "o"))
    assert code == 0 and "wrote 0 runs" in out


def test_variants(capsys, tmp_path, caplog):
    src = tmp_path / "in.txt"
    src.write_text("4 6 1 1\n1 1 1 1\n1 2 3 4 5\n")
    out_path = tmp_path / "out.txt"
    code, out, _ = run(capsys, "variants", str(src), str(out_path))
    assert code == 0 and out.strip().endswith("solvability violations: 0")
    assert out_path.read_text() == "1 1 1 4 6\n1 1 1 1 1\n1 1 2 3 4 5\n"
    assert "has 5 numbers" in caplog.text


def test_variants_bundled_set_keeps_solvability(capsys, tmp_path):
    src = tmp_path / "in.txt"
    src.write_text("".join(f"{ns}\n" for _, ns in load_puzzles(None, 1, 200)))
    code, out, _ = run(capsys, "variants", str(src), str(tmp_path / "out.txt"))
    assert code == 0 and "violations: 0" in out


@pytest.mark.parametrize("argv", [["solve"], ["solve", "1", "2", "-L", "0"], ["solve", "1", "2", "--adapter", "llm"],
                                  ["gen", "x.jsonl", "--depth-min", "5", "--depth-max", "2"],
                                  ["solve", "--problems", "missing.jsonl", "--index", "0"]])
def test_config_errors(capsys, argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "missing.jsonl").write_text(json.dumps({"question": "q", "answer": "#### 1"}) + "\n")
    code, _, err = run(capsys, *argv)
    assert code == 2 and err.startswith("error: ")


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["solve", "--method", "tot", "1", "2"])
    assert info.value.code == 2


def test_missing_file_is_io_error(capsys, tmp_path):
    code, _, err = run(capsys, "solve", "--problems", str(tmp_path / "nope.jsonl"))
    assert code == 3 and "nope.jsonl" in err


def test_json_config_defaults(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"width": 1, "max_steps": 2}))
    code, out, _ = run(capsys, "--config", str(cfg), "solve", "1", "1", "1", "3", "13")
    assert code == 1
    code, _, _ = run(capsys, "--config", str(cfg), "solve", "1", "1", "1", "3", "13", "-n", "13", "-L", "20")
    assert code == 0
    cfg.write_text("[1, 2]")
    assert run(capsys, "--config", str(cfg), "solve", "1")[0] == 2


def test_llm_solve_from_cassette(capsys, tmp_path):
    path = tmp_path / "cassette.json"
    rec = Cassette(path, "record")
    client = ChatClient(LlmConfig(), transport=CassetteTransport(rec, OracleEndpoint().transport()))
    expected = run_rff_t(LlmGame24Adapter(client), (4, 6, 1, 1), 24, EngineConfig())
    rec.save()
    code, out, _ = run(capsys, "solve", "4", "6", "1", "1", "--adapter", "llm", "--cassette", str(path))
    assert code == 0
    assert out.splitlines()[0] == f"rff-t: Solved  {expected.outcome.answer}"


def test_llm_cassette_miss_becomes_unsolved(capsys, tmp_path):
    # endpoint failures inside a run end that run as Unsolved rather than aborting
    code, out, _ = run(capsys, "solve", "4", "6", "1", "1", "--adapter", "llm", "--cassette", str(tmp_path / "e.json"))
    assert code == 1
    assert "adapter failure" in out and "no recorded reply" in out
