import subprocess
import sys

import pytest

from condgw.cli import main
from condgw.core import height, parse_tree, generation_sizes
from condgw.probs import mutant_curves

MUTANT = """theta: 2
k: {k}
seed: 7
root_type: 2
offspring:
  default: {{kind: poisson_thinning, mu: [1.0, 1.5], p: [1.0, 1.0e-9]}}
event:
  builtin: mutant_at_generation_k
"""

SINGLE = """theta: 1
k: {k}
seed: 3
offspring:
  default: {{kind: explicit, laws: {{1: {{"0": 1/4, "1": 1/4, "2": 1/2}}}}}}
event: {event}
"""


def write(tmp_path, text, name="model.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_probs_reproduces_mutant_curve(tmp_path, capsys):
    cfg = write(tmp_path, MUTANT.format(k=20))
    code, out, _ = run(["probs", "--config", cfg], capsys)
    assert code == 0
    rows = [line.split(",") for line in out.splitlines()[1:]]
    top = {(int(t), int(i)): float(p) for t, l, i, p in rows if l == "0"}
    curve = mutant_curves(20, (1.0, 1.5), (1.0, 1e-9))[-1]
    assert top[(1, 1)] == pytest.approx(curve[0], rel=1e-10)
    assert top[(2, 1)] == pytest.approx(curve[1], rel=1e-10)


def test_probs_trivial_event(tmp_path, capsys):
    cfg = write(tmp_path, SINGLE.format(k=3, event="{builtin: trivial}"))
    code, out, _ = run(["probs", "--config", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == 0 and out == ""
    lines = (tmp_path / "o" / "probs.csv").read_text().splitlines()
    assert lines[0] == "t,l,i,p" and len(lines) == 5
    assert all(line.endswith(",1") for line in lines[1:])


def test_malformed_predicate(tmp_path, capsys):
    event = '{m: 2, leaf_classes: [1], predicates: ["c[1][1] >= 1", "c[1][1] =< 0"]}'
    cfg = write(tmp_path, SINGLE.format(k=2, event=event))
    code, _, err = run(["probs", "--config", cfg], capsys)
    assert code == 2
    assert "c[1][1] =< 0" in err and "model.yaml:6" in err


def test_sample_is_deterministic(tmp_path, capsys):
    cfg = write(tmp_path, MUTANT.format(k=5))
    a = run(["sample", "--config", cfg, "--n", "3", "--class", "1"], capsys)[1]
    b = run(["sample", "--config", cfg, "--n", "3", "--class", "1"], capsys)[1]
    c = run(["sample", "--config", cfg, "--n", "3", "--class", "1", "--threads", "3"], capsys)[1]
    assert a == b == c and len(a.splitlines()) == 3
    d = run(["sample", "--config", cfg, "--n", "3", "--class", "1", "--seed", "8"], capsys)[1]
    assert d != a


def test_sample_generation_size(tmp_path, capsys):
    cfg = write(tmp_path, SINGLE.format(k=2, event="{builtin: generation_size, G: 2}"))
    code, out, _ = run(["sample", "--config", cfg, "--n", "200", "--class", "3"], capsys)
    assert code == 0
    for line in out.splitlines():
        assert (generation_sizes(parse_tree(line)) + [0, 0, 0])[2] == 2


def test_sample_exact_height(tmp_path, capsys):
    cfg = write(tmp_path, SINGLE.format(k=3, event="{builtin: exact_height}"))
    code, out, _ = run(["sample", "--config", cfg, "--n", "200", "--class", "1", "--check"], capsys)
    assert code == 0
    assert all(height(parse_tree(line)) == 3 for line in out.splitlines())


def test_sample_annotated_and_unconditioned(tmp_path, capsys):
    cfg = write(tmp_path, SINGLE.format(k=2, event="{builtin: survival}"))
    code, out, _ = run(["sample", "--config", cfg, "--n", "50", "--annotate"], capsys)
    assert code == 0
    for line in out.splitlines():
        tree = parse_tree(line)
        assert line.startswith("1:1" if height(tree) == 2 else "1:2")


def test_sample_impossible_class(tmp_path, capsys):
    text = SINGLE.format(k=2, event="{builtin: generation_size, G: 2}").replace(
        '"0": 1/4, "1": 1/4, "2": 1/2', '"1": 1'
    )
    cfg = write(tmp_path, text)
    code, _, err = run(["sample", "--config", cfg, "--class", "3"], capsys)
    assert code == 3 and "probability 0" in err
    assert run(["sample", "--config", cfg, "--class", "9"], capsys)[0] == 2


def test_dump_config_roundtrip(tmp_path, capsys):
    cfg = write(tmp_path, MUTANT.format(k=4))
    code, dumped, _ = run(["probs", "--config", cfg, "--dump-config"], capsys)
    assert code == 0
    again = write(tmp_path, dumped, "again.yaml")
    assert run(["probs", "--config", again, "--dump-config"], capsys)[1] == dumped
    assert run(["probs", "--config", cfg], capsys)[1] == run(["probs", "--config", again], capsys)[1]


def test_missing_config_file(capsys):
    code, _, err = run(["probs", "--config", "/nonexistent.yaml"], capsys)
    assert code == 2 and "error" in err


def test_verify_quick_and_fault(capsys):
    code, out, _ = run(["verify", "--preset", "quick"], capsys)
    assert code == 0 and "0 failed" in out.splitlines()[-1]
    code, out, _ = run(["verify", "--preset", "quick", "--inject-fault"], capsys)
    assert code == 4 and "injected-fault" in out and "1 failed" in out


def test_verify_guard_skips(capsys):
    code, out, _ = run(["verify", "--preset", "quick", "--guard", "3"], capsys)
    assert code == 0 and "skipped" in out and "SKIP" in out


def test_figures(tmp_path, capsys):
    code, out, _ = run(["figures", "--out", str(tmp_path)], capsys)
    assert code == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["figure1.csv", "figure2.csv", "figure3_k60.csv", "figure3_k90.csv"]
    assert len((tmp_path / "figure1.csv").read_text().splitlines()) == 101
    assert len((tmp_path / "figure2.csv").read_text().splitlines()) == 62


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, SINGLE.format(k=2, event="{builtin: survival}"))
    res = subprocess.run(
        [sys.executable, "-m", "condgw", "sample", "--config", cfg, "--n", "2", "--class", "1"],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0 and len(res.stdout.splitlines()) == 2
