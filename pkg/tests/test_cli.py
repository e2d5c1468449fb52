import csv
import io
import json
import math

import pytest

from holodual.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_dual_eval_relu_closed(capsys):
    code, out, _ = run(capsys, "dual-eval", "--point", "-1,0,-1")
    assert code == 0
    (row,) = rows(out)
    assert float(row["uE"]) == pytest.approx(0.25, rel=1e-15)
    assert float(row["E"]) == pytest.approx(0.25 / math.pi, rel=1e-15)
    assert row["backend"] == "closed"


def test_dual_eval_heaviside_hgm(capsys):
    code, out, _ = run(capsys, "dual-eval", "--activator", "heaviside", "--backend", "hgm",
                       "--point", "-1,0,-1", "--point", "-1,0.3,-2")
    assert code == 0
    first, second = rows(out)
    assert float(first["uE"]) == pytest.approx(math.pi / 4, rel=1e-12)
    assert float(second["achieved_tol"]) == 1e-10


def test_dual_eval_points_file_in_sigma_form(tmp_path, capsys):
    f = tmp_path / "pts.csv"
    f.write_text("c1,c2,r\n1,1,0\n")
    code, out, _ = run(capsys, "dual-eval", "--points", str(f))
    assert code == 0
    assert float(rows(out)[0]["x11"]) == -0.5


@pytest.mark.parametrize("content", ["", "x11,x12,x22\n", "a,b,c\n1,2,3\n", "x11,x12,x22\n1,x,3\n"])
def test_bad_points_file(tmp_path, capsys, content):
    f = tmp_path / "pts.csv"
    f.write_text(content)
    code, _, err = run(capsys, "dual-eval", "--points", str(f))
    assert code == 2 and "error" in err


def test_input_errors(capsys):
    assert run(capsys, "dual-eval")[0] == 2
    assert run(capsys, "dual-eval", "--point", "1,0,1")[0] == 2
    assert run(capsys, "dual-eval", "--activator", "tanh", "--point", "-1,0,-1")[0] == 2
    assert run(capsys, "no-such-command")[0] == 2


def test_closed_form_unavailable(capsys):
    code, _, err = run(capsys, "dual-eval", "--activator", "resin", "--point", "-1,0,-1")
    assert code == 3 and "closed form NA" in err


def test_hermite(capsys):
    code, out, _ = run(capsys, "hermite", "--activator", "relu", "-N", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 5  # header plus c_0..c_3
    code, out, _ = run(capsys, "hermite", "-N", "0")
    assert code == 0 and len(out.strip().splitlines()) == 2
    assert run(capsys, "hermite", "--activator", "gelu")[0] == 2


def test_output_is_deterministic(tmp_path, capsys):
    args = ["kernel", "--layers", "1", "--beta", "0.5"]
    first, second = run(capsys, *args)[1], run(capsys, *args)[1]
    assert first == second and len(first.splitlines()) == 15
    out_file = tmp_path / "k.csv"
    assert run(capsys, *args, "--out", str(out_file))[0] == 0
    assert out_file.read_text() == first


def test_learn_sin_reports(tmp_path, capsys):
    kfile = tmp_path / "H.csv"
    code, out, err = run(capsys, "learn-sin", "--compare", "hgm", "--kernel-out", str(kfile))
    assert code == 0
    assert len(rows(out)) == 20
    report = dict(line.split("=", 1) for line in err.strip().splitlines())
    assert report["beta_source"] == "default" and float(report["beta"]) == 1.0
    assert float(report["kernel_error[hgm]"]) <= 1e-6
    assert float(report["mse"]) < 1e-2
    assert len(kfile.read_text().splitlines()) == 15


def test_learn_sin_rejects_bad_backend(capsys):
    assert run(capsys, "learn-sin", "--compare", "magic")[0] == 2


def test_path_bench_small(tmp_path, capsys):
    f = tmp_path / "pts.csv"
    f.write_text("c1,c2,r\n1,1,0.1\n1,1.2,0.2\n1.1,1.2,0.3\n")
    code, out, _ = run(capsys, "path-bench", "--points", str(f), "--steps", "1,2", "--repeats", "1")
    assert code == 0
    bench = rows(out)
    assert [int(r["step"]) for r in bench] == [1, 2]
    assert all(float(r["max_deviation"]) < 1e-8 for r in bench)


def test_path_bench_rejects_singular_point(tmp_path, capsys):
    f = tmp_path / "pts.csv"
    f.write_text("x11,x12,x22\n-1,0,-1\n-1,1,-1\n")
    assert run(capsys, "path-bench", "--points", str(f), "--steps", "1")[0] == 2


def test_hie(capsys):
    code, out, err = run(capsys, "hie", "--grid", "5")
    assert code == 0 and len(rows(out)) == 5
    assert float(err.split("=")[1]) <= 1e-4


def test_pfaffian_round_trip(tmp_path, capsys):
    code, out, _ = run(capsys, "pfaffian", "--activator", "heaviside")
    assert code == 0 and json.loads(out)["rank"] == 2
    doc = tmp_path / "heaviside.json"
    doc.write_text(out)
    # the dumped document loads back in place of the built-in system
    code, out, _ = run(capsys, "dual-eval", "--backend", "hgm", "--activator", "heaviside",
                       "--pfaffian", str(doc), "--point", "-1,0.2,-1")
    assert code == 0
    code, out, _ = run(capsys, "pfaffian", "--pfaffian", str(doc), "--check", "5", "--seed", "3")
    assert code == 0
    assert all(float(r["compatibility_residual"]) <= 1e-9 for r in rows(out))


def test_pfaffian_bad_document(tmp_path, capsys):
    doc = tmp_path / "bad.json"
    doc.write_text("{not json")
    assert run(capsys, "pfaffian", "--pfaffian", str(doc))[0] == 2
    doc.write_text(json.dumps({"rank": 3, "variables": ["x11", "x12", "x22"],
                               "std_monomials": [[0, 0, 0]], "matrices": {}}))
    assert run(capsys, "pfaffian", "--pfaffian", str(doc))[0] == 2
