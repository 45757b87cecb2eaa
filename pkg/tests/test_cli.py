import json

import pytest

from popdiff.cli import dispatch


def run_lines(capsys, argv):
    code = dispatch(argv)
    out = capsys.readouterr().out.strip()
    return code, [json.loads(line) for line in out.splitlines() if line]


@pytest.fixture()
def spec_file(tmp_path):
    path = tmp_path / "rotated-square.json"
    path.write_text(json.dumps({"p": 5, "k": 2, "M1": [[1, 0], [0, 1]], "M2": [[0, -1], [1, 0]]}))
    return str(path)


@pytest.fixture()
def scalar_spec_file(tmp_path):
    path = tmp_path / "one-two.json"
    path.write_text(json.dumps({"p": 5, "k": 1, "M1": [[1]], "M2": [[2]]}))
    return str(path)


def test_check_rotated_square(capsys, spec_file):
    code, lines = run_lines(capsys, ["check", "--spec", spec_file])
    assert code == 0
    assert lines[0]["report"] == {"admissible": True, "spectral": False}
    assert lines[0]["tool"] == "popdiff"
    assert "wall_time_s" in lines[0]


def test_cex_core_values(capsys):
    code, lines = run_lines(capsys, ["cex", "core"])
    assert code == 0
    rep = lines[0]["report"]
    assert rep["sup"] == "73/3125" and rep["mean"] == "2/5" and rep["strict"] is True


def test_unknown_subcommand_exit_1(capsys):
    assert dispatch(["definitely-not-a-subcommand"]) == 1
    capsys.readouterr()


def test_missing_file_is_io_error(capsys):
    assert dispatch(["check", "--spec", "/nonexistent/x.json"]) == 1
    err = capsys.readouterr().err
    assert "error" in err


def test_guard_sentinel(capsys, scalar_spec_file):
    # an oversize request is refused by the guard, exit 1 with the error named
    code = dispatch(["popular", "--spec", scalar_spec_file, "--p", "5", "--n", "4",
                     "--backend", "float", "--guard", "1000"])
    assert code == 1
    assert "TooLarge" in capsys.readouterr().err


def test_math_failure_exit_2(capsys, scalar_spec_file, tmp_path):
    # a single-point set has no popular difference at a tight threshold
    from popdiff.gridfn import GridFunction, write_grid_function

    f = GridFunction.indicator(5, 1, 2, [0])
    path = tmp_path / "point.plgf"
    write_grid_function(f, str(path))
    code, lines = run_lines(capsys, ["popular", "--spec", scalar_spec_file, "--fn", str(path), "--eps", "0"])
    assert code == 2
    assert lines[0]["report"]["hits"] == 0


def test_determinism_byte_identical(capsys, scalar_spec_file):
    argv = ["popular", "--spec", scalar_spec_file, "--p", "5", "--n", "2", "--seed", "7",
            "--backend", "float", "--density", "0.4"]
    _, lines1 = run_lines(capsys, argv)
    _, lines2 = run_lines(capsys, argv)
    for a, b in zip(lines1, lines2):
        a.pop("wall_time_s")
        b.pop("wall_time_s")
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_fnio_roundtrip(capsys, tmp_path):
    src = tmp_path / "a.plgf"
    dst = tmp_path / "b.plgf"
    code, _ = run_lines(capsys, ["fnio", "random", "--out", str(src), "--p", "3", "--n", "2", "--seed", "1"])
    assert code == 0
    code, lines = run_lines(capsys, ["fnio", "roundtrip", "--fn", str(src), "--out", str(dst)])
    assert code == 0 and lines[0]["report"]["roundtrip_identical"] is True


def test_threept_lift_cli(capsys):
    code, lines = run_lines(capsys, ["threept", "lift", "--N", "30", "--eps", "0.2", "--density", "0.5", "--seed", "3"])
    assert code == 0
    assert lines[0]["report"]["audit_ok"] is True


def test_equidist_tuple_cli(capsys, tmp_path):
    factor = {"p": 3, "n": 4, "b1": [[1, 0, 0, 0]], "b2": [[[1 if i == j else 0 for j in range(4)] for i in range(4)]], "b3": []}
    path = tmp_path / "factor.json"
    path.write_text(json.dumps(factor))
    code, lines = run_lines(capsys, ["equidist", "--mode", "tuple", "--factor", str(path), "--J", "[[2]]"])
    assert code == 0
    assert lines[0]["report"]["support_ok"] is True


def test_all_subcommand_paths_emit_valid_json(tmp_path, capsys, scalar_spec_file):
    factor = {"p": 3, "n": 3, "b1": [[1, 0, 0]], "b2": [[[1, 0, 0], [0, 1, 0], [0, 0, 1]]], "b3": []}
    fpath = tmp_path / "factor.json"
    fpath.write_text(json.dumps(factor))
    gpath = tmp_path / "group.json"
    gpath.write_text(json.dumps({"kind": "Z_N", "N": 61, "M1": 2, "M2": 3}))
    plgf = tmp_path / "f.plgf"
    assert dispatch(["fnio", "random", "--out", str(plgf), "--p", "3", "--n", "2", "--seed", "5"]) == 0
    capsys.readouterr()
    argvs = [
        ["check", "--spec", scalar_spec_file],
        ["subspaces", "--spec", scalar_spec_file],
        ["count", "--spec", scalar_spec_file, "--d", "3", "--p", "5", "--n", "2", "--seed", "1"],
        ["popular", "--spec", scalar_spec_file, "--p", "5", "--n", "2", "--seed", "1", "--backend", "float"],
        ["gowers", "--fn", str(plgf), "--s", "2"],
        ["equidist", "--mode", "linquad", "--factor", str(fpath)],
        ["equidist", "--mode", "tuple", "--factor", str(fpath), "--J", "[[2]]"],
        ["equidist", "--mode", "abstract", "--factor", str(fpath), "--k", "1"],
        ["cex", "core"],
        ["cex", "eight-tuple", "--a", "[1,0,0]", "--b", "[0,1,0]", "--n", "3"],
        ["cex", "hypergraph", "--L", "5"],
        ["cex", "dress", "--n", "2", "--L", "5", "--seeds", "8", "--seed", "9"],
        ["cex", "assemble", "--n", "2", "--L", "5", "--gamma", "1", "--seed", "2"],
        ["cex", "report", "--n", "2", "--L", "5", "--gamma", "1", "--seed", "2", "--seeds", "3"],
        ["threept", "bohr", "--group", str(gpath), "--S", "[1,5]", "--delta", "0.2"],
        ["threept", "count", "--group", str(gpath), "--S", "[3]", "--delta", "0.25", "--seed", "2"],
        ["threept", "decompose", "--group", str(gpath), "--eps", "0.25", "--seed", "4"],
        ["threept", "search", "--group", str(gpath), "--density", "0.4", "--eps", "0.1", "--seed", "3"],
        ["threept", "lift", "--N", "30", "--eps", "0.2", "--seed", "3"],
        ["fnio", "info", "--fn", str(plgf)],
    ]
    for argv in argvs:
        code, lines = run_lines(capsys, argv)
        assert code == 0, argv
        assert lines and lines[0]["tool"] == "popdiff", argv


def test_json_out_file(tmp_path, capsys, scalar_spec_file):
    out = tmp_path / "report.jsonl"
    code = dispatch(["check", "--spec", scalar_spec_file, "--json", str(out)])
    assert code == 0
    assert capsys.readouterr().out == ""
    line = json.loads(out.read_text().splitlines()[0])
    assert line["report"]["admissible"] is True and line["report"]["spectral"] is True
