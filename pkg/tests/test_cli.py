import argparse
import json
import math

import pytest

from freeconv import cli, convolution, io
from freeconv.errors import ParseError, SolverFailure
from freeconv.models.measure import AtomicMeasure, SemicircleMeasure
from freeconv.models.run_config import RunConfig


def _run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_edges_output(capsys):
    code, out, _ = _run(capsys, "edges", "--xi", "0.25", "--zeta", "0.25", "--theta", "1")
    assert code == 0
    assert out.strip() == "0.133975 1 1 1.866025"


def test_edges_as_json(capsys):
    code, out, _ = _run(capsys, "edges", "--xi", "0.5", "--zeta", "0.5", "--theta", "1", "--format", "json")
    assert code == 0
    (record,) = json.loads(out)
    assert record["l2"] == pytest.approx(1.0)
    assert record["l4"] == pytest.approx(2.0)


def test_convolve_semicircles(capsys):
    code, out, _ = _run(capsys, "convolve", "--m1", "semicircle:0,1", "--m2", "semicircle:0,1", "--z", "0+1.5i")
    assert code == 0
    (record,) = json.loads(out)
    assert record["m_im"] == pytest.approx((math.sqrt(10.25) - 1.5) / 4, rel=1e-9)
    assert record["m_re"] == pytest.approx(0.0, abs=1e-12)
    assert record["gamma"] == pytest.approx(1.25, rel=1e-6)


def test_convolve_with_a_point_mass(capsys):
    code, out, _ = _run(capsys, "convolve", "--m1", "semicircle:0,1", "--m2", "pointmass:0.5", "--z", "1i")
    assert code == 0
    (record,) = json.loads(out)
    assert complex(record["omega2_re"], record["omega2_im"]) == pytest.approx(-0.5 + 1j, abs=1e-10)


def test_convolve_fair_coins_at_the_center(capsys):
    code, out, _ = _run(capsys, "convolve", "--m1", "bernoulli:0.5", "--m2", "bernoulli:0.5", "--z", "1+1e-9i")
    assert code == 0
    (record,) = json.loads(out)
    assert complex(record["m_re"], record["m_im"]) == pytest.approx(1j, abs=1e-6)
    assert record["density"] == pytest.approx(1 / math.pi, abs=1e-6)


def test_density_csv(capsys):
    code, out, _ = _run(capsys, "density", "--m1", "bernoulli:0.5", "--m2", "bernoulli:0.5", "--range", "0.2,1.8", "--points", "9")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "x,f"
    assert len(lines) == 10
    assert all(float(line.split(",")[1]) > 0 for line in lines[1:])


def test_atoms_command(capsys):
    code, out, _ = _run(capsys, "atoms", "--m1", "bernoulli:0.2", "--m2", "twopoint:0.3,1.5", "--format", "json")
    assert code == 0
    assert [row["loc"] for row in json.loads(out)] == [0.0, 1.5]


def test_bulk_command(capsys):
    code, out, _ = _run(capsys, "bulk", "--m1", "bernoulli:0.5", "--m2", "bernoulli:0.5", "--range", "-0.5,2.5", "--points", "61", "--format", "json")
    assert code == 0
    assert len(json.loads(out)) == 1


@pytest.mark.parametrize("argv", [
    ["convolve", "--m1", "nonsense:1", "--m2", "bernoulli:0.5", "--z", "1i"],
    ["convolve", "--m1", "bernoulli:0.5", "--m2", "bernoulli:0.5", "--z", "1-1i"],
    ["convolve", "--m1", "bernoulli:0.5", "--m2", "bernoulli:1.5", "--z", "1i"],
    ["density", "--m1", "bernoulli:0.5", "--m2", "bernoulli:0.5", "--range", "2,1"],
    ["edges", "--xi", "0.4", "--zeta", "0.3", "--theta", "1"],
    ["convolve", "--m1", "bernoulli:0.5"],
    ["no-such-command"],
])
def test_usage_errors_exit_with_1(capsys, argv):
    code, _, err = _run(capsys, *argv)
    assert code == 1
    assert err


def test_solver_failures_exit_with_2(capsys, monkeypatch):
    def fail(*args, **kwargs):
        raise SolverFailure("no convergence")

    monkeypatch.setattr(convolution, "subordination_at", fail)
    code, _, err = _run(capsys, "convolve", "--m1", "bernoulli:0.5", "--m2", "bernoulli:0.5", "--z", "1i")
    assert code == 2
    assert "no convergence" in err


def test_dump_config_replays(capsys, tmp_path):
    path = str(tmp_path / "run.json")
    argv = ["convolve", "--m1", "bernoulli:0.5", "--m2", "semicircle:0,1", "--z", "0.3+0.2i"]
    code, first, _ = _run(capsys, *argv, "--dump-config", path)
    assert code == 0
    stored = RunConfig.load(path)
    assert stored.command == "convolve"
    assert "--dump-config" not in stored.argv

    code, replayed, _ = _run(capsys, "run-config", path)
    assert code == 0
    assert replayed == first


def test_run_config_rejects_tampering(tmp_path):
    config = RunConfig("edges", ("edges", "--xi", "0.5", "--zeta", "0.5", "--theta", "1"))
    assert RunConfig.from_json(config.to_json()) == config
    data = json.loads(config.to_json())
    data["argv"][2] = "0.25"
    with pytest.raises(ParseError):
        RunConfig.from_json(json.dumps(data))
    with pytest.raises(ParseError):
        RunConfig.from_json(json.dumps({"command": "density", "argv": ["edges"]}))
    with pytest.raises(ParseError):
        RunConfig.load(str(tmp_path / "missing.json"))


def test_rmt_output_does_not_depend_on_threads(capsys):
    argv = ["rmt", "local-law", "--a", "bernoulli:0.5", "--b", "bernoulli:0.5", "--n", "60", "--trials", "4", "--seed", "3", "--E", "0.5,1.5", "--eta", "0.1"]
    code, one, _ = _run(capsys, *argv, "--threads", "1")
    assert code == 0
    code, three, _ = _run(capsys, *argv, "--threads", "3")
    assert code == 0
    assert one == three
    assert len(one.strip().splitlines()) == 3


def test_rmt_eigenvalue_dump(capsys, tmp_path):
    path = tmp_path / "eigs.csv"
    code, _, _ = _run(
        capsys, "rmt", "counting", "--a", "bernoulli:0.5", "--b", "bernoulli:0.5", "--n", "20", "--trials", "2",
        "--interval", "0.5,1.5", "--eigenvalues", str(path),
    )
    assert code == 0
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "trial,i,eigenvalue"
    assert len(lines) == 41


@pytest.mark.parametrize("command, extra", [
    ("concentration", ("--q", "identity", "--z", "0.5+0.1i")),
    ("subordination", ("--z", "0.5+0.1i")),
])
def test_rmt_eigenvalue_dump_for_every_experiment(capsys, tmp_path, command, extra):
    path = tmp_path / "eigs.csv"
    code, _, _ = _run(
        capsys, "rmt", command, "--a", "bernoulli:0.5", "--b", "bernoulli:0.5", "--n", "20", "--trials", "2",
        *extra, "--eigenvalues", str(path),
    )
    assert code == 0
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "trial,i,eigenvalue"
    assert len(lines) == 41


def _subparsers(parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sub in action.choices.values():
                yield sub
                yield from _subparsers(sub)


def test_every_option_has_help():
    missing = [
        f"{sub.prog} {action.dest}"
        for sub in _subparsers(cli.build_parser())
        for action in sub._actions
        if not isinstance(action, (argparse._HelpAction, argparse._SubParsersAction)) and not action.help
    ]
    assert missing == []


def test_parse_spec_forms(tmp_path):
    assert isinstance(io.parse_spec("semicircle:0,2"), SemicircleMeasure)
    assert io.parse_spec("bernoulli:0.25").atoms[1] == (1.0, 0.25)
    assert io.parse_spec("pointmass:3").atoms == ((3.0, 1.0),)
    assert io.parse_spec("twopoint:0.3,-2").locations.tolist() == [-2.0, 0.0]
    uniform = io.parse_spec("uniform:-1,0,1")
    assert uniform.weights.tolist() == pytest.approx([1 / 3] * 3)
    assert io.parse_spec("empirical:1,1,2").weights.tolist() == pytest.approx([2 / 3, 1 / 3])
    assert io.parse_spec("atomic:0/0.5,2/0.5").locations.tolist() == [0.0, 2.0]

    path = tmp_path / "mu.json"
    path.write_text(json.dumps([[0, 0.25], [1, 0.75]]))
    from_file = io.parse_spec(f"atomic:@{path}")
    assert isinstance(from_file, AtomicMeasure)
    assert from_file.weights.tolist() == [0.25, 0.75]


@pytest.mark.parametrize("text", ["bernoulli:", "bernoulli:a", "gauss:0,1", "atomic:@/no/such/file.json", "atomic:1/x"])
def test_parse_spec_errors(text):
    with pytest.raises(ParseError):
        io.parse_spec(text)


def test_number_parsing():
    assert io.parse_complex("1+1e-9i") == complex(1, 1e-9)
    assert io.parse_complex("3i") == 3j
    assert io.parse_complex(" 2.5 ") == 2.5
    with pytest.raises(ParseError):
        io.parse_complex("abc")
    assert io.parse_range("-1,2") == (-1.0, 2.0)
    with pytest.raises(ParseError):
        io.parse_range("2,1")
    with pytest.raises(ParseError):
        io.parse_floats("")
    assert io.parse_complex_list("1i, 2+0.5i") == [1j, 2 + 0.5j]


def test_render():
    rows = [{"x": 0.1, "z": 1 + 2j}, {"x": 1 / 3, "z": 0j}]
    text = io.render(rows, "csv")
    assert text.splitlines()[0] == "x,z"
    assert repr(1 / 3) in text
    assert json.loads(io.render(rows, "json"))[0]["z"] == [1.0, 2.0]
    with pytest.raises(ParseError):
        io.render(rows, "xml")


def test_convolve_examples_from_the_command_reference(capsys):
    code, out, _ = _run(capsys, "convolve", "--m1", "semicircle:0,1", "--m2", "semicircle:0,1", "--z", "0+1i")
    assert code == 0
    (record,) = json.loads(out)
    assert complex(record["m_re"], record["m_im"]) == pytest.approx(0.5j, abs=1e-10)

    code, out, _ = _run(capsys, "convolve", "--m1", "pointmass:0.5", "--m2", "bernoulli:0.3", "--z", "0+1i")
    assert code == 0
    (record,) = json.loads(out)
    assert complex(record["omega1_re"], record["omega1_im"]) == pytest.approx(-0.5 + 1j, abs=1e-10)
