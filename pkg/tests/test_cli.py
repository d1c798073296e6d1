import json

import pytest

from nhfields.cli import main


def run(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


def test_derive_wave(capsys):
    code, out, _ = run(capsys, "derive", "wave")
    assert code == 0
    rep = json.loads(out)
    assert rep["field_equations"] == {"y": "y_tt - y_xx"}
    assert "constraints" not in rep


def test_derive_constrained_reports_multipliers(capsys, tmp_path):
    out = tmp_path / "d.json"
    assert run(capsys, "derive", "nhfield3", "--out", str(out))[0] == 0
    rep = json.loads(out.read_text())
    c = rep["constraints"]
    assert c["leading"] == ["y3_t"]
    assert c["admissibility_det"] == "y2^2 + 1"


@pytest.mark.slow
def test_check_wave_all_lemmas(capsys):
    code, out, _ = run(capsys, "check", "wave", "--lemmas", "all", "--trials", "100", "--seed", "42")
    assert code == 0
    assert "FAIL" not in out


def test_check_noninv_names_generator(capsys):
    code, out, _ = run(capsys, "check", "noninv.nhf", "--lemmas", "noether", "--trials", "5")
    assert code == 1
    assert "FAIL noether generator xi" in out


def test_check_is_deterministic(capsys):
    args = ("check", "nhfield3", "--lemmas", "3.1,noether,momentum", "--trials", "4", "--seed", "9")
    first = run(capsys, *args)
    second = run(capsys, *args)
    assert first == second and first[0] == 0
    assert "INFO momentum section nh [verbatim lift]" in first[1]


def test_lemma_aliases(capsys):
    a = run(capsys, "check", "wave", "--lemmas", "3.1,3.2", "--trials", "3")
    b = run(capsys, "check", "wave", "--lemmas", "cartan_identity,prolonged_bracket", "--trials", "3")
    assert a == b and a[0] == 0


def test_usage_errors(capsys, tmp_path):
    assert run(capsys, "check", "no_such_model")[0] == 2
    assert run(capsys, "check", "wave", "--lemmas", "9.9")[0] == 2
    bad = tmp_path / "bad.nhf"
    bad.write_text("[base]\nt\n[fields]\ny\n[lagrangian]\nL = y_tt\n")
    code, _, err = run(capsys, "derive", str(bad))
    assert code == 2 and "6:5" in err


def test_unknown_command_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate", "wave"])
    assert info.value.code == 2


def test_simulate_and_report(capsys, tmp_path):
    traj = tmp_path / "traj.csv"
    code, out, _ = run(capsys, "simulate", "wave", "--grid", "32", "--dt", "1e-3", "--steps", "20",
                       "--store-every", "5", "--out", str(traj))
    assert code == 0
    lines = traj.read_text().splitlines()
    assert lines[0] == "t,node,y,y_t"
    assert len(lines) == 1 + (20 // 5 + 1) * 32
    cons = tmp_path / "cons.csv"
    code, out, _ = run(capsys, "report", "wave", str(traj), "--out", str(cons))
    assert code == 0
    assert cons.read_text().splitlines()[0] == "t,J_xi"
    code, _, _ = run(capsys, "simulate", "wave", "--steps", "0")
    assert code == 2


def test_simulate_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        run(capsys, "simulate", "nhfield3", "--grid", "16", "--steps", "10", "--out", str(p))
    assert a.read_bytes() == b.read_bytes()


def test_report_particle_columns(capsys, tmp_path):
    traj = tmp_path / "p.csv"
    run(capsys, "simulate", "particle", "--steps", "50", "--out", str(traj))
    cons = tmp_path / "c.csv"
    assert run(capsys, "report", "particle", str(traj), "--out", str(cons))[0] == 0
    header = cons.read_text().splitlines()[0]
    assert header == "t,J_ex,J_ez,Jnh_nh,dJnh_dt,rhs,residual"


def test_pipelines_agree_on_k0(capsys):
    outs = []
    for pipe in ("constrained", "unconstrained"):
        outs.append(run(capsys, "derive", "wave_k0", "--pipeline", pipe)[1])
    assert outs[0] == outs[1]
