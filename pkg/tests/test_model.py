import pytest

from nhfields.model import ModelError, bundled_models, load_model, locate_model, parse_model

WAVE = """[base]
t, x

[fields]
y

[lagrangian]
L = (y_t^2 - y_x^2)/2
"""


def errors_of(text):
    with pytest.raises(ModelError) as info:
        parse_model(text)
    return info.value.errors


def test_bundled_models_present():
    assert set(bundled_models()) >= {"wave.nhf", "wave_k0.nhf", "nhfield3.nhf", "particle.nhf", "noninv.nhf"}


def test_wave_golden():
    m = load_model("wave")
    assert m.chart.m == 1 and m.k == 0 and len(m.generators) == 1
    assert not m.has_constraint_section
    assert m.grid == {"N": 128, "dt": 0.001, "steps": 1000, "store_every": 1}


def test_wave_k0_has_empty_constraints():
    m = load_model("wave_k0")
    assert m.has_constraint_section and m.k == 0


def test_nhfield3_leading_auto_selected():
    m = load_model("nhfield3")
    assert m.k == 1 and [s.name for s in m.constraints.leading] == ["y3_t"]
    assert set(m.sections["nh"]) == {"xi1", "xi3"}


def test_second_jet_in_lagrangian_is_located():
    errs = errors_of(WAVE.replace("L = (y_t^2 - y_x^2)/2", "lagrangian = y1_tt").replace("y\n\n[lag", "y1\n\n[lag"))
    assert [(e.line, e.column) for e in errs] == [(8, 14)]
    assert "second" in errs[0].message or "order" in errs[0].message


def test_unknown_name_is_located():
    errs = errors_of(WAVE.replace("L = (y_t^2 - y_x^2)/2", "L = q"))
    assert [(e.line, e.column) for e in errs] == [(8, 5)]


def test_all_errors_collected():
    text = WAVE + "\n[symmetry]\nxi = [w: 1]\n\n[grid]\nN = -3\n"
    errs = errors_of(text.replace("(y_t^2 - y_x^2)/2", "y_t^2 +"))
    assert {e.line for e in errs} >= {8, 11, 14}


def test_missing_sections():
    errs = errors_of("[base]\nt\n")
    assert any("[fields]" in e.message for e in errs)


def test_duplicate_names_rejected():
    errs = errors_of(WAVE.replace("[fields]\ny", "[fields]\ny, y"))
    assert errs


def test_initial_data_must_satisfy_constraints():
    text = load_model("nhfield3").render().replace("y3_t = ", "y3_t = 1 + ")
    errs = errors_of(text)
    assert any("phi1" in e.message for e in errs)


def test_subbundle_violation_reported():
    errs = errors_of(WAVE + "\n[constraints]\nphi = y\n")
    assert errs


@pytest.mark.parametrize("name", ["wave.nhf", "wave_k0.nhf", "nhfield3.nhf", "particle.nhf", "noninv.nhf"])
def test_render_round_trip(name):
    m = load_model(name)
    text = m.render()
    again = parse_model(text, name=m.name)
    assert again.render() == text
    assert again.lagrangian == m.lagrangian
    assert again.generators == m.generators


def test_locate_model(tmp_path):
    p = tmp_path / "m.nhf"
    p.write_text(WAVE)
    assert locate_model(str(p)) == p
    assert load_model(str(p)).name == "m"
    with pytest.raises(FileNotFoundError):
        locate_model("no_such_model")
