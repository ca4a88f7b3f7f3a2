import re
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from concavex import cli
from concavex.config import ConfigError, canonical_text, parse_config
from concavex.grid import GridFunction, read_grid_function, write_grid_function
from concavex.runs import SWEEP_COLUMNS, run_sweep, setup

BASE_1D = """\
[domain]
dimension = 1
lengths = 1.0
nodes = 63

[problem]
p = 3
q = 1.5

[mu]
relative = true
value = 0.5
"""

SUMMARY = re.compile(
    r"^method=(\w+) energy=(\S+) residual_inf=(\S+) min_value=(\S+) iterations=(\d+)$"
)


def write_cfg(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def with_mu(text, block):
    return text.replace("[mu]\nrelative = true\nvalue = 0.5\n", block)


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


# configuration


def test_roundtrip_canonical():
    cfg = parse_config(BASE_1D)
    assert parse_config(cfg.to_text()) == cfg
    assert canonical_text(cfg.to_text()) == cfg.to_text()


@settings(max_examples=60, deadline=None)
@given(
    dim=st.integers(1, 3),
    n=st.integers(2, 50),
    L=st.floats(0.1, 10),
    p=st.floats(2.01, 20),
    q=st.floats(1.01, 1.99),
    sweep=st.booleans(),
    a=st.floats(0, 5),
    b=st.floats(0, 5),
    count=st.integers(1, 20),
    seed=st.integers(0, 2**31),
    mult=st.booleans(),
)
def test_roundtrip_property(dim, n, L, p, q, sweep, a, b, count, seed, mult):
    mu = f"start = {a!r}\nstop = {b!r}\ncount = {count}\nspacing = linear\n" if sweep else f"value = {a!r}\n"
    text = (
        f"[domain]\ndimension = {dim}\nlengths = {' '.join([repr(L)] * dim)}\nnodes = {' '.join([str(n)] * dim)}\n"
        f"[problem]\np = {p!r}\nq = {q!r}\n[mu]\nrelative = false\n{mu}"
        f"[multiplicity]\nenabled = {'true' if mult else 'false'}\n[run]\nseed = {seed}\n"
    )
    cfg = parse_config(text)
    assert parse_config(cfg.to_text()) == cfg
    assert canonical_text(text) == canonical_text(cfg.to_text())


@pytest.mark.parametrize(
    "old,new,field,needle",
    [
        ("q = 1.5", "q = 2.5", "[problem] q", "1 < q < 2"),
        ("p = 3", "p = 1.5", "[problem] p", "p > 2"),
        ("value = 0.5", "value = -1", "[mu] value", "mu >= 0"),
        ("nodes = 63", "nodes = 1", "[domain] nodes", "at least 2"),
        ("dimension = 1", "dimension = 4", "[domain] dimension", "1, 2 or 3"),
        ("lengths = 1.0", "lengths = abc", "[domain] lengths", "cannot parse"),
    ],
)
def test_validation_names_field(old, new, field, needle):
    with pytest.raises(ConfigError) as info:
        parse_config(BASE_1D.replace(old, new))
    msg = str(info.value)
    assert field in msg and needle in msg
    assert re.match(r"line \d+: ", msg)


def test_validation_line_number():
    with pytest.raises(ConfigError, match=r"^line 8: \[problem\] q"):
        parse_config(BASE_1D.replace("q = 1.5", "q = 2.5"))


def test_missing_and_unknown():
    with pytest.raises(ConfigError, match="required"):
        parse_config(BASE_1D.replace("p = 3\n", ""))
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(BASE_1D + "[extras]\nx = 1\n")
    with pytest.raises(ConfigError, match="not both"):
        parse_config(BASE_1D.replace("value = 0.5", "value = 0.5\nstart = 0.1\nstop = 0.2\ncount = 2"))


def test_seed_changes_identity():
    cfg = parse_config(BASE_1D)
    assert cfg.identity("solve") != cfg.with_seed(1).identity("solve")
    assert cfg.identity("solve") == parse_config(BASE_1D).identity("solve")


# thresholds


def test_thresholds_all_empty_above_mu_star(tmp_path, capsys):
    text = with_mu(BASE_1D, "[mu]\nrelative = true\nstart = 1.5\nstop = 3\ncount = 4\n")
    code, out, _ = run(["thresholds", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path)], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# mu_star = ")
    rows = [l.split() for l in lines if not l.startswith("#")][1:]
    assert len(rows) == 4 and all(r[1] == "EMPTY" and r[2] == "EMPTY" for r in rows)


def test_thresholds_single_row(tmp_path, capsys):
    code, out, _ = run(["thresholds", "--config", write_cfg(tmp_path, BASE_1D), "--out", str(tmp_path)], capsys)
    assert code == 0
    table = [l for l in out.splitlines() if not l.startswith("#")]
    assert table[0] == "mu r1 r2 mu_star r_star d1 d2 C1 C2"
    row = table[1].split()
    mu, r1, r2, mu_star = map(float, row[:4])
    assert 0 < r1 < r2 and mu == pytest.approx(mu_star / 2, rel=1e-11)
    assert all(len(re.sub(r"e.*|[-.]", "", f).lstrip("0")) <= 12 for f in row)


# solve


def test_solve_outputs_and_grammar(tmp_path, capsys):
    code, out, _ = run(["solve", "--config", write_cfg(tmp_path, BASE_1D), "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert [SUMMARY.match(l).group(1) for l in lines] == ["minimize_positive", "fixed_point"]
    for l in lines:
        m = SUMMARY.match(l)
        assert float(m.group(2)) < 0 and float(m.group(3)) <= 1e-8 and float(m.group(4)) > 0
    (run_dir,) = (tmp_path / "o").iterdir()
    names = sorted(p.name for p in run_dir.iterdir())
    assert names == [
        "fixed_point.profile",
        "fixed_point.report",
        "minimize_positive.profile",
        "minimize_positive.report",
        "summary.txt",
    ]
    u = read_grid_function(run_dir / "fixed_point.profile")
    assert u.domain.nodes_per_axis == (63,)


def test_solve_refuses_above_mu_star(tmp_path, capsys):
    text = BASE_1D.replace("value = 0.5", "value = 1.5")
    code, _, err = run(["solve", "--config", write_cfg(tmp_path, text)], capsys)
    mu_star = setup(parse_config(BASE_1D)).mu_star
    assert code == 1
    assert f"mu_star={mu_star:.12g}" in err


def test_solve_deterministic(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE_1D)
    run(["solve", "--config", cfg, "--out", str(tmp_path / "a")], capsys)
    run(["solve", "--config", cfg, "--out", str(tmp_path / "b")], capsys)
    a = {p.relative_to(tmp_path / "a"): p.read_bytes() for p in (tmp_path / "a").rglob("*") if p.is_file()}
    b = {p.relative_to(tmp_path / "b"): p.read_bytes() for p in (tmp_path / "b").rglob("*") if p.is_file()}
    assert a == b and len(a) == 5


def test_config_errors_exit_one(tmp_path, capsys):
    code, _, err = run(["solve", "--config", write_cfg(tmp_path, BASE_1D.replace("q = 1.5", "q = 2.5"))], capsys)
    assert code == 1 and "[problem] q" in err
    code, _, err = run(["solve", "--config", str(tmp_path / "missing.ini")], capsys)
    assert code == 1 and "cannot read" in err


# sweep


def test_sweep_header_and_negative_energies(tmp_path):
    text = with_mu(BASE_1D, "[mu]\nrelative = true\nstart = 0.1\nstop = 0.9\ncount = 5\n")
    csv = run_sweep(parse_config(text))
    lines = csv.splitlines()
    assert lines[0] == "mu,r1,r2,energy_min,residual_inf,min_value,solution_count"
    assert tuple(lines[0].split(",")) == SWEEP_COLUMNS
    rows = [l.split(",") for l in lines[1:]]
    assert len(rows) == 5 and all(len(r) == 7 for r in rows)
    mus = [float(r[0]) for r in rows]
    assert mus == sorted(mus)
    assert all(float(r[3]) < 0 and float(r[4]) <= 1e-8 and r[6] == "1" for r in rows)


def test_sweep_marks_rows_outside_range(tmp_path):
    text = with_mu(BASE_1D, "[mu]\nrelative = true\nstart = 0.5\nstop = 1.5\ncount = 2\n")
    rows = [l.split(",") for l in run_sweep(parse_config(text)).splitlines()[1:]]
    assert rows[1][1:] == ["EMPTY", "EMPTY", "NA", "NA", "NA", "NA"]
    assert rows[0][3] != "NA"


def test_count_one_sweep_matches_solve(tmp_path, capsys):
    sweep_text = with_mu(BASE_1D, "[mu]\nrelative = true\nstart = 0.5\nstop = 0.9\ncount = 1\n")
    row = run_sweep(parse_config(sweep_text)).splitlines()[1].split(",")
    code, out, _ = run(["solve", "--config", write_cfg(tmp_path, BASE_1D), "--out", str(tmp_path)], capsys)
    m = SUMMARY.match(out.splitlines()[0])
    assert m.group(1) == "minimize_positive"
    assert row[3:6] == [m.group(2), m.group(3), m.group(4)]


def test_sweep_with_multiplicity_counts(tmp_path):
    text = with_mu(BASE_1D, "[mu]\nrelative = true\nstart = 0.3\nstop = 0.6\ncount = 2\n")
    text += "[multiplicity]\nenabled = true\nwant = 2\nrandom_starts = 4\n"
    rows = [l.split(",") for l in run_sweep(parse_config(text)).splitlines()[1:]]
    assert all(r[6] == "2" for r in rows)


def test_sweep_cli_parallel_identical(tmp_path, capsys):
    text = with_mu(BASE_1D, "[mu]\nrelative = true\nstart = 0.1\nstop = 0.8\ncount = 4\n")
    cfg = write_cfg(tmp_path, text)
    _, one, _ = run(["sweep", "--config", cfg, "--jobs", "1", "--out", str(tmp_path / "a")], capsys)
    _, two, _ = run(["sweep", "--config", cfg, "--jobs", "2", "--out", str(tmp_path / "b")], capsys)
    assert one == two
    (csv,) = (tmp_path / "a").rglob("sweep.csv")
    assert csv.read_text() == one


# multiplicity


def test_multiplicity_want_one_matches_solve(tmp_path, capsys):
    text = BASE_1D + "[multiplicity]\nwant = 1\n"
    cfg = write_cfg(tmp_path, text)
    code, out, _ = run(["multiplicity", "--config", cfg, "--out", str(tmp_path / "m")], capsys)
    assert code == 0
    assert "found = 1" in out
    levels = [float(v) for v in re.findall(r"level_upper_bound\[\d+\] = (\S+)", out)]
    assert len(levels) == 1 and levels[0] < 0
    (run_dir,) = (tmp_path / "m").iterdir()
    u = read_grid_function(run_dir / "solution_0.profile")
    run(["solve", "--config", cfg, "--out", str(tmp_path / "s")], capsys)
    (solve_dir,) = (tmp_path / "s").iterdir()
    v = read_grid_function(solve_dir / "minimize_positive.profile")
    w = u.domain.cell_volume
    assert np.sqrt(w * np.sum((u.values - v.values) ** 2)) < 1e-3


def test_multiplicity_shortfall_exit(tmp_path, capsys):
    text = BASE_1D + "[solver]\ntol = 1e-300\n[multiplicity]\nwant = 2\nrandom_starts = 0\n"
    code, out, err = run(["multiplicity", "--config", write_cfg(tmp_path, text), "--out", str(tmp_path)], capsys)
    assert code == 4 and "shortfall" in err


# verify


def test_verify_exit_codes(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE_1D)
    run(["solve", "--config", cfg, "--out", str(tmp_path / "s")], capsys)
    (solve_dir,) = (tmp_path / "s").iterdir()
    good = solve_dir / "fixed_point.profile"
    code, out, _ = run(["verify", "--config", cfg, "--profile", str(good), "--nonnegative", "--out", str(tmp_path)], capsys)
    assert code == 0 and "in_ball = true" in out

    u = read_grid_function(good)
    write_grid_function(GridFunction(u.domain, 0.5 * u.values), tmp_path / "half.profile")
    code, _, _ = run(["verify", "--config", cfg, "--profile", str(tmp_path / "half.profile"), "--out", str(tmp_path)], capsys)
    assert code == 2

    write_grid_function(GridFunction(u.domain, 1e3 * u.values), tmp_path / "big.profile")
    code, out, _ = run(["verify", "--config", cfg, "--profile", str(tmp_path / "big.profile"), "--out", str(tmp_path)], capsys)
    assert code == 3 and "in_ball = false" in out


def test_verify_needs_profile(tmp_path, capsys):
    code, _, err = run(["verify", "--config", write_cfg(tmp_path, BASE_1D)], capsys)
    assert code == 1 and "--profile" in err
