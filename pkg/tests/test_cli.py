import numpy as np
import pytest

from ncfem3d.cli import build_parser, main, make_config, parse_levels, read_config
from ncfem3d.experiments import (IdentityViolation, LevelError, RunConfig, run, run_stokes_only,
                                 run_triharmonic)


def test_parse_levels():
    assert parse_levels("1,2, 4 8") == [1, 2, 4, 8]
    with pytest.raises(ValueError):
        parse_levels("1,x")
    with pytest.raises(ValueError):
        parse_levels(" ")


def test_read_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# cube run\ndomain = lshape\nlevels = 2, 4\nmode = stokes-only\n"
                   "solver-tol = 1e-11  # tighter\nformat = md\n")
    assert read_config(cfg) == {"domain": "lshape", "levels": [2, 4], "mode": "stokes",
                                "solver_tol": 1e-11, "format": "md"}
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    with pytest.raises(ValueError, match="unknown key"):
        read_config(bad)
    bad.write_text("levels\n")
    with pytest.raises(ValueError, match="key = value"):
        read_config(bad)


def test_flags_override_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("domain = lshape\nlevels = 2,4\nquad_err = 4\n")
    args = build_parser().parse_args(["--config", str(path), "--levels", "1,2", "--domain", "cube"])
    cfg = make_config(args)
    assert (cfg.domain, cfg.levels, cfg.quad_err) == ("cube", [1, 2], 4)
    assert make_config(build_parser().parse_args(["--domain", "lshape"])).levels == [2, 4, 8]


@pytest.mark.parametrize("kwargs", [
    {"domain": "sphere"}, {"mode": "heat"}, {"levels": [2, 2]}, {"levels": [4, 2]}, {"levels": []},
    {"levels": [0, 1]}, {"solver_tol": 0.0}, {"identity_tol": -1.0}, {"quad_err": 7}, {"format": "xml"},
    {"solution": "cosine"},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        RunConfig(**kwargs).validate()


def test_large_levels_need_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--levels", "8,16"])
    assert info.value.code == 2
    assert "--allow-large" in capsys.readouterr().err


def test_zero_load_gives_zero_solution():
    rep = run_triharmonic(RunConfig(levels=[1, 2], solution="zero"))
    for key in ("err_sigma_l2", "err_sigma_h1", "err_u_h1", "err_u_h2", "norm_p", "jump_r"):
        assert np.all(rep.values(key) <= 1e-10)
    assert np.all(np.isnan(rep.rates("err_u_h2")))


def test_stokes_mode_columns():
    rep = run(RunConfig(levels=[1, 2], mode="stokes"))
    assert rep.mode == "stokes"
    assert np.all(rep.values("identity_residual") <= 1e-8)
    assert np.all(rep.values("norm_p") > 0)


def test_csv_bytes_deterministic(tmp_path):
    paths = [tmp_path / f"run{k}.csv" for k in range(2)]
    for p in paths:
        assert main(["--levels", "1,2", "--out", str(p)]) == 0
    a, b = (p.read_bytes() for p in paths)
    assert a == b
    assert a.startswith(b"level,h,err_sigma_l2,rate,")
    assert len(a.splitlines()) == 3


def test_markdown_to_stdout(capsys):
    assert main(["--levels", "1", "--mode", "stokes", "--format", "md"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("### stokes on cube") and "| 2^-0 |" in out


def test_exports(tmp_path):
    vtk, mtx = tmp_path / "vtk", tmp_path / "mtx"
    assert main(["--levels", "1", "--export-vtk", str(vtk), "--export-mtx", str(mtx),
                 "--out", str(tmp_path / "t.csv")]) == 0
    assert (vtk / "triharmonic-cube-1.vtk").exists()
    assert (mtx / "stokes-cube-1.mtx").exists()


def test_identity_violation_carries_level(tmp_path, capsys):
    with pytest.raises(LevelError) as info:
        run_stokes_only(RunConfig(levels=[1], mode="stokes", identity_tol=1e-300))
    assert isinstance(info.value.__cause__, IdentityViolation)
    assert "n=1" in str(info.value)
    cfg = tmp_path / "strict.cfg"
    cfg.write_text("identity_tol = 1e-300\nlevels = 1\n")
    assert main(["--config", str(cfg)]) == 1
    assert "curl_h sigma_h" in capsys.readouterr().err
