"""Rendering: every figure kind, determinism, and the CLI wrappers."""

import numpy as np
import pytest

from vptomo_plots import cli, figures
from vptomo_plots.figures import FigureSpec, fitted_slope, render

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _specs(examples, outdir, tag=""):
    e = str(examples)
    return [
        FigureSpec("sinogram", (f"{e}/sinogram_constant.csv",),
                   str(outdir / f"sinogram{tag}.png")),
        FigureSpec("reconstruction", (f"{e}/n_hat.csv", f"{e}/n_true.csv"),
                   str(outdir / f"reconstruction{tag}.png")),
        FigureSpec("convergence", (f"{e}/sweep.csv",),
                   str(outdir / f"convergence{tag}.png")),
        FigureSpec("trajectories",
                   (f"{e}/trajectory_s5.csv", f"{e}/trajectory_s10.csv"),
                   str(outdir / f"trajectories{tag}.png")),
    ]


def test_spec_validation():
    with pytest.raises(ValueError):
        FigureSpec("pie-chart", ("a.csv",), "out.png")
    with pytest.raises(ValueError):
        FigureSpec("reconstruction", ("only-one.csv",), "out.png")
    with pytest.raises(ValueError):
        FigureSpec("trajectories", (), "out.png")


def test_acceptance_all_kinds_deterministic(examples, tmp_path):
    # every kind renders from the shipped examples, and two consecutive
    # runs are pixel-identical
    ok = True
    detail = []
    for s1, s2 in zip(_specs(examples, tmp_path, "_a"),
                      _specs(examples, tmp_path, "_b")):
        p1, p2 = render(s1), render(s2)
        b1, b2 = open(p1, "rb").read(), open(p2, "rb").read()
        same = b1 == b2 and b1.startswith(PNG_MAGIC)
        ok = ok and same
        detail.append(f"{s1.kind} {'ok' if same else 'DIFFERS'}")
    print(f"ACCEPTANCE {'PASS' if ok else 'FAIL'} figure-determinism: "
          + ", ".join(detail))
    assert ok


def test_rerender_idempotent(examples, tmp_path):
    spec = _specs(examples, tmp_path)[2]
    inputs_before = [open(p, "rb").read() for p in spec.inputs]
    render(spec)
    first = open(spec.output, "rb").read()
    render(spec)
    assert open(spec.output, "rb").read() == first
    assert [open(p, "rb").read() for p in spec.inputs] == inputs_before


def test_zero_sinogram_renders(tmp_path):
    lines = ["# config=0000000000000000", "n_a,n_s,R_d", "3,3,1.0",
             "angle_index,offset_index,alpha,offset,v1,v2,parallel_residual"]
    for i in range(3):
        for j in range(3):
            lines.append(f"{i},{j},{i * 1.0471975511965976},{-0.95 + 0.95 * j},0.0,0.0,0.0")
    path = tmp_path / "zero.csv"
    path.write_text("\n".join(lines) + "\n")
    out = render(FigureSpec("sinogram", (str(path),), str(tmp_path / "zero.png")))
    assert open(out, "rb").read().startswith(PNG_MAGIC)


def test_synthetic_slope_annotation(tmp_path):
    # exact speed^-2 data must fit slope -2.0 within the 0.1 band
    speeds = (25.0, 50.0, 100.0, 200.0)
    rows = [f"{s},0.1,0.2,0.0,0.3,{10.0 / s**2},1e-06,2,0.001,1e-11,0.01,0.01"
            for s in speeds]
    path = tmp_path / "sweep.csv"
    path.write_text("# config=0000000000000000\n"
                    + ",".join(figures.readers.SWEEP_COLUMNS) + "\n"
                    + "\n".join(rows) + "\n")
    errs = [10.0 / s**2 for s in speeds]
    slope = fitted_slope(speeds, errs)
    assert abs(slope - (-2.0)) < 0.1
    out = render(FigureSpec("convergence", (str(path),), str(tmp_path / "c.png")))
    assert open(out, "rb").read().startswith(PNG_MAGIC)


def test_cli_success(examples, tmp_path, capsys):
    out = str(tmp_path / "s.png")
    code = cli.main_sinogram([str(examples / "sinogram_constant.csv"), "--out", out])
    assert code == 0
    assert capsys.readouterr().out.strip() == out
    code = cli.main_trajectory([str(examples / "trajectory_s5.csv"), "--out",
                                str(tmp_path / "t.png")])
    assert code == 0


def test_cli_malformed_input(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("not a sinogram\n")
    code = cli.main_sinogram([str(bad), "--out", str(tmp_path / "x.png")])
    assert code == 2
    err = capsys.readouterr().err
    assert f"{bad}:1:" in err


def test_cli_missing_input(tmp_path, capsys):
    code = cli.main_recon([str(tmp_path / "a.csv"), str(tmp_path / "b.csv"),
                           "--out", str(tmp_path / "r.png")])
    assert code == 2
    assert "a.csv:0:" in capsys.readouterr().err
