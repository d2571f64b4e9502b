import json

import cv2
import numpy as np
import pytest

from patchretinex.balance import DEFAULT_REGISTRY
from patchretinex.cli import main, resolve_config
from patchretinex.image import load_image, save_image
from patchretinex.retinex import DEFAULT_MSR_SCALES
from patchretinex.synthetic import make_slide

FAST = ["--sigma", "6"]


def write_slides(directory, n, size=40, seed=0):
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(n):
        path = directory / f"slide{i}.png"
        save_image(make_slide(size, rng=rng).image, path)
        paths.append(path)
    return paths


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# -- correct ---------------------------------------------------------------------


def test_correct_single_image(tmp_path, capsys):
    (src,) = write_slides(tmp_path, 1)
    code, out, _ = run(["correct", src, *FAST], capsys)
    assert code == 0
    assert (tmp_path / "slide0.normal_patch_retinex.png").is_file()
    assert "illuminant=" in out and "gains=" in out


def test_correct_with_unreadable_input(tmp_path, capsys):
    good = write_slides(tmp_path, 2)
    bad = tmp_path / "broken.png"
    bad.write_bytes(b"garbage")
    out_dir = tmp_path / "out"
    code, _, err = run(["correct", good[0], bad, good[1], "--out-dir", out_dir, *FAST], capsys)
    assert code != 0
    assert sorted(p.name for p in out_dir.iterdir()) == [
        "slide0.normal_patch_retinex.png", "slide1.normal_patch_retinex.png"]
    assert "broken.png" in err


def test_correct_rerun_byte_identical(tmp_path, capsys):
    (src,) = write_slides(tmp_path / "in", 1)
    for name in ("a", "b"):
        assert run(["correct", src, "--out-dir", tmp_path / name, "--method",
                    "normal_patch_retinex,white_patch_retinex", *FAST], capsys)[0] == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_correct_keeps_16_bit_depth(tmp_path, capsys):
    src = tmp_path / "deep.tif"
    save_image(make_slide(32, rng=np.random.default_rng(1)).image, src, 16)
    assert run(["correct", src, "--method", "gray_world"], capsys)[0] == 0
    _, depth = load_image(tmp_path / "deep.gray_world.tif", with_depth=True)
    assert depth == 16


def test_correct_degenerate_names_image(tmp_path, capsys):
    img = np.zeros((8, 8, 3))
    img[..., 0] = 0.4
    save_image(img, tmp_path / "red.png")
    code, _, err = run(["correct", tmp_path / "red.png", "--method", "gray_world"], capsys)
    assert code == 1 and "red.png" in err


# -- compare ---------------------------------------------------------------------


def test_compare_rows_and_aggregates(tmp_path, capsys):
    src = tmp_path / "KI67"
    write_slides(src, 4)
    code, out, _ = run(["compare", src, "--method", "original,gray_world", "--format", "csv",
                        "--out-dir", tmp_path / "rep"], capsys)
    assert code == 0
    lines = out.splitlines()
    body = [l for l in lines[1:] if not l.startswith("<")]
    assert len(body) == 8
    assert all(",KI67," in l for l in body)  # series taken from the directory name
    assert "<mean>,ALL,gray_world" in out and "<std>,ALL,original" in out
    assert (tmp_path / "rep" / "report.csv").read_text() == out


def test_compare_against_sidecar(tmp_path, capsys):
    (src,) = write_slides(tmp_path, 1)
    img = load_image(src)
    top = img.reshape(-1, 3)[np.argsort(-img.max(axis=2).ravel(), kind="stable")[:80]].mean(axis=0)
    gt = tmp_path / "gt.json"
    gt.write_text(json.dumps({src.name: top.tolist()}))
    code, out, _ = run(["compare", src, "--method", "original", "--gt", gt, "--format", "json"], capsys)
    assert code == 0
    assert json.loads(out)["rows"][0]["angular_error_deg"] == pytest.approx(0.0, abs=1e-6)
    code, out, _ = run(["compare", src, "--method", "original", "--format", "json"], capsys)
    assert json.loads(out)["rows"][0]["angular_error_deg"] > 1.0


def test_compare_text_layout(tmp_path, capsys):
    src = tmp_path / "in"
    write_slides(src, 2)
    code, out, _ = run(["compare", src, "--series", "CK34", *FAST], capsys)
    assert code == 0
    head = out.splitlines()[0]
    assert [c.strip() for c in head.split("|")] == ["Method", "Angular Error", "Standard deviation"]
    first_block = out.split("\n\n")[0].splitlines()
    assert [l.split("|")[0].strip() for l in first_block[2:]] == list(DEFAULT_REGISTRY)
    assert "CK34" in out


def test_compare_write_images(tmp_path, capsys):
    write_slides(tmp_path / "in", 1)
    out_dir = tmp_path / "out"
    assert run(["compare", tmp_path / "in", "--write-images", "--out-dir", out_dir, *FAST], capsys)[0] == 0
    names = {p.name for p in out_dir.iterdir()}
    assert {f"slide0.{m}.png" for m in DEFAULT_REGISTRY} | {"report.txt"} == names


def test_compare_unknown_method_fails_row(tmp_path, capsys):
    (src,) = write_slides(tmp_path, 1)
    code, out, err = run(["compare", src, "--method", "original,magic"], capsys)
    assert code == 1
    assert "magic" in out and "magic" in err


def test_compare_sample_std(tmp_path, capsys):
    write_slides(tmp_path / "in", 2)
    base = ["compare", tmp_path / "in", "--method", "original", "--format", "json"]
    pop = json.loads(run(base, capsys)[1])["aggregates"]["per_method"][0]["std"]
    sam = json.loads(run(base + ["--std", "sample"], capsys)[1])["aggregates"]["per_method"][0]["std"]
    assert sam == pytest.approx(pop * np.sqrt(2))


# -- retinex ---------------------------------------------------------------------


@pytest.mark.parametrize("mode", ["ssr", "msr", "path"])
def test_retinex_constant_is_half(tmp_path, capsys, mode):
    save_image(np.full((12, 12, 3), 0.6), tmp_path / "flat.png")
    extra = ["--paths", "2", "--path-length", "4"] if mode == "path" else FAST
    assert run(["retinex", tmp_path / "flat.png", "--mode", mode, *extra], capsys)[0] == 0
    out = load_image(tmp_path / f"flat.{mode}.png")
    assert np.all(out == 128 / 255)


def test_retinex_gray_single_channel(tmp_path, capsys):
    (src,) = write_slides(tmp_path, 1)
    assert run(["retinex", src, "--gray", *FAST], capsys)[0] == 0
    assert cv2.imread(str(tmp_path / "slide0.ssr.png"), cv2.IMREAD_UNCHANGED).ndim == 2


def test_msr_scales_flag(tmp_path):
    (src,) = write_slides(tmp_path, 1)
    cfg = resolve_config(["retinex", str(src), "--mode", "msr", "--msr-scales", "15:0.33,80:0.34,250:0.33"])
    assert cfg.params.msr_scales == ((15.0, 0.33), (80.0, 0.34), (250.0, 0.33))
    assert resolve_config(["retinex", str(src)]).params.msr_scales == DEFAULT_MSR_SCALES


def test_missing_input_is_usage_error(tmp_path, capsys):
    code, out, err = run(["retinex", tmp_path / "nope.png"], capsys)
    assert code == 2 and out == ""
    assert "nope.png" in err


# -- config and diagnostics ------------------------------------------------------


@pytest.mark.parametrize("argv,flag", [
    (["correct", "IMG", "--sigma", "-1"], "--sigma"),
    (["correct", "IMG", "--threshold", "2"], "--threshold"),
    (["compare", "IMG", "--format", "xml"], "--format"),
    (["retinex", "IMG", "--msr-scales", "15:0.5,80"], "--msr-scales"),
    (["retinex", "IMG", "--workers", "0"], "--workers"),
    (["correct", "IMG", "--bogus"], "--bogus"),
    (["compare", "IMG", "--std", "median"], "--std"),
])
def test_single_line_diagnostic(tmp_path, capsys, argv, flag):
    (src,) = write_slides(tmp_path, 1, size=8)
    code, _, err = run([str(src) if a == "IMG" else a for a in argv], capsys)
    assert code == 2
    assert len(err.strip().splitlines()) == 1
    assert flag in err


def test_no_subcommand(capsys):
    code, _, err = run([], capsys)
    assert code == 2 and len(err.strip().splitlines()) == 1


def test_config_defaults_are_resolved(tmp_path):
    (src,) = write_slides(tmp_path, 1, size=8)
    cfg = resolve_config(["correct", str(src)])
    assert cfg.methods == ("normal_patch_retinex",)
    assert cfg.params.sigma == 80.0 and cfg.params.rng_seed == 0
    assert (cfg.workers, cfg.report_format, cfg.ddof) == (1, "text", 0)
    assert resolve_config(["compare", str(src)]).methods == tuple(DEFAULT_REGISTRY)


@pytest.mark.parametrize("name,text", [
    ("run.toml", 'sigma = 12.0\nseed = 5\nmethod = ["gray_world", "original"]\nformat = "csv"\n'),
    ("run.ini", "[patchretinex]\nsigma = 12\nseed = 5\nmethod = gray_world,original\nformat = csv\n"),
])
def test_config_precedence(tmp_path, name, text):
    (src,) = write_slides(tmp_path, 1, size=8)
    conf = tmp_path / name
    conf.write_text(text)
    cfg = resolve_config(["compare", str(src), "--config", str(conf), "--seed", "9"])
    assert cfg.params.sigma == 12.0  # from the file
    assert cfg.params.rng_seed == 9  # flag wins
    assert cfg.methods == ("gray_world", "original")
    assert cfg.report_format == "csv"
    assert cfg.params.threshold == 0.05  # built-in default


def test_config_unknown_key(tmp_path, capsys):
    (src,) = write_slides(tmp_path, 1, size=8)
    conf = tmp_path / "run.toml"
    conf.write_text("sigmaa = 3\n")
    code, _, err = run(["correct", src, "--config", conf], capsys)
    assert code == 2 and "sigmaa" in err and len(err.strip().splitlines()) == 1
