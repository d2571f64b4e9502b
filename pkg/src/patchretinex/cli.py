"""Batch command-line front end.

    patchretinex correct IMAGE... [--method NAME] [--out-dir DIR]
    patchretinex compare IMAGE_OR_DIR... [--method A,B] [--gt gt.json] [--format text]
    patchretinex retinex IMAGE... [--mode ssr|msr|path] [--gray]

Exit status is 0 when every image succeeded, 1 when any image failed and 2
on a usage error.
"""

import argparse
import configparser
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .balance import DEFAULT_REGISTRY
from .evaluation import SERIES, GroundTruth, evaluate_batch, load_ground_truth, report_to_table
from .image import load_image, save_gray, save_image, to_gray
from .retinex import KERNELS, RetinexParams, lightness_to_image, msr, parse_msr_scales, retinex_lightness_map, ssr

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PROG = "patchretinex"
IMAGE_SUFFIXES = (".png", ".tif", ".tiff")
FORMAT_SUFFIX = {"csv": ".csv", "json": ".json", "text": ".txt"}
RETINEX_MODES = ("ssr", "msr", "path")
STD_DDOF = {"population": 0, "sample": 1}


class UsageError(Exception):
    pass


# -- value parsers shared by flags and config keys ---------------------------


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise ValueError(f"must be positive, got {text}")
    return value


def _unit_float(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"must lie in [0, 1], got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise ValueError(f"must be >= 1, got {text}")
    return value


def _path_length(text):
    value = int(text)
    if value < 2:
        raise ValueError(f"must be >= 2, got {text}")
    return value


def _seed(text):
    value = int(text)
    if value < 0:
        raise ValueError(f"must be >= 0, got {text}")
    return value


def _choice(options):
    def parse(text):
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}, got {text!r}")
        return text
    return parse


def _methods(text):
    if isinstance(text, (list, tuple)):
        names = [str(t).strip() for t in text]
    else:
        names = [t.strip() for t in str(text).split(",")]
    names = [n for n in names if n]
    if not names:
        raise ValueError("empty method list")
    return tuple(names)


def _bool(text):
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


# config key -> (parser, flag name)
SETTINGS = {
    "method": (_methods, "--method"),
    "sigma": (_positive_float, "--sigma"),
    "threshold": (_unit_float, "--threshold"),
    "paths": (_positive_int, "--paths"),
    "path_length": (_path_length, "--path-length"),
    "seed": (_seed, "--seed"),
    "kernel": (_choice(KERNELS), "--kernel"),
    "epsilon": (_positive_float, "--epsilon"),
    "msr_scales": (parse_msr_scales, "--msr-scales"),
    "gt": (str, "--gt"),
    "format": (_choice(tuple(FORMAT_SUFFIX)), "--format"),
    "workers": (_positive_int, "--workers"),
    "out_dir": (str, "--out-dir"),
    "series": (_choice(SERIES), "--series"),
    "mode": (_choice(RETINEX_MODES), "--mode"),
    "gray": (_bool, "--gray"),
    "write_images": (_bool, "--write-images"),
    "std": (_choice(tuple(STD_DDOF)), "--std"),
}


def _flag_type(key):
    parse = SETTINGS[key][0]

    def convert(text):
        try:
            return parse(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    convert.__name__ = key
    return convert


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings of one CLI run."""

    command: str
    inputs: tuple
    out_dir: Path | None
    methods: tuple
    params: RetinexParams
    gt_path: Path | None
    report_format: str
    workers: int
    series: str | None
    mode: str
    gray: bool
    write_images: bool
    ddof: int


DEFAULTS = {
    "method": None,  # per-command default, see resolve_config
    "format": "text",
    "workers": 1,
    "out_dir": None,
    "gt": None,
    "series": None,
    "mode": "ssr",
    "gray": False,
    "write_images": False,
    "std": "population",
}


def read_config_file(path) -> dict:
    """Read a TOML (``.toml``) or INI config file into validated settings.

    INI files may put keys in a ``[patchretinex]`` section or at top level.
    Unknown keys are rejected.
    """
    path = Path(path)
    try:
        if path.suffix.lower() == ".toml":
            with open(path, "rb") as f:
                raw = tomllib.load(f)
            raw = raw.get(PROG, raw)
        else:
            parser = configparser.ConfigParser()
            text = path.read_text()
            if not text.lstrip().startswith("["):
                text = f"[{PROG}]\n" + text
            parser.read_string(text)
            raw = {}
            for section in parser.sections():
                raw.update(parser[section])
    except OSError as exc:
        raise UsageError(f"argument --config: cannot read {path}: {exc.strerror}") from None
    except (tomllib.TOMLDecodeError, configparser.Error) as exc:
        raise UsageError(f"argument --config: cannot parse {path}: {exc}".splitlines()[0]) from None
    out = {}
    for key, value in raw.items():
        norm = key.replace("-", "_")
        if norm not in SETTINGS:
            raise UsageError(f"argument --config: unknown key {key!r} in {path}")
        try:
            out[norm] = SETTINGS[norm][0](value)
        except (ValueError, TypeError) as exc:
            raise UsageError(f"argument --config: key {key!r}: {exc}") from None
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Retinex white balance for microscopy images.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("inputs", nargs="+", help="image files (or directories for compare)")
    common.add_argument("--config", help="TOML or INI file with defaults")
    common.add_argument("--out-dir", dest="out_dir", type=_flag_type("out_dir"))
    common.add_argument("--sigma", type=_flag_type("sigma"), help="Gaussian surround scale (80)")
    common.add_argument("--threshold", type=_flag_type("threshold"), help="path contrast threshold t (0.05)")
    common.add_argument("--paths", type=_flag_type("paths"), help="paths per pixel N (16)")
    common.add_argument("--path-length", dest="path_length", type=_flag_type("path_length"))
    common.add_argument("--seed", type=_flag_type("seed"), help="path sampler seed (0)")
    common.add_argument("--kernel", type=_flag_type("kernel"), help="surround kernel")
    common.add_argument("--epsilon", type=_flag_type("epsilon"), help="log offset (1/255)")
    common.add_argument("--msr-scales", dest="msr_scales", type=_flag_type("msr_scales"),
                        help="MSR scales as sigma:weight,... (15:1/3,80:1/3,250:1/3)")
    common.add_argument("--workers", type=_flag_type("workers"), help="worker processes (1)")

    p = sub.add_parser("correct", parents=[common], help="white-balance images")
    p.add_argument("--method", type=_flag_type("method"), help="method name(s), comma separated")

    p = sub.add_parser("compare", parents=[common], help="angular-error comparison of methods")
    p.add_argument("--method", type=_flag_type("method"), help="method names, comma separated (all)")
    p.add_argument("--gt", type=_flag_type("gt"), help="ground-truth sidecar JSON")
    p.add_argument("--format", type=_flag_type("format"), help="report format: csv, json, text")
    p.add_argument("--series", type=_flag_type("series"), help="series label for all images")
    p.add_argument("--write-images", dest="write_images", action="store_const", const=True,
                   help="also write every corrected variant")
    p.add_argument("--std", type=_flag_type("std"), help="standard deviation: population (default) or sample")

    p = sub.add_parser("retinex", parents=[common], help="write retinex lightness maps")
    p.add_argument("--mode", type=_flag_type("mode"), help="ssr, msr or path")
    p.add_argument("--gray", action="store_const", const=True, help="work on the grayscale image")
    return parser


def resolve_config(argv) -> RunConfig:
    """Parse ``argv`` into a :class:`RunConfig` (flags > config file > defaults)."""
    args = build_parser().parse_args(argv)
    file_values = read_config_file(args.config) if args.config else {}
    values = dict(DEFAULTS)
    values.update(file_values)
    for key in SETTINGS:
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            values[key] = cli_value

    param_kw = {}
    for key, field_name in (("sigma", "sigma"), ("threshold", "threshold"), ("paths", "num_paths"),
                            ("path_length", "path_length"), ("seed", "rng_seed"), ("kernel", "kernel"),
                            ("epsilon", "epsilon"), ("msr_scales", "msr_scales")):
        if values.get(key) is not None:
            param_kw[field_name] = values[key]
    try:
        params = RetinexParams(**param_kw)
    except ValueError as exc:
        flag = "--msr-scales" if "msr" in str(exc) else "--config"
        raise UsageError(f"argument {flag}: {exc}") from None

    for p in args.inputs:
        if not Path(p).exists():
            raise UsageError(f"argument inputs: no such file or directory: {p}")

    methods = values["method"]
    if methods is None:
        methods = ("normal_patch_retinex",) if args.command == "correct" else tuple(DEFAULT_REGISTRY)
    return RunConfig(
        command=args.command,
        inputs=tuple(Path(p) for p in args.inputs),
        out_dir=Path(values["out_dir"]) if values["out_dir"] else None,
        methods=tuple(methods),
        params=params,
        gt_path=Path(values["gt"]) if values["gt"] else None,
        report_format=values["format"],
        workers=values["workers"],
        series=values["series"],
        mode=values["mode"],
        gray=bool(values["gray"]),
        write_images=bool(values["write_images"]),
        ddof=STD_DDOF[values["std"]],
    )


# -- commands ---------------------------------------------------------------


def _expand_inputs(inputs) -> list:
    files = []
    for p in inputs:
        if p.is_dir():
            files.extend(sorted(f for f in p.iterdir() if f.suffix.lower() in IMAGE_SUFFIXES))
        else:
            files.append(p)
    return files


def _run_tasks(fn, tasks, workers):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _output_path(src: Path, out_dir, tag: str) -> Path:
    directory = out_dir if out_dir is not None else src.parent
    return Path(directory) / f"{src.stem}.{tag}{src.suffix}"


def _correct_one(task):
    src, method, out_dir, params = task
    try:
        img, depth = load_image(src, with_depth=True)
        result = DEFAULT_REGISTRY.run(method, img, params)
        dst = _output_path(src, out_dir, method)
        save_image(result.corrected, dst, depth)
    except (ValueError, KeyError, NotImplementedError, OSError) as exc:
        return False, f"{src}: {method}: {exc}"
    e = result.estimated_illuminant
    g = result.gains
    return True, (f"{src} [{method}] illuminant=({e.r:.4f}, {e.g:.4f}, {e.b:.4f}) "
                  f"gains=({g[0]:.4f}, {g[1]:.4f}, {g[2]:.4f}) -> {dst}")


def cmd_correct(config: RunConfig) -> int:
    if config.out_dir is not None:
        config.out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(src, m, config.out_dir, config.params)
             for src in config.inputs for m in config.methods]
    failures = []
    for ok, message in _run_tasks(_correct_one, tasks, config.workers):
        if ok:
            print(message)
        else:
            failures.append(message)
    return _finish(failures)


def _series_for(path: Path, override):
    if override:
        return override
    parent = path.parent.name.upper()
    return parent if parent in SERIES else "HPS"


def cmd_compare(config: RunConfig) -> int:
    files = _expand_inputs(config.inputs)
    if not files:
        raise UsageError("argument inputs: no images found")
    gt = load_ground_truth(config.gt_path) if config.gt_path else GroundTruth()
    images, depths, failures = [], {}, []
    for f in files:
        try:
            img, depth = load_image(f, with_depth=True)
        except (ValueError, OSError) as exc:
            failures.append(f"{f}: {exc}")
            continue
        images.append((f.name, _series_for(f, config.series), img))
        depths[f.name] = depth
    if config.out_dir is not None:
        config.out_dir.mkdir(parents=True, exist_ok=True)
    image_dir = None
    if config.write_images:
        image_dir = config.out_dir if config.out_dir is not None else Path(".")
    report = evaluate_batch(images, config.methods, gt, config.params, workers=config.workers,
                            ddof=config.ddof, output_dir=image_dir, depths=depths)
    text = report_to_table(report, config.report_format)
    if config.out_dir is not None:
        dst = config.out_dir / f"report{FORMAT_SUFFIX[config.report_format]}"
        dst.write_text(text)
    sys.stdout.write(text)
    failures.extend(f"{r.image_id}: {r.method}: {r.error}" for r in report.failures())
    return _finish(failures)


def _retinex_one(task):
    src, mode, gray, out_dir, params = task
    try:
        img, depth = load_image(src, with_depth=True)
        planes = [to_gray(img)] if gray else [img[..., c] for c in range(3)]
        rendered = []
        for plane in planes:
            if mode == "ssr":
                lightness = ssr(plane, params)
            elif mode == "msr":
                lightness = msr(plane, params)
            else:
                lightness = retinex_lightness_map(plane, params)
            rendered.append(lightness_to_image(lightness))
        dst = _output_path(src, out_dir, mode)
        if gray:
            save_gray(rendered[0], dst, depth)
        else:
            save_image(np.stack(rendered, axis=2), dst, depth)
    except (ValueError, OSError) as exc:
        return False, f"{src}: {exc}"
    return True, f"{src} [{mode}] -> {dst}"


def cmd_retinex(config: RunConfig) -> int:
    if config.out_dir is not None:
        config.out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(src, config.mode, config.gray, config.out_dir, config.params) for src in config.inputs]
    failures = []
    for ok, message in _run_tasks(_retinex_one, tasks, config.workers):
        if ok:
            print(message)
        else:
            failures.append(message)
    return _finish(failures)


def _finish(failures) -> int:
    if failures:
        print(f"{len(failures)} failure(s):", file=sys.stderr)
        for f in failures:
            print(f"  {f}", file=sys.stderr)
        return 1
    return 0


COMMANDS = {"correct": cmd_correct, "compare": cmd_compare, "retinex": cmd_retinex}


def main(argv=None) -> int:
    try:
        config = resolve_config(sys.argv[1:] if argv is None else argv)
        return COMMANDS[config.command](config)
    except UsageError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
