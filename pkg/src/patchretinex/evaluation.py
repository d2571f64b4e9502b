"""Angular-error evaluation of white-balance methods.

Every method, ``original`` included, is scored the same way: the illuminant
left in its corrected output (measured by :func:`estimate_scene_illuminant`)
is compared with the reference white the output should show. For
``original`` the output is the input, so its score is the raw cast.
"""

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .balance import DEFAULT_REGISTRY, DegenerateChannelError, Illuminant
from .image import as_rgb, save_image
from .retinex import RetinexParams

SERIES = ("HPS", "CK34", "KI67")
CSV_HEADER = ("image", "series", "method", "angular_error_deg")
DEFAULT_TOP_FRACTION = 0.05


def _direction(v) -> np.ndarray:
    arr = v.as_array() if isinstance(v, Illuminant) else np.asarray(v, dtype=np.float64)
    arr = arr.ravel()
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"expected a finite RGB triple, got {v!r}")
    n = np.linalg.norm(arr)
    if n == 0:
        raise ValueError("illuminant has zero norm")
    return arr / n


def angular_error(estimate, truth) -> float:
    """Angle in degrees between two illuminant directions.

    Equal to ``acos`` of the clamped dot product of the unit vectors, but
    computed as ``2 atan2(|u - v|, |u + v|)``, which stays accurate for
    nearly parallel vectors where ``acos`` loses about 1e-6 degrees.
    """
    u, v = _direction(estimate), _direction(truth)
    return math.degrees(2.0 * math.atan2(float(np.linalg.norm(u - v)), float(np.linalg.norm(u + v))))


def estimate_scene_illuminant(img, top_fraction: float = DEFAULT_TOP_FRACTION) -> Illuminant:
    """Mean colour of the brightest ``top_fraction`` of pixels.

    Pixels are ranked by HSV value (ties broken in row-major order). On a
    transmitted-light slide this set is dominated by clear glass, i.e. by
    the light source.
    """
    if not 0.0 < top_fraction <= 1.0:
        raise ValueError(f"top_fraction must lie in (0, 1], got {top_fraction}")
    flat = as_rgb(img).reshape(-1, 3)
    v = flat.max(axis=1)
    k = max(1, int(math.ceil(top_fraction * v.size)))
    idx = np.argsort(-v, kind="stable")[:k]
    mean = flat[idx].mean(axis=0)
    if not np.any(mean > 0):
        raise DegenerateChannelError("all", "image is black; no illuminant to estimate")
    return Illuminant.from_array(mean)


@dataclass
class GroundTruth:
    """Reference white per image id, with a fallback for unlisted images."""

    per_image: dict = field(default_factory=dict)
    default_reference: Illuminant = field(default_factory=Illuminant.neutral)

    def truth_for(self, image_id: str) -> Illuminant:
        return self.per_image.get(image_id, self.default_reference)


def load_ground_truth(path) -> GroundTruth:
    """Read a sidecar JSON object mapping image file names to ``[r, g, b]``."""
    with open(path) as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: ground truth must be a JSON object")
    per_image = {}
    for name, rgb in data.items():
        try:
            per_image[str(name)] = Illuminant.from_array(rgb)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{path}: bad illuminant for {name!r}: {exc}") from None
    return GroundTruth(per_image)


@dataclass(frozen=True)
class ErrorRow:
    image_id: str
    series: str
    method: str
    angular_error: float | None  # None when the run failed
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.angular_error is not None


@dataclass
class AngularErrorReport:
    """Per-image angular errors with per-series and per-method aggregates."""

    rows: list
    methods: list = field(default_factory=list)
    ddof: int = 0  # 0 = population standard deviation

    def __post_init__(self):
        for row in self.rows:
            if row.series not in SERIES:
                raise ValueError(f"series must be one of {SERIES}, got {row.series!r}")
            if row.ok and not 0.0 <= row.angular_error <= 180.0:
                raise ValueError(f"angular error out of range: {row.angular_error}")
        seen = list(self.methods)
        for row in self.rows:
            if row.method not in seen:
                seen.append(row.method)
        self.methods = seen

    def errors_for(self, method, series=None) -> list:
        return [r.angular_error for r in self.rows
                if r.ok and r.method == method and (series is None or r.series == series)]

    def series_means(self) -> list:
        """``(method, series, mean, count)`` for every populated pair."""
        out = []
        for m in self.methods:
            for s in SERIES:
                errs = self.errors_for(m, s)
                if errs:
                    out.append((m, s, float(np.mean(errs)), len(errs)))
        return out

    def method_stats(self) -> list:
        """``(method, mean, std, count)``; mean and std are None without data."""
        out = []
        for m in self.methods:
            errs = self.errors_for(m)
            if not errs or len(errs) <= self.ddof:
                mean = float(np.mean(errs)) if errs else None
                out.append((m, mean, None, len(errs)))
            else:
                out.append((m, float(np.mean(errs)), float(np.std(errs, ddof=self.ddof)), len(errs)))
        return out

    def failures(self) -> list:
        return [r for r in self.rows if not r.ok]

    def to_dict(self) -> dict:
        return {
            "ddof": self.ddof,
            "methods": list(self.methods),
            "rows": [
                {"image": r.image_id, "series": r.series, "method": r.method,
                 "angular_error_deg": r.angular_error, "error": r.error}
                for r in self.rows
            ],
            "aggregates": {
                "per_series": [
                    {"method": m, "series": s, "mean": mean, "count": n}
                    for m, s, mean, n in self.series_means()
                ],
                "per_method": [
                    {"method": m, "mean": mean, "std": std, "count": n}
                    for m, mean, std, n in self.method_stats()
                ],
            },
        }

    @classmethod
    def from_dict(cls, data) -> "AngularErrorReport":
        rows = [ErrorRow(r["image"], r["series"], r["method"], r["angular_error_deg"], r.get("error"))
                for r in data["rows"]]
        report = cls(rows, list(data.get("methods", [])), int(data.get("ddof", 0)))
        agg = data.get("aggregates")
        if agg is not None and agg != report.to_dict()["aggregates"]:
            raise ValueError("report aggregates do not match its rows")
        return report


# -- batch evaluation -------------------------------------------------------


def _score(task):
    img, method, truth, params, save_to, depth = task
    try:
        result = DEFAULT_REGISTRY.run(method, img, params)
        residual = estimate_scene_illuminant(result.corrected)
        if save_to is not None:
            save_image(result.corrected, save_to, depth)
        return angular_error(residual, truth), None
    except (ValueError, KeyError, NotImplementedError, OSError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def evaluate_batch(images, methods, gt: GroundTruth | None = None,
                   params: RetinexParams | None = None, *, workers: int = 1,
                   ddof: int = 0, output_dir=None, depths=None) -> AngularErrorReport:
    """Score every ``(image, method)`` pair.

    ``images`` is a sequence of ``(image_id, series, rgb_array)``. Failures
    (unknown method, degenerate image) become error rows instead of
    aborting the batch. Rows are ordered by ``(image_id, method)`` whatever
    the worker count.

    With ``output_dir`` every corrected image is also written there as
    ``<stem>.<method><suffix>``, the suffix and bit depth (``depths``, by
    image id, default 8) following the image id.
    """
    gt = gt or GroundTruth()
    params = params or RetinexParams()
    methods = list(methods)
    depths = depths or {}
    tasks, keys = [], []
    for image_id, series, img in images:
        if series not in SERIES:
            raise ValueError(f"series must be one of {SERIES}, got {series!r}")
        truth = gt.truth_for(image_id)
        for m in methods:
            save_to = None
            if output_dir is not None:
                name = Path(image_id)
                save_to = str(Path(output_dir) / f"{name.stem}.{m}{name.suffix or '.png'}")
            tasks.append((img, m, truth, params, save_to, depths.get(image_id, 8)))
            keys.append((image_id, series, m))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(_score, tasks))
    else:
        scores = [_score(t) for t in tasks]
    rows = [ErrorRow(image_id, series, m, err, msg)
            for (image_id, series, m), (err, msg) in zip(keys, scores)]
    rows.sort(key=lambda r: (r.image_id, r.method))
    return AngularErrorReport(rows, methods, ddof)


# -- serialization ----------------------------------------------------------


def _fmt(value) -> str:
    return "-" if value is None else f"{value:.2f}"


def _text_table(header, body) -> str:
    widths = [max(len(str(row[i])) for row in [header] + body) for i in range(len(header))]
    lines = [" | ".join(str(h).ljust(widths[0]) if i == 0 else str(h).rjust(widths[i])
                        for i, h in enumerate(header))]
    lines.append("-+-".join("-" * w for w in widths))
    for row in body:
        lines.append(" | ".join(str(c).ljust(widths[0]) if i == 0 else str(c).rjust(widths[i])
                                for i, c in enumerate(row)))
    return "\n".join(lines)


def report_to_table(report: AngularErrorReport, format: str = "text") -> str:
    """Serialise a report as ``text``, ``csv`` or ``json``.

    Text and CSV render errors with two decimals; JSON keeps full precision
    so that it parses back to an identical report.
    """
    if format == "json":
        return json.dumps(report.to_dict(), indent=2) + "\n"
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in report.rows:
            writer.writerow([r.image_id, r.series, r.method,
                             _fmt(r.angular_error) if r.ok else "error"])
        for m, s, mean, _ in report.series_means():
            writer.writerow(["<mean>", s, m, _fmt(mean)])
        for m, mean, std, _ in report.method_stats():
            writer.writerow(["<mean>", "ALL", m, _fmt(mean)])
            writer.writerow(["<std>", "ALL", m, _fmt(std)])
        return buf.getvalue()
    if format == "text":
        stats = [(m, _fmt(mean), _fmt(std)) for m, mean, std, n in report.method_stats() if n]
        out = [_text_table(("Method", "Angular Error", "Standard deviation"), stats)]
        means = {(m, s): mean for m, s, mean, _ in report.series_means()}
        present = [s for s in SERIES if any(k[1] == s for k in means)]
        if present:
            body = [(m, *(_fmt(means.get((m, s))) for s in present))
                    for m in report.methods if any((m, s) in means for s in present)]
            out.append(_text_table(("Method", *present), body))
        failures = report.failures()
        if failures:
            out.append("\n".join(f"failed: {r.image_id} / {r.method}: {r.error}" for r in failures))
        return "\n\n".join(out) + "\n"
    raise ValueError(f"unknown report format {format!r}; use csv, json or text")


def report_from_json(text: str) -> AngularErrorReport:
    return AngularErrorReport.from_dict(json.loads(text))


def write_report(report: AngularErrorReport, path, format: str) -> None:
    Path(path).write_text(report_to_table(report, format))
