"""Cross-spectral evaluation: manifest ingestion, all-pairs protocol, ROC/EER.

NIR images act as the gallery (enrollment) and visible-light images as probes
(verification). For every (encoder, eye-color subset, RGB channel) cell all
cross-spectral pairs are scored; genuine means same (subject_id, eye_side).
Samples that fail any pipeline stage are excluded and tallied per cell so the
pair-count arithmetic stays visible instead of silently biasing the EER.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .encoding import code_from_bytes, code_to_bytes, make_encoder
from .exceptions import (
    ConfigError,
    CrossIrisError,
    EmptyScoreList,
    InconsistentEyeColor,
    ManifestError,
    MissingEnrollment,
)
from .imaging import extract_channel, load_image
from .matching import HammingMatcher
from .normalization import RubberSheetNormalizer
from .pipeline import IrisTemplateExtractor
from .segmentation import IrisSegmenter
from .types import CHANNELS, EYE_COLORS, IrisCode, SampleMeta

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ("subject_id", "eye_side", "spectrum", "eye_color", "path")

GENUINE = "GENUINE"
IMPOSTOR = "IMPOSTOR"


@dataclass(frozen=True)
class DatasetManifest:
    """Validated sample list; paths resolve relative to the manifest file."""

    entries: tuple[SampleMeta, ...]
    root: str = "."

    @property
    def subjects(self) -> int:
        return len({m.subject_id for m in self.entries})

    @property
    def irises(self) -> int:
        return len({m.iris_id for m in self.entries})

    def count(self, spectrum: str) -> int:
        return sum(1 for m in self.entries if m.spectrum == spectrum)

    def in_subset(self, eye_color: str, spectrum: str) -> list[SampleMeta]:
        return [
            m for m in self.entries
            if m.eye_color == eye_color and m.spectrum == spectrum
        ]

    def resolve(self, meta: SampleMeta) -> Path:
        path = Path(meta.source_path)
        return path if path.is_absolute() else Path(self.root) / path


def load_manifest(path: str | os.PathLike) -> DatasetManifest:
    """Parse and validate a manifest CSV.

    Header must be exactly ``subject_id,eye_side,spectrum,eye_color,path``.
    Every referenced image must exist, every visible-light iris must also
    appear in NIR (verification requires enrollment), and an iris may carry
    only one eye-color label.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or tuple(reader.fieldnames) != MANIFEST_COLUMNS:
                raise ManifestError(
                    f"{path}: header must be {','.join(MANIFEST_COLUMNS)}"
                )
            rows = list(reader)
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc

    root = path.parent
    entries: list[SampleMeta] = []
    for lineno, row in enumerate(rows, start=2):
        if any(row[c] is None for c in MANIFEST_COLUMNS):
            raise ManifestError(f"{path}:{lineno}: wrong number of fields")
        try:
            meta = SampleMeta(
                subject_id=row["subject_id"].strip(),
                eye_side=row["eye_side"].strip(),
                eye_color=row["eye_color"].strip(),
                spectrum=row["spectrum"].strip(),
                source_path=row["path"].strip(),
            )
        except ValueError as exc:
            raise ManifestError(f"{path}:{lineno}: {exc}") from exc
        if not meta.subject_id or not meta.source_path:
            raise ManifestError(f"{path}:{lineno}: empty subject_id or path")
        target = Path(meta.source_path)
        if not (target if target.is_absolute() else root / target).exists():
            raise ManifestError(
                f"{path}:{lineno}: referenced image {meta.source_path} not found"
            )
        entries.append(meta)

    colors: dict[tuple[str, str], str] = {}
    nir_irises = {m.iris_id for m in entries if m.spectrum == "NIR"}
    for meta in entries:
        seen = colors.setdefault(meta.iris_id, meta.eye_color)
        if seen != meta.eye_color:
            raise InconsistentEyeColor(
                f"iris {meta.iris_id} labeled both {seen} and {meta.eye_color}"
            )
        if meta.spectrum == "VIS" and meta.iris_id not in nir_irises:
            raise MissingEnrollment(
                f"iris {meta.iris_id} has visible-light images but no NIR "
                "enrollment"
            )
    return DatasetManifest(entries=tuple(entries), root=str(root))


@dataclass(frozen=True)
class Comparison:
    gallery: SampleMeta
    probe: SampleMeta
    label: str


def build_comparisons(manifest: DatasetManifest, subset: str) -> list[Comparison]:
    """Every (NIR gallery, VIS probe) pair within one eye-color subset.

    Only cross-spectral pairs are produced: count = |NIR| * |VIS| in the
    subset, labeled GENUINE exactly when both samples share an iris.
    """
    gallery = manifest.in_subset(subset, "NIR")
    probes = manifest.in_subset(subset, "VIS")
    return [
        Comparison(
            gallery=g,
            probe=p,
            label=GENUINE if g.iris_id == p.iris_id else IMPOSTOR,
        )
        for g in gallery
        for p in probes
    ]


# --- run configuration ------------------------------------------------------

CACHE_ENV_VAR = "CROSSIRIS_CACHE_DIR"


@dataclass(frozen=True)
class RunSettings:
    """Protocol configuration; mirrors the plain-text key-value run file."""

    encoders: tuple[str, ...] = ("gabor", "dct")
    channels: tuple[str, ...] = CHANNELS
    subsets: tuple[str, ...] = EYE_COLORS
    max_shift: int = 8
    min_valid_bits: int = 64
    seed: int = 0
    cache_dir: str | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        for ch in self.channels:
            if ch not in CHANNELS:
                raise ConfigError(f"unknown channel {ch!r}")
        for sub in self.subsets:
            if sub not in EYE_COLORS:
                raise ConfigError(f"unknown subset {sub!r}")
        for enc in self.encoders:
            if enc not in ("gabor", "dct"):
                raise ConfigError(f"unknown encoder {enc!r}")
        if self.max_shift < 0 or self.workers < 1:
            raise ConfigError("max_shift must be >= 0 and workers >= 1")

    def replace(self, **changes) -> "RunSettings":
        return replace(self, **changes)


_LIST_KEYS = {"encoders", "channels", "subsets"}
_INT_KEYS = {"max_shift", "min_valid_bits", "seed", "workers"}


def load_run_settings(path: str | os.PathLike) -> RunSettings:
    """Parse a run configuration file: ``key = value`` lines, # comments."""
    values: dict = {}
    for lineno, raw in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = (part.strip() for part in line.partition("="))
        if key in _LIST_KEYS:
            values[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key in _INT_KEYS:
            try:
                values[key] = int(value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {key} must be an integer") from exc
        elif key == "cache_dir":
            values[key] = value
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    return RunSettings(**values)


# --- score sets and the protocol run ----------------------------------------


@dataclass
class ScoreSet:
    """Genuine and impostor score lists of one protocol cell, sorted ascending."""

    encoder_id: str
    eye_color: str
    channel: str
    genuine: list[float]
    impostor: list[float]
    failed_pairs: int = 0

    @property
    def cell(self) -> tuple[str, str, str]:
        return (self.encoder_id, self.eye_color, self.channel)

    @property
    def cell_name(self) -> str:
        return f"{self.encoder_id}/{self.eye_color}/{self.channel}"


@dataclass(frozen=True)
class FailureRecord:
    path: str
    channel: str
    stage: str
    error: str


@dataclass
class ProtocolResult:
    score_sets: list[ScoreSet]
    failures: list[FailureRecord] = field(default_factory=list)


def _pipeline_params(settings: RunSettings) -> dict:
    return {
        "segmenter": IrisSegmenter().get_params(),
        "normalizer": RubberSheetNormalizer().get_params(),
    }


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _template_key(file_digest: str, channel: str | None, pipeline_digest: str) -> str:
    blob = f"{file_digest}:{channel or 'native'}:{pipeline_digest}"
    return hashlib.sha256(blob.encode("ascii")).hexdigest()[:32]


def _build_one(
    task: tuple[str, str | None, tuple[str, ...]]
) -> tuple[tuple[str, str | None], dict[str, bytes], list[tuple[str, str]]]:
    """Worker: image path + optional channel -> serialized codes per encoder.

    Returns ((path, channel), {encoder_id: IXC1 bytes}, [(stage, error), ...]).
    Pure function of its arguments so results are identical regardless of
    which worker runs it.
    """
    path, channel, encoder_ids = task
    codes: dict[str, bytes] = {}
    errors: list[tuple[str, str]] = []
    stage = "load"
    try:
        img = load_image(path)
        if channel is not None:
            img = extract_channel(img, channel)
        stage = "segment"
        seg = IrisSegmenter().segment(img)
        stage = "normalize"
        normalized = RubberSheetNormalizer().normalize(img, seg)
    except CrossIrisError as exc:
        errors.append((stage, f"{type(exc).__name__}: {exc}"))
        return (path, channel), codes, errors
    for encoder_id in encoder_ids:
        try:
            code = make_encoder(encoder_id).encode(normalized)
            codes[encoder_id] = code_to_bytes(code)
        except CrossIrisError as exc:
            errors.append((f"encode:{encoder_id}", f"{type(exc).__name__}: {exc}"))
    return (path, channel), codes, errors


def _gather_templates(
    manifest: DatasetManifest, settings: RunSettings
) -> tuple[dict[tuple[str, str | None], dict[str, IrisCode]], list[FailureRecord]]:
    """Compute (or load cached) templates for every (sample, channel) in play."""
    tasks: list[tuple[str, str | None, tuple[str, ...]]] = []
    seen: set[tuple[str, str | None]] = set()
    for meta in manifest.entries:
        if meta.eye_color not in settings.subsets:
            continue
        resolved = str(manifest.resolve(meta))
        wanted = [None] if meta.spectrum == "NIR" else list(settings.channels)
        for channel in wanted:
            if (resolved, channel) not in seen:
                seen.add((resolved, channel))
                tasks.append((resolved, channel, settings.encoders))

    cache_root = Path(settings.cache_dir) if settings.cache_dir else None
    pipeline_digests = {
        enc: IrisTemplateExtractor(encoder=make_encoder(enc)).pipeline_digest
        for enc in settings.encoders
    }

    results: dict[tuple[str, str | None], dict[str, IrisCode]] = {}
    failures: list[FailureRecord] = []
    pending: list[tuple[str, str | None, tuple[str, ...]]] = []
    cache_keys: dict[tuple[str, str | None, str], Path] = {}

    for path, channel, encoder_ids in tasks:
        if cache_root is None:
            pending.append((path, channel, encoder_ids))
            continue
        digest = _file_digest(Path(path))
        hit: dict[str, IrisCode] = {}
        for enc in encoder_ids:
            key = _template_key(digest, channel, pipeline_digests[enc])
            cache_file = cache_root / f"{key}.ixc"
            cache_keys[(path, channel, enc)] = cache_file
            if cache_file.exists():
                hit[enc] = code_from_bytes(cache_file.read_bytes())
        if len(hit) == len(encoder_ids):
            results[(path, channel)] = hit
        else:
            pending.append((path, channel, encoder_ids))

    if pending:
        logger.info("building %d templates (%d workers)", len(pending), settings.workers)
        if settings.workers > 1:
            with ProcessPoolExecutor(max_workers=settings.workers) as pool:
                outputs = list(pool.map(_build_one, pending, chunksize=4))
        else:
            outputs = [_build_one(task) for task in pending]
        for (path, channel), blobs, errors in outputs:
            codes = {enc: code_from_bytes(blob) for enc, blob in blobs.items()}
            if codes:
                results[(path, channel)] = codes
            for stage, message in errors:
                failures.append(
                    FailureRecord(
                        path=path,
                        channel=channel or "NIR",
                        stage=stage,
                        error=message,
                    )
                )
            if cache_root is not None:
                cache_root.mkdir(parents=True, exist_ok=True)
                for enc, blob in blobs.items():
                    cache_keys[(path, channel, enc)].write_bytes(blob)
    return results, failures


def run_protocol(
    manifest: DatasetManifest, settings: RunSettings | None = None
) -> ProtocolResult:
    """Score all cross-spectral pairs for every (encoder, subset, channel) cell.

    Per-sample pipeline failures never abort the run; the affected pairs are
    excluded and counted in ``ScoreSet.failed_pairs`` with details in the
    failure ledger. Given the same manifest and settings the result is
    byte-for-byte reproducible regardless of worker count.
    """
    settings = settings or RunSettings()
    templates, failures = _gather_templates(manifest, settings)
    matcher = HammingMatcher(
        max_shift=settings.max_shift, min_valid_bits=settings.min_valid_bits
    )

    score_sets: list[ScoreSet] = []
    for encoder_id in settings.encoders:
        for subset in settings.subsets:
            gallery_meta = manifest.in_subset(subset, "NIR")
            probe_meta = manifest.in_subset(subset, "VIS")
            gallery_all = [
                (m, templates.get((str(manifest.resolve(m)), None), {}).get(encoder_id))
                for m in gallery_meta
            ]
            gallery = [(m, c) for m, c in gallery_all if c is not None]
            for channel in settings.channels:
                probe_all = [
                    (
                        m,
                        templates.get(
                            (str(manifest.resolve(m)), channel), {}
                        ).get(encoder_id),
                    )
                    for m in probe_meta
                ]
                probes = [(m, c) for m, c in probe_all if c is not None]
                total_pairs = len(gallery_meta) * len(probe_meta)
                failed = total_pairs - len(gallery) * len(probes)

                scores = matcher.pairwise(
                    [c for _, c in gallery], [c for _, c in probes]
                )
                genuine: list[float] = []
                impostor: list[float] = []
                for gi, (gm, _) in enumerate(gallery):
                    for pj, (pm, _) in enumerate(probes):
                        value = scores[gi, pj]
                        if np.isnan(value):
                            failed += 1
                            continue
                        if gm.iris_id == pm.iris_id:
                            genuine.append(float(value))
                        else:
                            impostor.append(float(value))
                score_sets.append(
                    ScoreSet(
                        encoder_id=encoder_id,
                        eye_color=subset,
                        channel=channel,
                        genuine=sorted(genuine),
                        impostor=sorted(impostor),
                        failed_pairs=failed,
                    )
                )
                logger.info(
                    "cell %s/%s/%s: %d genuine, %d impostor, %d failed",
                    encoder_id, subset, channel, len(genuine), len(impostor), failed,
                )
    return ProtocolResult(score_sets=score_sets, failures=sorted(
        failures, key=lambda f: (f.path, f.channel, f.stage)
    ))


# --- ROC / EER ---------------------------------------------------------------


@dataclass(frozen=True)
class RocCurve:
    """Operating points (threshold, FAR, FRR) plus the interpolated EER.

    Dissimilarity convention: a comparison is accepted when score <= threshold,
    so FAR grows and FRR shrinks as the threshold rises.
    """

    points: tuple[tuple[float, float, float], ...]
    eer: float
    eer_threshold: float


def compute_roc(scores: ScoreSet) -> RocCurve:
    """ROC over the union of observed scores; EER by linear interpolation.

    FAR(t) is the impostor fraction at or below t, FRR(t) the genuine fraction
    above t. The EER is read off the FAR = FRR crossing of the piecewise-linear
    curve through the operating points (with a virtual (FAR, FRR) = (0, 1)
    point below the smallest threshold).
    """
    genuine = np.asarray(scores.genuine, dtype=np.float64)
    impostor = np.asarray(scores.impostor, dtype=np.float64)
    if genuine.size == 0 or impostor.size == 0:
        raise EmptyScoreList(
            f"cell {scores.cell_name}: both score lists must be nonempty"
        )
    thresholds = np.unique(np.concatenate([genuine, impostor]))
    g_sorted = np.sort(genuine)
    i_sorted = np.sort(impostor)
    far = np.searchsorted(i_sorted, thresholds, side="right") / impostor.size
    frr = 1.0 - np.searchsorted(g_sorted, thresholds, side="right") / genuine.size

    # Virtual starting point below every observed score: accept nothing.
    far_ext = np.concatenate([[0.0], far])
    frr_ext = np.concatenate([[1.0], frr])
    thr_ext = np.concatenate([[thresholds[0]], thresholds])

    diff = far_ext - frr_ext
    k = int(np.argmax(diff >= 0.0))  # first index with FAR >= FRR; exists
    if diff[k] == 0.0:
        eer = float(far_ext[k])
        eer_thr = float(thr_ext[k])
    else:
        d0, d1 = diff[k - 1], diff[k]
        s = float(-d0 / (d1 - d0))
        eer = float(far_ext[k - 1] + s * (far_ext[k] - far_ext[k - 1]))
        eer_thr = float(thr_ext[k - 1] + s * (thr_ext[k] - thr_ext[k - 1]))
    points = tuple(
        (float(t), float(a), float(r)) for t, a, r in zip(thresholds, far, frr)
    )
    return RocCurve(points=points, eer=eer, eer_threshold=eer_thr)


# --- report emission ----------------------------------------------------------

_HIST_BINS = 50


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def emit_report(
    results: list[tuple[ScoreSet, RocCurve | None]],
    out_dir: str | os.PathLike,
) -> list[Path]:
    """Write per-cell ROC CSVs, a summary table, and score histograms.

    Output is byte-stable for identical inputs: fixed float formatting, LF
    newlines, and deterministic row order. Returns the written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    summary_lines = ["cell,eer,genuine_n,impostor_n,failures"]
    hist_lines = ["cell,kind,bin_lo,bin_hi,count"]
    edges = np.linspace(0.0, 1.0, _HIST_BINS + 1)

    for score_set, curve in results:
        name = score_set.cell_name
        if curve is not None:
            roc_path = out / (
                f"roc_{score_set.encoder_id}_{score_set.eye_color}_"
                f"{score_set.channel}.csv"
            )
            lines = ["threshold,far,frr"]
            lines += [
                f"{_fmt(t)},{_fmt(a)},{_fmt(r)}" for t, a, r in curve.points
            ]
            roc_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(roc_path)
        eer_text = _fmt(curve.eer) if curve is not None else ""
        summary_lines.append(
            f"{name},{eer_text},{len(score_set.genuine)},"
            f"{len(score_set.impostor)},{score_set.failed_pairs}"
        )
        for kind, values in (("genuine", score_set.genuine),
                             ("impostor", score_set.impostor)):
            counts, _ = np.histogram(values, bins=edges)
            hist_lines += [
                f"{name},{kind},{_fmt(edges[b])},{_fmt(edges[b + 1])},{counts[b]}"
                for b in range(_HIST_BINS)
            ]

    summary = out / "summary.csv"
    summary.write_text("\n".join(summary_lines) + "\n", encoding="utf-8")
    written.append(summary)
    hist = out / "score_histograms.csv"
    hist.write_text("\n".join(hist_lines) + "\n", encoding="utf-8")
    written.append(hist)
    return written
