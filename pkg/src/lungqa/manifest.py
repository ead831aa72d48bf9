"""Dataset manifests and run configuration."""
from __future__ import annotations

import csv
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

__all__ = [
    "ManifestEntry",
    "ManifestError",
    "read_manifest",
    "write_manifest",
    "QaConfig",
    "load_config",
    "CLASS_ALIASES",
]

# pneumonia and COVID-19 are merged into "abnormal"
CLASS_ALIASES = {
    "normal": "normal",
    "abnormal": "abnormal",
    "pneumonia": "abnormal",
    "covid-19": "abnormal",
    "covid19": "abnormal",
    "covid": "abnormal",
}


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    class_label: str
    image_path: str
    mask_path: str
    truth_mask_path: Optional[str] = None


def _resolve(base, p):
    p = p.strip()
    if not p:
        return p
    return p if os.path.isabs(p) else os.path.normpath(os.path.join(base, p))


def read_manifest(path) -> list:
    """Read a manifest CSV.

    Required columns are ``image_id, class_label, image_path, mask_path``;
    ``truth_mask_path`` is optional. Relative paths are resolved against
    the manifest's directory. Class labels are case-insensitive and
    ``pneumonia``/``covid-19`` map to ``abnormal``.
    """
    path = os.fspath(path)
    base = os.path.dirname(os.path.abspath(path))
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ManifestError(f"{path}: {exc.strerror or exc}") from exc
    entries, seen = [], set()
    with fh:
        reader = csv.DictReader(fh)
        cols = {c.strip().lower() for c in reader.fieldnames or []}
        missing = {"image_id", "class_label", "image_path", "mask_path"} - cols
        if missing:
            raise ManifestError(f"{path}: missing column(s) {sorted(missing)}")
        for lineno, rec in enumerate(reader, start=2):
            rec = {k.strip().lower(): (v or "").strip() for k, v in rec.items() if k is not None}
            image_id = rec["image_id"]
            if not image_id:
                raise ManifestError(f"{path}:{lineno}: empty image_id")
            if image_id in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
            seen.add(image_id)
            label = CLASS_ALIASES.get(rec["class_label"].lower())
            if label is None:
                raise ManifestError(f"{path}:{lineno}: unknown class label {rec['class_label']!r}")
            if not rec["image_path"] or not rec["mask_path"]:
                raise ManifestError(f"{path}:{lineno}: empty image_path or mask_path")
            truth = rec.get("truth_mask_path") or None
            entries.append(ManifestEntry(
                image_id, label,
                _resolve(base, rec["image_path"]),
                _resolve(base, rec["mask_path"]),
                _resolve(base, truth) if truth else None,
            ))
    return entries


def write_manifest(entries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image_id", "class_label", "image_path", "mask_path", "truth_mask_path"])
        for e in entries:
            w.writerow([e.image_id, e.class_label, e.image_path, e.mask_path, e.truth_mask_path or ""])


@dataclass(frozen=True)
class QaConfig:
    """Every tunable of the QA, crop and prep commands, with its default."""

    threshold: int = 128
    connectivity: str = "eight"
    min_area: int = 0
    support_fraction: Optional[float] = None
    cutoff_p: float = 0.975
    tau: float = 0.0
    margin: float = 0.0
    seed: int = 0
    starts: int = 500
    normalize_cbb: bool = False
    side: int = 224
    workers: int = 1

    def __post_init__(self):
        if not 0 <= self.threshold <= 255:
            raise ValueError("threshold must be in 0..255")
        if self.connectivity not in ("four", "eight"):
            raise ValueError("connectivity must be 'four' or 'eight'")
        if not 0 < self.cutoff_p < 1:
            raise ValueError("cutoff_p must lie in (0, 1)")
        if self.support_fraction is not None and not 0 < self.support_fraction <= 1:
            raise ValueError("support_fraction must lie in (0, 1]")
        if self.tau < 0 or self.margin < 0 or self.min_area < 0:
            raise ValueError("tau, margin and min_area must be non-negative")
        if self.starts < 1 or self.workers < 1 or self.side < 1:
            raise ValueError("starts, workers and side must be >= 1")

    def updated(self, **overrides) -> "QaConfig":
        """Copy with the non-``None`` overrides applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def as_dict(self):
        return asdict(self)


def _coerce(name, raw):
    kind = {f.name: f.type for f in fields(QaConfig)}[name]
    raw = raw.strip()
    if "bool" in kind:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if "Optional[float]" in kind:
        return None if raw.lower() in ("", "none", "default") else float(raw)
    if "int" in kind:
        return int(raw)
    if "float" in kind:
        return float(raw)
    return raw


def load_config(path, base: Optional[QaConfig] = None) -> QaConfig:
    """Read ``key = value`` lines (``#`` comments) over ``base``.

    Keys are the :class:`QaConfig` field names; dashes are accepted in
    place of underscores, so CLI flag spellings work too.
    """
    names = {f.name for f in fields(QaConfig)}
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = line.split("=", 1)
            key = key.strip().lstrip("-").replace("-", "_")
            if key not in names:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _coerce(key, raw)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return replace(base or QaConfig(), **values)
