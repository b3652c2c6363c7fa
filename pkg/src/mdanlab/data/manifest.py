from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from mdanlab.data.domains import LabeledDomain, UnlabeledDomain
from mdanlab.data.loaders import load_domain_file
from mdanlab.errors import ConfigError

logger = logging.getLogger(__name__)

ROLES = ("source", "target")
FORMATS = ("dense_csv", "sparse_sv")


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    role: str
    format: str
    labeled: bool


@dataclass(frozen=True)
class DomainManifest:
    entries: tuple[ManifestEntry, ...]
    dim: int

    def __post_init__(self) -> None:
        targets = [e for e in self.entries if e.role == "target"]
        sources = [e for e in self.entries if e.role == "source"]
        if len(targets) != 1:
            raise ConfigError(f"manifest needs exactly one target entry, got {len(targets)}")
        if not sources:
            raise ConfigError("manifest needs at least one source entry")
        for e in sources:
            if not e.labeled:
                raise ConfigError(f"source entry {e.path} must be labeled")

    @property
    def sources(self) -> list[ManifestEntry]:
        return [e for e in self.entries if e.role == "source"]

    @property
    def target(self) -> ManifestEntry:
        return next(e for e in self.entries if e.role == "target")

    def check_files(self) -> None:
        missing = [str(e.path) for e in self.entries if not e.path.is_file()]
        if missing:
            raise ConfigError(f"manifest files not found: {missing}")


def load_manifest(path: str | Path) -> DomainManifest:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"manifest not found: {path}")
    raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ConfigError("manifest must be a mapping")
    try:
        dim = int(raw["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("manifest needs an integer 'dim'") from exc

    base_dir = path.parent
    entries: list[ManifestEntry] = []
    for item in raw.get("domains") or []:
        if not isinstance(item, dict):
            raise ConfigError("manifest domains must be a list of mappings")
        role = str(item.get("role", "source"))
        fmt = str(item.get("format", "dense_csv"))
        if role not in ROLES:
            raise ConfigError(f"unknown role {role!r}")
        if fmt not in FORMATS:
            raise ConfigError(f"unknown format {fmt!r}")
        p = Path(item["path"])
        if not p.is_absolute():
            p = (base_dir / p).resolve()
        entries.append(ManifestEntry(path=p, role=role, format=fmt, labeled=bool(item.get("labeled", role == "source"))))
    return DomainManifest(entries=tuple(entries), dim=dim)


def write_manifest(path: str | Path, manifest: DomainManifest) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload: dict[str, Any] = {
        "dim": manifest.dim,
        "domains": [
            {
                "path": str(e.path.relative_to(path.parent)) if e.path.is_relative_to(path.parent) else str(e.path),
                "role": e.role,
                "format": e.format,
                "labeled": e.labeled,
            }
            for e in manifest.entries
        ],
    }
    path.write_text(yaml.safe_dump(payload, sort_keys=False, allow_unicode=True), encoding="utf-8")


def load_manifest_domains(manifest: DomainManifest) -> tuple[list[LabeledDomain], UnlabeledDomain]:
    """读取全部域；目标域一律以 UnlabeledDomain 返回，标签（若有）仅经 oracle() 可见。"""
    manifest.check_files()
    sources: list[LabeledDomain] = []
    for i, entry in enumerate(manifest.sources):
        dom = load_domain_file(entry.path, fmt=entry.format, dim=manifest.dim, domain_id=f"source{i}")
        if not isinstance(dom, LabeledDomain):
            raise ConfigError(f"source file {entry.path} has no labels")
        if dom.dim != manifest.dim:
            raise ConfigError(f"{entry.path}: dim {dom.dim} != manifest dim {manifest.dim}")
        sources.append(dom)
    t = manifest.target
    dom = load_domain_file(t.path, fmt=t.format, dim=manifest.dim, domain_id="target")
    if dom.dim != manifest.dim:
        raise ConfigError(f"{t.path}: dim {dom.dim} != manifest dim {manifest.dim}")
    target = dom.unlabeled() if isinstance(dom, LabeledDomain) else dom
    logger.info("manifest_loaded sources=%d target_n=%d dim=%d oracle=%s", len(sources), target.n, manifest.dim, target.has_oracle)
    return sources, target
