"""End-to-end streaming run: seeds, codebook, windowed transfer, merge, finalize.

Sections are streamed from VOL1 files. At any time at most ``2W + 2``
sections of each stack kind (elevation, seeds, ground truth) are held in
memory, which ``Residency`` records. All outputs are written into a scratch
directory that is renamed into place only when the run succeeds.
"""
from __future__ import annotations

import json
import os
import shutil
import tempfile
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .agglomeration import (
    MergeConfig,
    Partition,
    component_table,
    merge_components,
    overlap_edges,
    resolve_orphans,
    write_edges,
)
from .costmodel import pipeline_calls
from .encoding import Codebook, DecodePolicy, build_codebook, min_digits
from .errors import ConfigError, InvariantViolation, PipelineError, ShapeMismatch
from .seeding import PieceSplitter, SeedAccumulator, SeedConfig, seed_section
from .synth import GenConfig, generate_stack
from .transfer import TransferContext, cross_classify, make_classifier
from .volume import Dims, VolReader, VolWriter, save_stack

REPORT_KEYS = ("n_seeds", "k", "l", "classifier_calls", "n_components", "wall_ms")


def _section_from_dict(cls, d: Any, where: str):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**d)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from None


@dataclass(frozen=True)
class CodebookParams:
    l: int = 4
    redundancy: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if not 2 <= self.l <= 255:
            raise ConfigError("codebook.l must lie in [2, 255]")
        if self.redundancy < 0:
            raise ConfigError("codebook.redundancy must be >= 0")
        if self.rng_seed < 0:
            raise ConfigError("codebook.rng_seed must be >= 0")

    def digits(self, n_labels: int) -> int:
        return min_digits(max(n_labels, 1), self.l) + self.redundancy


@dataclass(frozen=True)
class ClassifierParams:
    name: str = "oracle"
    params: dict = field(default_factory=dict)

    def build(self):
        return make_classifier(self.name, **dict(self.params))

    @classmethod
    def from_config(cls, v: Any) -> "ClassifierParams":
        """Accept ``"oracle"``, ``{"name": .., "eta": ..}`` or ``{"name": .., "params": {..}}``."""
        if v is None:
            return cls()
        if isinstance(v, str):
            return cls(v)
        if not isinstance(v, dict) or not isinstance(v.get("name", "oracle"), str):
            raise ConfigError("classifier: expected a name or an object with a 'name' key")
        flat = {key: val for key, val in v.items() if key not in ("name", "params")}
        nested = v.get("params") or {}
        if not isinstance(nested, dict):
            raise ConfigError("classifier.params: expected an object")
        both = set(flat) & set(nested)
        if both:
            raise ConfigError(f"classifier: {sorted(both)} given twice")
        return cls(v.get("name", "oracle"), {**nested, **flat})


@dataclass(frozen=True)
class PipelineConfig:
    output: Path
    elevation: Optional[Path] = None
    generate: Optional[GenConfig] = None
    seeds: Optional[Path] = None
    gt: Optional[Path] = None
    seeding: SeedConfig = SeedConfig()
    codebook: CodebookParams = CodebookParams()
    classifier: ClassifierParams = ClassifierParams()
    decode: DecodePolicy = DecodePolicy()
    merge: MergeConfig = MergeConfig()
    workers: int = 1
    overwrite: bool = False

    def __post_init__(self):
        if (self.elevation is None) == (self.generate is None):
            raise ConfigError("give exactly one of 'elevation' (a path) or 'generate' (a GenConfig)")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError("workers must be a positive integer")
        clf = self.classifier.build()
        if getattr(clf, "needs_gt", False) and self.gt is None and self.generate is None:
            raise ConfigError(f"classifier {self.classifier.name!r} needs ground truth; set 'gt'")

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "PipelineConfig":
        if not isinstance(d, dict):
            raise ConfigError("pipeline config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "output" not in d:
            raise ConfigError("missing required key 'output'")
        base = Path(base_dir) if base_dir is not None else Path.cwd()

        def path(key):
            v = d.get(key)
            if v is None:
                return None
            if not isinstance(v, str):
                raise ConfigError(f"{key}: expected a path string")
            return base / v

        gen = d.get("generate")
        if gen is not None:
            if not isinstance(gen, dict):
                raise ConfigError("generate: expected an object")
            gen = GenConfig.from_dict(gen)
        try:
            return cls(
                output=path("output"),
                elevation=path("elevation"),
                generate=gen,
                seeds=path("seeds"),
                gt=path("gt"),
                seeding=_section_from_dict(SeedConfig, d.get("seeding"), "seeding"),
                codebook=_section_from_dict(CodebookParams, d.get("codebook"), "codebook"),
                classifier=ClassifierParams.from_config(d.get("classifier")),
                decode=_section_from_dict(DecodePolicy, d.get("decode"), "decode"),
                merge=_section_from_dict(MergeConfig, d.get("merge"), "merge"),
                workers=d.get("workers", 1),
                overwrite=bool(d.get("overwrite", False)),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from None
        return cls.from_dict(d, base_dir=path.parent)


class Residency:
    """Thread-safe count of sections held in memory, per stack kind."""

    def __init__(self):
        self._lock = threading.Lock()
        self.current: Counter = Counter()
        self.peak: Counter = Counter()

    def acquire(self, kind: str, n: int = 1) -> None:
        with self._lock:
            self.current[kind] += n
            self.peak[kind] = max(self.peak[kind], self.current[kind])

    def release(self, kind: str, n: int = 1) -> None:
        with self._lock:
            self.current[kind] -= n
            if self.current[kind] < 0:
                raise InvariantViolation(f"released more {kind} sections than acquired")

    @property
    def peak_max(self) -> int:
        return max(self.peak.values(), default=0)


class _Window:
    """Sections [lo, hi] of one VOL1 file, loaded on demand and evicted from below."""

    def __init__(self, reader: VolReader, kind: str, residency: Residency, check=None):
        self.reader, self.kind, self.residency, self.check = reader, kind, residency, check
        self.sections: dict[int, np.ndarray] = {}

    def slide(self, lo: int, hi: int) -> None:
        for z in [z for z in self.sections if z < lo]:
            del self.sections[z]
            self.residency.release(self.kind)
        for z in range(lo, hi + 1):
            if z not in self.sections:
                self.residency.acquire(self.kind)
                sec = self.reader.read_section(z)
                if self.check:
                    self.check(z, sec)
                self.sections[z] = sec

    def clear(self) -> None:
        self.residency.release(self.kind, len(self.sections))
        self.sections.clear()

    def __getitem__(self, z: int) -> np.ndarray:
        return self.sections[z]


@dataclass
class RunReport:
    n_seeds: int
    k: int
    l: int
    classifier_calls: int
    n_components: int
    wall_ms: float
    expected_calls: int = 0
    peak_residency: dict = field(default_factory=dict)
    output: Optional[Path] = None

    def to_json(self) -> dict:
        return {key: getattr(self, key) for key in REPORT_KEYS}


class _CountingClassifier:
    def __init__(self, clf):
        self.clf = clf
        self.calls = 0
        self._lock = threading.Lock()

    def __call__(self, colored, ctx):
        with self._lock:
            self.calls += 1
        return self.clf(colored, ctx)


def _check_elevation(z: int, sec: np.ndarray) -> None:
    if not np.all(np.isfinite(sec)) or sec.min(initial=0.0) < 0.0 or sec.max(initial=0.0) > 1.0:
        raise InvariantViolation(f"elevation section {z} has values outside [0, 1]")


def _open(path: Path, what: str, dims: Dims | None = None, scalar: bool | None = None) -> VolReader:
    r = VolReader(path)
    try:
        if scalar is not None and r.is_scalar != scalar:
            kind = "a scalar (f32)" if scalar else "a label (u8/u16/u32)"
            raise InvariantViolation(f"{what} {path} must be {kind} stack")
        if dims is not None and r.dims != dims:
            raise ShapeMismatch(f"{what} dims {r.dims.shape} != elevation dims {dims.shape}")
    except BaseException:
        r.close()
        raise
    return r


class _Stage:
    """Context manager tagging any failure with the stage name."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError) and isinstance(exc, Exception):
            raise PipelineError(self.name, exc) from exc
        return False


def run_pipeline(cfg: PipelineConfig, residency: Residency | None = None) -> RunReport:
    t0 = time.perf_counter()
    residency = residency or Residency()
    out = Path(cfg.output)
    if out.exists() and not cfg.overwrite and (not out.is_dir() or any(out.iterdir())):
        raise PipelineError("output", FileExistsError(f"{out} exists and is not empty"))
    out.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        report = _run(cfg, scratch, residency)
        report.wall_ms = round((time.perf_counter() - t0) * 1000.0, 3)
        (scratch / "report.json").write_text(json.dumps(report.to_json(), indent=2) + "\n")
        _publish(scratch, out)
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    report.output = out
    report.peak_residency = dict(residency.peak)
    return report


def _publish(scratch: Path, out: Path) -> None:
    if out.exists():
        old = Path(tempfile.mkdtemp(prefix=f".{out.name}.old.", dir=out.parent))
        os.rename(out, old / "prev")
        os.rename(scratch, out)
        shutil.rmtree(old, ignore_errors=True)
    else:
        os.rename(scratch, out)


def _run(cfg: PipelineConfig, work: Path, residency: Residency) -> RunReport:
    W = cfg.merge.window
    budget = 2 * W + 2
    elev_path, gt_path = cfg.elevation, cfg.gt
    if cfg.generate is not None:
        with _Stage("generate"):
            gt_stack, elev_stack = generate_stack(cfg.generate)
            elev_path, gen_gt = work / "elev.vol", work / "gt.vol"
            save_stack(elev_stack, elev_path)
            save_stack(gt_stack, gen_gt)
            gt_path = gt_path or gen_gt
            del gt_stack, elev_stack

    with _Stage("config"):
        clf = _CountingClassifier(cfg.classifier.build())
        policy = cfg.decode
        elev_r = _open(elev_path, "elevation", scalar=True)
        dims = elev_r.dims
        gt_r = _open(gt_path, "ground truth", dims, scalar=False) if gt_path is not None else None
        pre_r = _open(cfg.seeds, "seeds", dims, scalar=False) if cfg.seeds is not None else None

    with ThreadPoolExecutor(cfg.workers) as pool:
        try:
            n_seeds, sizes, links = _seed_stage(cfg, elev_r, pre_r, work / "seeds.vol", pool, residency, budget)

            with _Stage("codebook"):
                k = cfg.codebook.digits(n_seeds)
                cb = build_codebook(n_seeds, cfg.codebook.l, k, cfg.codebook.rng_seed)
                policy.check(cb.k)
                cb.save(work / "codebook.txt")

            edges = _transfer_stage(cfg, cb, clf, policy, elev_r, gt_r, work, pool, residency)
        finally:
            for r in (elev_r, gt_r, pre_r):
                if r is not None:
                    r.close()

    with _Stage("merge"):
        partition = Partition(sizes)
        for a, b in links:
            partition.union(a, b)
        partition = merge_components(edges, cfg.merge.threshold, sizes, partition)
        partition = resolve_orphans(partition, edges, cfg.merge.min_component_size)
        table = component_table(partition)

    with _Stage("finalize"):
        present = np.zeros(int(table.max(initial=0)) + 1, dtype=bool)
        with VolReader(work / "seeds.vol") as sr, VolWriter(work / "segmentation.vol", dims, np.uint32) as sw:
            for z in range(dims.z):
                residency.acquire("seeds")
                seg = table[sr.read_section(z).astype(np.int64)]
                present[seg.ravel()] = True
                sw.write_section(z, seg)
                residency.release("seeds")
        n_components = int(present[1:].sum())

    expected = pipeline_calls(dims.z, W, k)
    if clf.calls != expected:
        raise PipelineError("transfer", InvariantViolation(f"made {clf.calls} classifier calls, expected {expected}"))
    return RunReport(n_seeds, k, cb.l, clf.calls, n_components, 0.0, expected)


def _seed_stage(cfg, elev_r, pre_r, seeds_path, pool, residency, budget):
    dims = elev_r.dims
    with _Stage("seeding"), VolWriter(seeds_path, dims, np.uint32) as sw:
        if pre_r is not None:
            splitter = PieceSplitter()
            for z in range(dims.z):
                residency.acquire("seeds")
                sw.write_section(z, splitter.add(z, pre_r.read_section(z)))
                residency.release("seeds")
            section_of, sizes = splitter.acc.arrays()
            return len(section_of) - 1, sizes, splitter.links

        acc = SeedAccumulator()
        chunk = max(1, min(cfg.workers, budget))
        for lo in range(0, dims.z, chunk):
            zs = range(lo, min(lo + chunk, dims.z))
            residency.acquire("elevation", len(zs))
            secs = []
            for z in zs:
                sec = elev_r.read_section(z)
                _check_elevation(z, sec)
                secs.append(sec)
            seeded = list(pool.map(lambda s: seed_section(s, cfg.seeding), secs))
            residency.release("elevation", len(zs))
            residency.acquire("seeds", len(zs))
            for z, s in zip(zs, seeded):
                sw.write_section(z, acc.add(z, s))
            residency.release("seeds", len(zs))
        section_of, sizes = acc.arrays()
        return len(section_of) - 1, sizes, []


def _transfer_stage(cfg, cb: Codebook, clf, policy, elev_r, gt_r, work, pool, residency):
    W = cfg.merge.window
    nz = elev_r.dims.z
    needs_gt = getattr(clf.clf, "needs_gt", False)
    needs_elev = getattr(clf.clf, "needs_elevation", False)
    edges = []
    with _Stage("transfer"), VolReader(work / "seeds.vol") as sr, open(work / "edges.tsv", "w") as ef:
        seeds = _Window(sr, "seeds", residency)
        gt = _Window(gt_r, "gt", residency) if needs_gt else None
        elev = _Window(elev_r, "elevation", residency, _check_elevation) if needs_elev else None
        windows = [w for w in (seeds, gt, elev) if w is not None]

        def task(pair):
            src, tgt = pair
            ctx = TransferContext(
                src,
                tgt,
                elev_target=elev[tgt] if elev else None,
                gt_source=gt[src] if gt else None,
                gt_target=gt[tgt] if gt else None,
                window=W,
            )
            pred = cross_classify(seeds[src], ctx, cb, clf, policy)
            return overlap_edges(pred, seeds[tgt], src, tgt)

        try:
            for z in range(nz):
                lo, hi = max(0, z - W), min(nz - 1, z + W)
                for w in windows:
                    w.slide(lo, hi)
                pairs = [(z, t) for t in range(lo, hi + 1) if t != z]
                for found in pool.map(task, pairs):
                    write_edges(found, ef)
                    edges.extend(found)
        finally:
            for w in windows:
                w.clear()
    return edges


def load_report(out_dir) -> dict:
    return json.loads((Path(out_dir) / "report.json").read_text())


__all__ = [
    "CodebookParams",
    "ClassifierParams",
    "PipelineConfig",
    "Residency",
    "RunReport",
    "run_pipeline",
    "load_report",
]
