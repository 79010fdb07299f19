"""Gradually shifting domain sequences.

Each :class:`Domain` holds a training split (labelled only for the source
domain) and a labelled evaluation split that is used for metrics only.
"""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, ShapeError, TruncatedFileError, UsageError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Domain:
    index: int
    x: np.ndarray
    y: np.ndarray | None
    shift: float
    eval_x: np.ndarray
    eval_y: np.ndarray

    def __post_init__(self):
        if self.x.ndim != 2 or len(self.x) == 0:
            raise UsageError(f"domain {self.index}: training split must be a non-empty 2-D array")
        if self.eval_x.ndim != 2 or self.eval_x.shape[1] != self.x.shape[1]:
            raise ShapeError(f"domain {self.index}: eval features do not match training dim")
        if len(self.eval_x) != len(self.eval_y):
            raise ShapeError(f"domain {self.index}: eval labels/features length mismatch")
        if self.y is not None and len(self.y) != len(self.x):
            raise ShapeError(f"domain {self.index}: labels/features length mismatch")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.eval_x))):
            raise UsageError(f"domain {self.index}: non-finite features")

    def __len__(self):
        return len(self.x)

    @property
    def labeled(self) -> bool:
        return self.y is not None


@dataclass(frozen=True)
class DomainSequence:
    domains: tuple[Domain, ...]
    k: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "domains", tuple(self.domains))
        if len(self.domains) < 2:
            raise ConfigError("a domain sequence needs a source and at least one more domain")
        d = self.domains[0].x.shape[1]
        for t, dom in enumerate(self.domains):
            if dom.index != t:
                raise UsageError(f"domain at position {t} has index {dom.index}")
            if dom.x.shape[1] != d:
                raise ShapeError(f"domain {t} has feature dim {dom.x.shape[1]}, expected {d}")
            if (t == 0) != dom.labeled:
                raise UsageError(
                    "only the source domain may carry training labels"
                    if t else "the source domain must be labelled"
                )

    @property
    def d(self) -> int:
        return self.domains[0].x.shape[1]

    @property
    def n(self) -> int:
        return len(self.domains) - 1

    @property
    def shifts(self) -> list[float]:
        return [dom.shift for dom in self.domains]

    def __getitem__(self, t) -> Domain:
        return self.domains[t]

    def __len__(self):
        return len(self.domains)

    def endpoints(self) -> "DomainSequence":
        """The two-domain (source, target) sequence."""
        src, tgt = self.domains[0], self.domains[-1]
        return DomainSequence(
            (src, Domain(1, tgt.x, None, tgt.shift, tgt.eval_x, tgt.eval_y)), self.k, dict(self.meta)
        )


def shift_values(start, end, n_domains) -> list[float]:
    if n_domains == 1:
        return [float(start)]
    return [start + t * (end - start) / (n_domains - 1) for t in range(n_domains)]


def _domain_rng(seed, t):
    # keyed on (seed, t): adding domains never perturbs earlier draws
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, t])


def _check_counts(n_domains, samples_per_domain, minimum=20):
    if n_domains < 2:
        raise ConfigError(f"n_domains must be >= 2, got {n_domains}")
    if samples_per_domain < minimum:
        raise ConfigError(f"samples_per_domain must be >= {minimum}, got {samples_per_domain}")


def two_moons(n, noise_sd, rng):
    """Balanced two-moons sample centred on the origin; labels 0/1."""
    n0 = n // 2
    labels = np.r_[np.zeros(n0, dtype=np.int64), np.ones(n - n0, dtype=np.int64)]
    rng.shuffle(labels)
    theta = rng.uniform(0.0, np.pi, n)
    upper = np.c_[np.cos(theta), np.sin(theta)]
    lower = np.c_[1.0 - np.cos(theta), 0.5 - np.sin(theta)]
    x = np.where(labels[:, None] == 0, upper, lower)
    x = x - np.array([0.5, 0.25])
    if noise_sd:
        x = x + rng.normal(0.0, noise_sd, x.shape)
    return x, labels


def rotate_points(x, angle_deg):
    a = np.deg2rad(angle_deg)
    c, s = np.cos(a), np.sin(a)
    return x @ np.array([[c, s], [-s, c]])


def gen_rotating_moons(
    n_domains, angle_start, angle_end, samples_per_domain=500, noise_sd=0.1, seed=0,
    eval_per_domain=None,
) -> DomainSequence:
    _check_counts(n_domains, samples_per_domain)
    if noise_sd < 0:
        raise ConfigError("noise_sd must be >= 0")
    n_eval = samples_per_domain if eval_per_domain is None else eval_per_domain
    domains = []
    for t, angle in enumerate(shift_values(angle_start, angle_end, n_domains)):
        rng = _domain_rng(seed, t)
        x, y = two_moons(samples_per_domain, noise_sd, rng)
        ex, ey = two_moons(n_eval, noise_sd, rng)
        domains.append(
            Domain(t, rotate_points(x, angle), y if t == 0 else None, angle,
                   rotate_points(ex, angle), ey)
        )
    meta = dict(generator="moons", n_domains=n_domains, angle_start=angle_start,
                angle_end=angle_end, samples_per_domain=samples_per_domain,
                noise_sd=noise_sd, seed=seed)
    return DomainSequence(domains, 2, meta)


def gaussian_blobs(n, k, d, spread, rng):
    centers = np.stack(
        [np.r_[np.cos(2 * np.pi * c / k), np.sin(2 * np.pi * c / k), np.zeros(d - 2)] for c in range(k)]
    )
    labels = np.arange(n) % k
    rng.shuffle(labels)
    return centers[labels] + rng.normal(0.0, spread, (n, d)), labels


def gen_intensity_shift(
    n_domains, offset_start, offset_end, samples_per_domain=500, seed=0, k=3, d=2,
    spread=0.35, eval_per_domain=None,
) -> DomainSequence:
    """Gaussian blobs translated by a per-domain offset added to every feature."""
    _check_counts(n_domains, samples_per_domain)
    if d < 2 or k < 2:
        raise ConfigError("intensity shift needs d >= 2 and k >= 2")
    n_eval = samples_per_domain if eval_per_domain is None else eval_per_domain
    domains = []
    for t, off in enumerate(shift_values(offset_start, offset_end, n_domains)):
        rng = _domain_rng(seed, t)
        x, y = gaussian_blobs(samples_per_domain, k, d, spread, rng)
        ex, ey = gaussian_blobs(n_eval, k, d, spread, rng)
        domains.append(Domain(t, x + off, y if t == 0 else None, off, ex + off, ey))
    meta = dict(generator="intensity", n_domains=n_domains, offset_start=offset_start,
                offset_end=offset_end, samples_per_domain=samples_per_domain, seed=seed,
                k=k, d=d, spread=spread)
    return DomainSequence(domains, k, meta)


# -- IDX ----------------------------------------------------------------------

def _read_exact(f, n, what):
    offset = f.tell()
    data = f.read(n)
    if len(data) != n:
        raise TruncatedFileError(f"truncated IDX file while reading {what}", offset + len(data))
    return data


def _read_idx(path, magic, ndims):
    with open(path, "rb") as f:
        got = struct.unpack(">I", _read_exact(f, 4, "magic"))[0]
        if got != magic:
            raise FormatError(f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}")
        dims = struct.unpack(f">{ndims}I", _read_exact(f, 4 * ndims, "dimensions"))
        count = int(np.prod(dims))
        body = _read_exact(f, count, "payload")
    return np.frombuffer(body, dtype=np.uint8).reshape(dims)


def load_idx_images(images_path, labels_path):
    """Read an IDX image/label pair; pixels scaled to [0, 1] and flattened."""
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if len(images) != len(labels):
        raise FormatError(f"{len(images)} images but {len(labels)} labels")
    flat = images.reshape(len(images), -1).astype(np.float64) / 255.0
    return flat, labels.astype(np.int64)


def read_idx_header(path):
    """(magic, dims) from an IDX file without reading the payload."""
    with open(path, "rb") as f:
        magic = struct.unpack(">I", _read_exact(f, 4, "magic"))[0]
        ndims = magic & 0xFF
        dims = struct.unpack(f">{ndims}I", _read_exact(f, 4 * ndims, "dimensions"))
    return magic, dims


def write_idx_images(path, images):
    images = np.asarray(images, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">I3I", IDX_IMAGES_MAGIC, *images.shape))
        f.write(images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        f.write(labels.tobytes())


# -- image rotation -------------------------------------------------------------

def rotate_flat_images(images, side, angle):
    """Rotate flattened square images about their centre with bilinear sampling.

    Pixels that map outside the source image read as zero.
    """
    imgs = np.asarray(images, dtype=np.float64)
    if imgs.ndim != 2 or imgs.shape[1] != side * side:
        raise ShapeError(f"expected {side * side} columns for side {side}, got shape {imgs.shape}")
    if angle % 360 == 0:
        return imgs.copy()
    a = np.deg2rad(angle)
    c, s = np.cos(a), np.sin(a)
    centre = (side - 1) / 2.0
    rr, cc = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    dy, dx = rr - centre, cc - centre
    # inverse map: for every output pixel find where it came from
    src_r = centre + c * dy - s * dx
    src_c = centre + s * dy + c * dx
    for coords in (src_r, src_c):
        near = np.rint(coords)
        snap = np.abs(coords - near) < 1e-9
        coords[snap] = near[snap]
    r0 = np.floor(src_r).astype(int)
    c0 = np.floor(src_c).astype(int)
    fr = (src_r - r0).ravel()
    fc = (src_c - c0).ravel()
    r0, c0 = r0.ravel(), c0.ravel()
    stack = imgs.reshape(-1, side, side)
    padded = np.zeros((len(stack), side + 2, side + 2))
    padded[:, 1:-1, 1:-1] = stack

    def tap(r, col):
        inside = (r >= -1) & (r <= side) & (col >= -1) & (col <= side)
        rr_ = np.clip(r, -1, side) + 1
        cc_ = np.clip(col, -1, side) + 1
        return padded[:, rr_, cc_] * inside

    out = (
        tap(r0, c0) * ((1 - fr) * (1 - fc))
        + tap(r0, c0 + 1) * ((1 - fr) * fc)
        + tap(r0 + 1, c0) * (fr * (1 - fc))
        + tap(r0 + 1, c0 + 1) * (fr * fc)
    )
    return out.reshape(len(imgs), side * side)


def make_rotated_sequence(
    images, labels, n_domains, angle_start, angle_end, per_domain, seed=0, side=None,
    eval_fraction=0.2,
) -> DomainSequence:
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if n_domains < 2 or per_domain < 2:
        raise ConfigError("need n_domains >= 2 and per_domain >= 2")
    if per_domain * n_domains > len(images):
        raise ConfigError(
            f"{n_domains} domains x {per_domain} samples exceeds the {len(images)} base images"
        )
    side = side or int(round(np.sqrt(images.shape[1])))
    n_eval = max(1, int(round(per_domain * eval_fraction)))
    if n_eval >= per_domain:
        raise ConfigError("eval_fraction leaves no training samples")
    order = np.random.default_rng(seed).permutation(len(images))
    k = int(labels.max()) + 1
    domains = []
    for t, angle in enumerate(shift_values(angle_start, angle_end, n_domains)):
        idx = order[t * per_domain:(t + 1) * per_domain]
        rotated = rotate_flat_images(images[idx], side, angle)
        tr, ev = slice(n_eval, None), slice(0, n_eval)
        domains.append(
            Domain(t, rotated[tr], labels[idx][tr] if t == 0 else None, angle,
                   rotated[ev], labels[idx][ev])
        )
    meta = dict(generator="idx", n_domains=n_domains, angle_start=angle_start,
                angle_end=angle_end, per_domain=per_domain, seed=seed)
    return DomainSequence(domains, max(k, 2), meta)


# -- batching ---------------------------------------------------------------------

@dataclass(frozen=True)
class BatchPlan:
    batch_size: int
    batches: tuple[np.ndarray, ...]
    seed: int

    def __len__(self):
        return len(self.batches)


def partition_batches(domain, batch_size, seed) -> BatchPlan:
    """Seeded shuffle of the domain's indices chunked into batches; the last may be short."""
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    n = domain if isinstance(domain, (int, np.integer)) else len(domain)
    if n == 0:
        raise UsageError("cannot partition an empty domain")
    perm = np.random.default_rng(seed).permutation(n)
    batches = tuple(perm[i:i + batch_size] for i in range(0, n, batch_size))
    return BatchPlan(batch_size, batches, seed)


# -- CSV export -------------------------------------------------------------------

def _write_split(path, x, y):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"f{j}" for j in range(x.shape[1])] + (["label"] if y is not None else []))
        for i, row in enumerate(x):
            w.writerow([repr(float(v)) for v in row] + ([int(y[i])] if y is not None else []))


def _read_split(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    has_label = header[-1] == "label"
    d = len(header) - has_label
    x = np.array([[float(v) for v in r[:d]] for r in body], dtype=np.float64).reshape(len(body), d)
    y = np.array([int(r[d]) for r in body], dtype=np.int64) if has_label else None
    return x, y


def export_sequence(seq: DomainSequence, directory) -> Path:
    """Write ``domain_<t>.csv`` / ``domain_<t>_eval.csv`` per domain plus ``manifest.json``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for dom in seq.domains:
        _write_split(out / f"domain_{dom.index}.csv", dom.x, dom.y)
        _write_split(out / f"domain_{dom.index}_eval.csv", dom.eval_x, dom.eval_y)
    manifest = dict(d=seq.d, k=seq.k, n=seq.n, shifts=seq.shifts,
                    seed=seq.meta.get("seed"), meta=seq.meta)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out


def load_sequence(directory) -> DomainSequence:
    src = Path(directory)
    manifest = json.loads((src / "manifest.json").read_text())
    domains = []
    for t in range(manifest["n"] + 1):
        x, y = _read_split(src / f"domain_{t}.csv")
        ex, ey = _read_split(src / f"domain_{t}_eval.csv")
        domains.append(Domain(t, x, y, manifest["shifts"][t], ex, ey))
    return DomainSequence(domains, manifest["k"], manifest.get("meta", {}))


