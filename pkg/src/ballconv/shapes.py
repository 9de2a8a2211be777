"""Mesh and point-cloud ingestion, ball normalization, and synthetic shapes."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .coords import cart_to_sph, random_rotation
from .layout import get_layout
from .moments import MomentVector, SampleSet, reconstruct
from .quadrature import uniform_ball_samples


class MeshParseError(ValueError):
    pass


@dataclass
class TriangleMesh:
    vertices: np.ndarray  # (V, 3)
    faces: np.ndarray     # (F, 3) int

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=int).reshape(-1, 3)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise MeshParseError("face index out of range")

    def face_areas(self) -> np.ndarray:
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def drop_degenerate(self, eps: float = 0.0) -> "TriangleMesh":
        areas = self.face_areas()
        return TriangleMesh(self.vertices, self.faces[areas > eps])


@dataclass
class NormalizationRecord:
    centroid: np.ndarray
    scale: float

    def invert(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) * self.scale + self.centroid


def _triangulate(poly: list[int]) -> list[tuple[int, int, int]]:
    return [(poly[0], poly[i], poly[i + 1]) for i in range(1, len(poly) - 1)]


def load_off(path) -> TriangleMesh:
    """Parse an OFF mesh.

    Accepts both the header-on-its-own-line form and the variant where the
    counts are glued to the header token (as found in some ModelNet files,
    e.g. ``OFF4 4 0``).
    """
    with open(path) as fh:
        lines = fh.readlines()

    def err(lineno, msg):
        raise MeshParseError(f"{path}:{lineno}: {msg}")

    tokens: list[tuple[int, str]] = []
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.append((lineno, line))
    if not tokens:
        raise MeshParseError(f"{path}:1: empty OFF file")

    lineno, header = tokens[0]
    rest = tokens[1:]
    if header == "OFF":
        pass
    elif header.startswith("OFF"):
        # glued header: counts continue on the same line
        rest = [(lineno, header[3:].strip())] + rest
    else:
        err(lineno, f"expected OFF header, got {header!r}")
    if not rest:
        err(lineno, "missing element counts")
    lineno, counts_line = rest[0]
    parts = counts_line.split()
    if len(parts) < 2:
        err(lineno, f"bad element counts {counts_line!r}")
    try:
        nv, nf = int(parts[0]), int(parts[1])
    except ValueError:
        err(lineno, f"bad element counts {counts_line!r}")
    body = rest[1:]
    if len(body) < nv + nf:
        last = body[-1][0] if body else lineno
        err(last, f"truncated file: expected {nv} vertices and {nf} faces")

    verts = np.empty((nv, 3))
    for i in range(nv):
        lno, line = body[i]
        parts = line.split()
        if len(parts) < 3:
            err(lno, f"bad vertex line {line!r}")
        try:
            verts[i] = [float(parts[0]), float(parts[1]), float(parts[2])]
        except ValueError:
            err(lno, f"bad vertex line {line!r}")
    faces: list[tuple[int, int, int]] = []
    for i in range(nf):
        lno, line = body[nv + i]
        parts = line.split()
        try:
            k = int(parts[0])
            poly = [int(p) for p in parts[1:1 + k]]
        except (ValueError, IndexError):
            err(lno, f"bad face line {line!r}")
        if len(poly) != k or k < 3:
            err(lno, f"face count mismatch in {line!r}")
        faces.extend(_triangulate(poly))
    return TriangleMesh(verts, np.array(faces, dtype=int)).drop_degenerate()


def load_obj(path) -> TriangleMesh:
    """Parse a Wavefront OBJ mesh (vertices and faces only)."""
    verts: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "v":
                if len(parts) < 4:
                    raise MeshParseError(f"{path}:{lineno}: bad vertex line")
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif parts[0] == "f":
                try:
                    poly = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                except ValueError:
                    raise MeshParseError(f"{path}:{lineno}: bad face line")
                if len(poly) < 3:
                    raise MeshParseError(f"{path}:{lineno}: face with fewer than 3 vertices")
                faces.extend(_triangulate(poly))
    if not verts:
        raise MeshParseError(f"{path}:1: no vertices found")
    return TriangleMesh(np.array(verts), np.array(faces, dtype=int)).drop_degenerate()


def load_points(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Read a point cloud: CSV/whitespace ``x y z [value]`` or JSON.

    JSON accepts ``{"points": [[x,y,z],...], "values": [...]}`` or a bare
    list of ``[x, y, z]`` / ``[x, y, z, value]`` rows.  Returns Cartesian
    points and optional per-point values.
    """
    text = open(path).read()
    stripped = text.lstrip()
    if stripped.startswith("{") or stripped.startswith("["):
        data = json.loads(text)
        if isinstance(data, dict):
            pts = np.asarray(data["points"], dtype=float)
            vals = np.asarray(data["values"], dtype=float) if "values" in data else None
            return pts.reshape(-1, 3), vals
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 2 or arr.shape[1] not in (3, 4):
            raise ValueError(f"{path}: expected rows of 3 or 4 numbers")
        return arr[:, :3], (arr[:, 3] if arr.shape[1] == 4 else None)
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            if lineno == 1:
                continue  # header row
            raise ValueError(f"{path}:{lineno}: bad point row {line!r}")
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (3, 4):
        raise ValueError(f"{path}: expected rows of 3 or 4 numbers")
    return arr[:, :3], (arr[:, 3] if arr.shape[1] == 4 else None)


def sample_surface(mesh: TriangleMesh, K: int, rng: np.random.Generator) -> np.ndarray:
    """``K`` points sampled area-proportionally over the faces (Cartesian)."""
    if len(mesh.faces) == 0:
        raise ValueError("cannot sample an empty mesh")
    if K < 1:
        raise ValueError("need at least one sample")
    areas = mesh.face_areas()
    idx = rng.choice(len(mesh.faces), size=K, p=areas / areas.sum())
    u = rng.random(K)
    v = rng.random(K)
    su = np.sqrt(u)
    a = mesh.vertices[mesh.faces[idx, 0]]
    b = mesh.vertices[mesh.faces[idx, 1]]
    c = mesh.vertices[mesh.faces[idx, 2]]
    return (1.0 - su)[:, None] * a + (su * (1.0 - v))[:, None] * b + (su * v)[:, None] * c


def normalize_to_ball(points: np.ndarray) -> tuple[np.ndarray, NormalizationRecord]:
    """Subtract the centroid and scale so the maximum radius is exactly 1."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) == 0:
        raise ValueError("no points to normalize")
    centroid = points.mean(axis=0)
    shifted = points - centroid
    scale = float(np.linalg.norm(shifted, axis=1).max())
    if scale < 1e-12:
        raise ValueError("degenerate point set: all points coincide")
    return shifted / scale, NormalizationRecord(centroid, scale)


def surface_values(points: np.ndarray) -> SampleSet:
    """Surface transform: value = radius at every sample point.

    The zero branch away from the surface is realized by the absence of
    samples there.
    """
    theta, phi, r = cart_to_sph(np.asarray(points, dtype=float).reshape(-1, 3))
    return SampleSet(theta, phi, r, r.copy())


def cloud_to_samples(points: np.ndarray, values: np.ndarray | None = None) -> SampleSet:
    theta, phi, r = cart_to_sph(np.asarray(points, dtype=float).reshape(-1, 3))
    return SampleSet(theta, phi, r, r.copy() if values is None else values)


def synth_bandlimited(seed: int, N: int = 6, n_samples: int = 8192,
                      rng: np.random.Generator | None = None):
    """Random band-limited ground truth plus a dense volume-uniform sampling."""
    rng = np.random.default_rng(seed) if rng is None else rng
    layout = get_layout(N)
    c = rng.normal(size=layout.dim)
    c[layout.n_entries + layout.m0_positions] = 0.0  # identically-zero imaginary parts
    truth = MomentVector(layout, c)
    theta, phi, r = uniform_ball_samples(n_samples, rng)
    values = reconstruct(truth, theta, phi, r)
    return truth, SampleSet(theta, phi, r, values)


# ---------------------------------------------------------------------------
# synthetic labeled classes: spheres / ellipsoids / two-lobe shapes
# ---------------------------------------------------------------------------

CLASS_NAMES = ("sphere", "ellipsoid", "two-lobe")


@dataclass
class LabeledShape:
    shape_id: str
    label: int
    samples: SampleSet


@dataclass
class LabeledDataset:
    train: list[LabeledShape]
    test: list[LabeledShape]
    class_names: tuple[str, ...] = CLASS_NAMES


def _random_directions(rng, k):
    v = rng.normal(size=(k, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _make_sphere(rng, k, jitter):
    d = _random_directions(rng, k)
    r = 1.0 + jitter * rng.normal(size=k)
    return d * r[:, None]


def _make_ellipsoid(rng, k, jitter):
    axes = np.array([1.0, rng.uniform(0.55, 0.8), rng.uniform(0.55, 0.8)])
    d = _random_directions(rng, k)
    # project directions onto the ellipsoid surface
    r = 1.0 / np.sqrt(((d / axes) ** 2).sum(axis=1))
    return d * (r * (1.0 + jitter * rng.normal(size=k)))[:, None]


def _make_two_lobe(rng, k, jitter):
    # Two polar caps at full radius joined by a low-radius waist along the
    # z-axis.  The radial distribution is bimodal along intermediate
    # directions, which a surface-only (angular) representation cannot
    # keep apart.
    cap_frac = rng.uniform(0.5, 0.6)
    waist_r = rng.uniform(0.5, 0.65)
    n_cap = int(round(cap_frac * k))
    d = _random_directions(rng, k)
    # the |z|-largest directions form the caps; the rest sit on the waist
    order = np.argsort(-np.abs(d[:, 2]))
    in_cap = np.zeros(k, dtype=bool)
    in_cap[order[:n_cap]] = True
    r = np.where(in_cap, 1.0, waist_r) * (1.0 + jitter * rng.normal(size=k))
    return d * r[:, None]


_MAKERS = (_make_sphere, _make_ellipsoid, _make_two_lobe)


def synth_classes(seed: int, n_train: int = 100, n_test: int = 30,
                  k_points: int = 1536, jitter: float = 0.03) -> LabeledDataset:
    """Deterministic three-class dataset, randomly rotated and radially jittered."""
    rng = np.random.default_rng(seed)
    train: list[LabeledShape] = []
    test: list[LabeledShape] = []
    for label, maker in enumerate(_MAKERS):
        for i in range(n_train + n_test):
            pts = maker(rng, k_points, jitter) @ random_rotation(rng).T
            pts, _ = normalize_to_ball(pts)
            shape = LabeledShape(f"{CLASS_NAMES[label]}-{i:03d}", label, surface_values(pts))
            (train if i < n_train else test).append(shape)
    return LabeledDataset(train, test)


def remove_points(samples: SampleSet, fraction: float, rng: np.random.Generator) -> SampleSet:
    """Randomly drop a fraction of the sample points (order preserved)."""
    if fraction <= 0.0:
        return samples
    k = len(samples)
    keep = max(1, int(round((1.0 - fraction) * k)))
    idx = np.sort(rng.choice(k, size=keep, replace=False))
    return samples.subset(idx)
