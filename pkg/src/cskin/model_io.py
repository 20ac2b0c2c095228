"""Blendshape input: OBJ meshes, JSON manifests and the delta-shape model."""
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyShapeList,
    MeshParseError,
    MissingFile,
    ParseError,
    VertexCountMismatch,
)

UNIT_TO_MM = {"mm": 1.0, "cm": 10.0, "m": 1000.0}


@dataclass(frozen=True, eq=False)
class BlendshapeModel:
    """Rest pose plus S delta shapes, all in the model's native unit.

    Attributes:
        rest: (N, 3) rest-pose vertex positions.
        deltas: (S, N, 3) per-shape offsets from the rest pose.
        edges: (E, 2) unordered vertex pairs, stored with ``a < b``.
        unit_scale_to_mm: factor converting model units to millimeters.
    """

    rest: np.ndarray
    deltas: np.ndarray
    edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    unit_scale_to_mm: float = 1.0

    def __post_init__(self):
        rest = np.array(self.rest, dtype=np.float64)
        deltas = np.array(self.deltas, dtype=np.float64)
        edges = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        if rest.ndim != 2 or rest.shape[1] != 3:
            raise DimensionMismatch(f"rest must be (N, 3), got {rest.shape}")
        if deltas.ndim != 3 or deltas.shape[1:] != rest.shape:
            raise DimensionMismatch(
                f"deltas must be (S, {rest.shape[0]}, 3), got {deltas.shape}")
        n = rest.shape[0]
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise DimensionMismatch("edge index out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise DimensionMismatch("self-edge in edge list")
            edges = np.sort(edges, axis=1)
            if len(np.unique(edges, axis=0)) != len(edges):
                raise DimensionMismatch("duplicate edge in edge list")
        if not self.unit_scale_to_mm > 0:
            raise ValueError("unit_scale_to_mm must be positive")
        for a in (rest, deltas, edges):
            a.flags.writeable = False
        object.__setattr__(self, "rest", rest)
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "unit_scale_to_mm", float(self.unit_scale_to_mm))

    @property
    def n_vertices(self):
        return self.rest.shape[0]

    @property
    def n_shapes(self):
        return self.deltas.shape[0]

    def shapes(self):
        """Absolute shape positions, ``rest + delta`` for every shape."""
        return self.rest[None] + self.deltas

    def bbox_diagonal(self):
        return float(np.linalg.norm(self.rest.max(axis=0) - self.rest.min(axis=0)))


@dataclass(frozen=True)
class ShapeManifest:
    rest_path: Path
    shape_paths: tuple
    unit: str = "mm"

    def __post_init__(self):
        if len(self.shape_paths) == 0:
            raise EmptyShapeList("manifest lists no shapes")
        if len(set(self.shape_paths)) != len(self.shape_paths):
            raise ParseError("manifest shape paths are not distinct")
        if self.unit not in UNIT_TO_MM:
            raise ParseError(f"unknown unit {self.unit!r}, expected one of {sorted(UNIT_TO_MM)}")

    @property
    def unit_scale_to_mm(self):
        return UNIT_TO_MM[self.unit]


def read_obj(path):
    """Read the ``v`` and ``f`` records of an OBJ file.

    Face entries may use the ``v/vt/vn`` syntax; only the vertex index is kept.
    Negative (relative) indices are resolved. Every other record is ignored.

    Returns:
        (vertices, faces): an (N, 3) float array and a list of index tuples
        (0-based).
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"mesh file not found: {path}")
    verts, faces = [], []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            tok = line.split()
            if not tok:
                continue
            try:
                if tok[0] == "v":
                    verts.append([float(x) for x in tok[1:4]])
                    if len(verts[-1]) != 3:
                        raise ValueError("vertex needs 3 coordinates")
                elif tok[0] == "f":
                    face = []
                    for t in tok[1:]:
                        idx = int(t.split("/")[0])
                        face.append(idx - 1 if idx > 0 else len(verts) + idx)
                    if len(face) < 3:
                        raise ValueError("face needs at least 3 vertices")
                    faces.append(tuple(face))
            except ValueError as e:
                raise MeshParseError(f"{path}:{lineno}: {e}") from None
    if not verts:
        raise MeshParseError(f"{path}: no vertices")
    for face in faces:
        if min(face) < 0 or max(face) >= len(verts):
            raise MeshParseError(f"{path}: face index out of range in {face}")
    return np.array(verts, dtype=np.float64), faces


def write_obj(path, vertices, faces=()):
    with open(path, "w") as f:
        for v in np.asarray(vertices):
            f.write("v %r %r %r\n" % tuple(float(x) for x in v))
        for face in faces:
            f.write("f " + " ".join(str(i + 1) for i in face) + "\n")


def edges_from_faces(faces):
    """Deduplicated boundary edges of a polygon list, as sorted (a, b) rows."""
    pairs = set()
    for face in faces:
        for a, b in zip(face, face[1:] + face[:1]):
            if a != b:
                pairs.add((min(a, b), max(a, b)))
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    return np.array(sorted(pairs), dtype=np.int64)


def load_manifest(path):
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e}") from None
    if not isinstance(data, dict) or "rest" not in data or "shapes" not in data:
        raise ParseError(f"{path}: manifest needs 'rest' and 'shapes' keys")
    if not isinstance(data["shapes"], list):
        raise ParseError(f"{path}: 'shapes' must be a list")
    base = path.parent

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    return ShapeManifest(
        rest_path=resolve(data["rest"]),
        shape_paths=tuple(resolve(p) for p in data["shapes"]),
        unit=data.get("unit", "mm"),
    )


def write_manifest(path, rest_path, shape_paths, unit="mm"):
    """Write a manifest; paths are stored relative to the manifest's folder when possible."""
    path = Path(path)

    def rel(p):
        p = Path(p)
        try:
            return str(p.resolve().relative_to(path.parent.resolve()))
        except ValueError:
            return str(p)

    data = {"rest": rel(rest_path), "shapes": [rel(p) for p in shape_paths], "unit": unit}
    path.write_text(json.dumps(data, indent=2) + "\n")


def load_blendshape_set(manifest):
    """Load every mesh named by ``manifest`` into a :class:`BlendshapeModel`.

    Deltas are taken against the rest mesh; edges come from the rest mesh's faces.
    """
    rest, faces = read_obj(manifest.rest_path)
    deltas = np.empty((len(manifest.shape_paths),) + rest.shape)
    for k, p in enumerate(manifest.shape_paths):
        verts, _ = read_obj(p)
        if verts.shape[0] != rest.shape[0]:
            raise VertexCountMismatch(p, rest.shape[0], verts.shape[0])
        deltas[k] = verts - rest
    return BlendshapeModel(rest, deltas, edges_from_faces(faces),
                           manifest.unit_scale_to_mm)


def load_model(manifest_path):
    return load_blendshape_set(load_manifest(manifest_path))
