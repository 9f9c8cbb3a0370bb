from dataclasses import dataclass, field
from logging import getLogger
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from ..errors import MeshFormatError, MissingPlaneIdError
from ..geometry import normalize_rows
from ..mesh import TriMesh
from ..registry import register_reader

logger = getLogger(__name__)

PLY_TYPES = {
    "char": "i1",
    "int8": "i1",
    "uchar": "u1",
    "uint8": "u1",
    "short": "i2",
    "int16": "i2",
    "ushort": "u2",
    "uint16": "u2",
    "int": "i4",
    "int32": "i4",
    "uint": "u4",
    "uint32": "u4",
    "float": "f4",
    "float32": "f4",
    "double": "f8",
    "float64": "f8",
}


@dataclass
class PlyElement:
    name: str
    count: int
    properties: list[tuple[str, str]] = field(default_factory=list)
    # (name, count type, item type) of the single list property, if any
    list_property: tuple[str, str, str] | None = None


def parse_header(raw: bytes, path: Path) -> tuple[str, list[PlyElement], int]:
    """
    Parse a PLY header.

    Returns:
        tuple: The format name, the declared elements and the byte offset of the body.
    """
    end = raw.find(b"end_header")
    if not raw.startswith(b"ply") or end < 0:
        raise MeshFormatError(path, "not a PLY file")
    body = raw.index(b"\n", end) + 1

    fmt = ""
    elements: list[PlyElement] = []
    for line in raw[:end].decode("ascii", errors="replace").splitlines()[1:]:
        words = line.split()
        if not words or words[0] in ("comment", "obj_info"):
            continue
        match words:
            case ["format", name, _]:
                fmt = name
            case ["element", name, count] if count.isdigit():
                elements.append(PlyElement(name, int(count)))
            case ["property", "list", count_type, item_type, name] if (
                elements and count_type in PLY_TYPES and item_type in PLY_TYPES
            ):
                elements[-1].list_property = (name, PLY_TYPES[count_type], PLY_TYPES[item_type])
            case ["property", type_name, name] if elements and type_name in PLY_TYPES:
                elements[-1].properties.append((name, PLY_TYPES[type_name]))
            case _:
                raise MeshFormatError(path, f"unsupported header line '{line}'")

    if fmt not in ("ascii", "binary_little_endian"):
        raise MeshFormatError(path, f"unsupported PLY format '{fmt}'")
    return fmt, elements, body


def _read_binary(raw: bytes, elements: list[PlyElement], offset: int, path: Path) -> dict[str, NDArray]:
    data: dict[str, NDArray] = {}
    for el in elements:
        fields = [(name, "<" + t) for name, t in el.properties]
        if el.list_property is not None:
            name, count_t, item_t = el.list_property
            # Triangle meshes only: every list holds exactly three items
            fields += [("__count", "<" + count_t), (name, "<" + item_t, (3,))]
        dtype = np.dtype(fields)
        size = dtype.itemsize * el.count
        if offset + size > len(raw):
            raise MeshFormatError(path, f"truncated '{el.name}' element")
        arr = np.frombuffer(raw, dtype=dtype, count=el.count, offset=offset)
        if el.list_property is not None and np.any(arr["__count"] != 3):
            raise MeshFormatError(path, f"'{el.name}' holds non-triangular lists")
        data[el.name] = arr
        offset += size
    return data


def _read_ascii(raw: bytes, elements: list[PlyElement], offset: int, path: Path) -> dict[str, NDArray]:
    lines = iter(raw[offset:].decode("ascii").splitlines())
    data: dict[str, NDArray] = {}
    for el in elements:
        fields = [(name, t) for name, t in el.properties]
        if el.list_property is not None:
            name, _, item_t = el.list_property
            fields.append((name, item_t, (3,)))
        arr = np.zeros(el.count, dtype=np.dtype(fields))
        n_scalars = len(el.properties)
        for i in range(el.count):
            try:
                words = next(lines).split()
            except StopIteration:
                raise MeshFormatError(path, f"truncated '{el.name}' element")
            scalars = words[:n_scalars]
            for (pname, _), w in zip(el.properties, scalars):
                arr[pname][i] = float(w)
            if el.list_property is not None:
                items = words[n_scalars:]
                if not items or int(items[0]) != 3 or len(items) != 4:
                    raise MeshFormatError(path, f"'{el.name}' holds non-triangular lists")
                arr[el.list_property[0]][i] = [int(v) for v in items[1:]]
        data[el.name] = arr
    return data


@register_reader(".ply")
def load_mesh_ply(source: Path | str, require_plane_id: bool = False) -> TriMesh:
    """
    Load a triangle mesh from an ascii or binary little-endian PLY file.

    Vertex normals (`nx ny nz`), an integer `plane_id` property and embedding
    channels (`emb_0`, `emb_1`, ...) are picked up when present.

    Args:
        source: Path to the PLY file.
        require_plane_id: Raise if the vertices carry no `plane_id`.

    Returns:
        TriMesh: The loaded mesh.

    Raises:
        MeshFormatError: If the file cannot be decoded.
        MissingPlaneIdError: If `require_plane_id` is set and there is no `plane_id`.
    """
    path = Path(source)
    logger.debug(f"Loading PLY from file: {path}")
    raw = path.read_bytes()
    fmt, elements, offset = parse_header(raw, path)
    reader = _read_binary if fmt == "binary_little_endian" else _read_ascii
    data = reader(raw, elements, offset, path)

    if "vertex" not in data:
        raise MeshFormatError(path, "no vertex element")
    vertex = data["vertex"]
    names = vertex.dtype.names or ()
    if not {"x", "y", "z"} <= set(names):
        raise MeshFormatError(path, "vertices lack x/y/z")

    vertices = np.stack([vertex["x"], vertex["y"], vertex["z"]], axis=1).astype(np.float64)
    faces = np.zeros((0, 3), dtype=np.int64)
    face_el = next((el for el in elements if el.name == "face"), None)
    if face_el is not None and face_el.list_property is not None:
        faces = data["face"][face_el.list_property[0]].astype(np.int64).reshape(-1, 3)

    normals = None
    if {"nx", "ny", "nz"} <= set(names):
        normals = normalize_rows(np.stack([vertex["nx"], vertex["ny"], vertex["nz"]], axis=1))

    labels = None
    if "plane_id" in names:
        labels = vertex["plane_id"].astype(np.int64)
    elif require_plane_id:
        raise MissingPlaneIdError(path)

    emb_names = sorted((n for n in names if n.startswith("emb_")), key=lambda n: int(n[4:]))
    embeddings = (
        np.stack([vertex[n] for n in emb_names], axis=1).astype(np.float64) if emb_names else None
    )

    try:
        mesh = TriMesh(
            vertices=vertices,
            faces=faces,
            vertex_normals=normals,
            vertex_labels=labels,
            vertex_embeddings=embeddings,
        )
    except ValueError as e:
        raise MeshFormatError(path, str(e)) from e
    logger.info(f"Loaded mesh with {len(mesh.vertices)} vertices and {len(mesh.faces)} faces from PLY.")
    return mesh
