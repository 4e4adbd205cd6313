"""3-D anatomy model: triangle meshes, binary voxel volumes, conversion.

Meshes are watertight closed surfaces in mm; volumes are isotropic voxel
grids whose ``data[ix, iy, iz]`` holds 0/1, with voxel centers at
``origin + index * spacing``.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .exceptions import NotWatertight

# deterministic sub-voxel ray offsets; irrational so grid-aligned mesh
# edges are never hit exactly
_JITTER_A = 1e-6 * np.sqrt(2.0)
_JITTER_B = 1e-6 * np.sqrt(3.0)


@dataclass(frozen=True)
class TriangleMesh:
    """Closed, outward-oriented triangle mesh.

    Build instances through :meth:`from_arrays`, which merges duplicate
    vertices, removes degenerate triangles, orients the surface outward
    and verifies that the mesh is closed (every edge shared by exactly
    two triangles with opposite winding).
    """

    vertices: np.ndarray      # (n, 3) float64, mm
    triangles: np.ndarray     # (m, 3) int64
    vertex_normals: np.ndarray  # (n, 3) float64, unit, outward

    @classmethod
    def from_arrays(cls, vertices, triangles):
        v = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle indices out of range")
        v, t = _merge_vertices(v, t)
        t = t[(t[:, 0] != t[:, 1]) & (t[:, 1] != t[:, 2]) & (t[:, 0] != t[:, 2])]
        area2 = np.linalg.norm(_face_cross(v, t), axis=1)
        t = t[area2 > 0.0]
        if len(t) == 0:
            raise ValueError("mesh has no non-degenerate triangles")
        used = np.zeros(len(v), bool)
        used[t.ravel()] = True
        remap = np.cumsum(used) - 1
        v, t = v[used], remap[t]
        _check_closed(t)
        if _signed_volume(v, t) < 0.0:
            t = t[:, [0, 2, 1]]
        return cls(_readonly(v), _readonly(t), _readonly(_vertex_normals(v, t)))

    @property
    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def face_normals(self):
        c = _face_cross(self.vertices, self.triangles)
        return c / np.linalg.norm(c, axis=1, keepdims=True)

    @property
    def face_centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    def enclosed_volume(self):
        return _signed_volume(self.vertices, self.triangles)

    def translated(self, t):
        t = np.asarray(t, dtype=np.float64).reshape(3)
        return TriangleMesh(_readonly(self.vertices + t), self.triangles,
                            self.vertex_normals)


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _merge_vertices(v, t):
    uniq, inverse = np.unique(v, axis=0, return_inverse=True)
    return uniq, inverse[t]


def _face_cross(v, t):
    p = v[t]
    return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])


def _signed_volume(v, t):
    p = v[t]
    return float(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0)


def _vertex_normals(v, t):
    cross = _face_cross(v, t)  # area-weighted face normals
    n = np.zeros_like(v)
    for k in range(3):
        np.add.at(n, t[:, k], cross)
    norms = np.linalg.norm(n, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return n / norms


def _check_closed(t):
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    directed = edges[:, 0] * (edges.max() + 1) + edges[:, 1]
    if len(np.unique(directed)) != len(directed):
        raise NotWatertight("mesh has a repeated directed edge (inconsistent winding)")
    undirected = np.sort(edges, axis=1)
    _, counts = np.unique(undirected, axis=0, return_counts=True)
    if not np.all(counts == 2):
        raise NotWatertight("mesh is not closed: some edges are not shared by "
                            "exactly two triangles")


@dataclass(frozen=True)
class BinaryVolume:
    """Isotropic binary voxel grid; ``data[ix, iy, iz]`` with centers at
    ``origin + (ix, iy, iz) * spacing``."""

    data: np.ndarray    # (nx, ny, nz) uint8
    spacing: float
    origin: np.ndarray  # (3,) mm

    def __post_init__(self):
        d = np.ascontiguousarray(np.asarray(self.data, dtype=np.uint8))
        if d.ndim != 3:
            raise ValueError("volume data must be 3-D")
        if d.max(initial=0) > 1:
            raise ValueError("volume data must contain only 0 and 1")
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d.setflags(write=False)
        o.setflags(write=False)
        object.__setattr__(self, "data", d)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "spacing", float(self.spacing))

    @property
    def dims(self):
        return self.data.shape

    def count(self):
        return int(self.data.sum())

    def occupied_centers(self):
        """(k, 3) array of voxel centers with value 1."""
        idx = np.argwhere(self.data > 0)
        return self.origin + idx * self.spacing

    def centroid(self):
        occ = self.occupied_centers()
        if len(occ) == 0:
            raise ValueError("volume is empty")
        return occ.mean(axis=0)

    def translated(self, t):
        t = np.asarray(t, dtype=np.float64).reshape(3)
        return BinaryVolume(self.data, self.spacing, self.origin + t)


def inside(volume, point):
    """Nearest-voxel membership lookup; points off the grid return 0."""
    p = np.asarray(point, dtype=np.float64).reshape(3)
    idx = np.floor((p - volume.origin) / volume.spacing + 0.5).astype(np.int64)
    if np.any(idx < 0) or np.any(idx >= volume.data.shape):
        return 0
    return int(volume.data[idx[0], idx[1], idx[2]])


def voxelize(mesh, spacing):
    """Rasterize a watertight mesh to a binary volume.

    A voxel is 1 iff its center lies inside the mesh by a ray-parity
    test.  Parity is evaluated along all three axes with a sub-voxel ray
    jitter; the per-voxel majority wins.  The grid covers the mesh
    bounding box padded by two voxel layers on every side.

    Raises
    ------
    NotWatertight
        If more than 0.1% of voxels get inconsistent parities from the
        three ray directions.
    """
    if spacing <= 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    bmin, bmax = mesh.bounds
    n = np.ceil((bmax - bmin) / spacing).astype(np.int64) + 4
    origin = bmin - 1.5 * spacing
    votes = np.zeros((n[0], n[1], n[2]), np.uint8)
    v, t = mesh.vertices, mesh.triangles
    for axis in range(3):
        u, a, b = axis, (axis + 1) % 3, (axis + 2) % 3
        parity = np.zeros((n[a], n[b], n[u]), np.int32)
        _parity_grid(v[:, u].copy(), v[:, a].copy(), v[:, b].copy(), t,
                     origin[u], origin[a], origin[b], spacing,
                     n[u], _JITTER_A * spacing, _JITTER_B * spacing, parity)
        # parity grid is indexed (a, b, u); rearrange to (x, y, z)
        perm = np.argsort([a, b, u])
        votes += (np.transpose(parity, perm) & 1).astype(np.uint8)
    disagree = np.count_nonzero((votes == 1) | (votes == 2))
    if disagree > 1e-3 * votes.size:
        raise NotWatertight(
            f"ray-parity disagreement on {disagree}/{votes.size} voxels")
    return BinaryVolume((votes >= 2).astype(np.uint8), spacing, origin)


@njit(cache=True, nogil=True)
def _parity_grid(vu, va, vb, tris, ou, oa, ob, h, nu, ja, jb, parity):
    # Crossing counts along axis u for the ray lattice over axes (a, b).
    # parity[ia, ib, iu] accumulates, per voxel center, the number of
    # surface crossings beyond it; final parity odd <=> inside.
    na, nb = parity.shape[0], parity.shape[1]
    for m in range(tris.shape[0]):
        i0, i1, i2 = tris[m, 0], tris[m, 1], tris[m, 2]
        a0, a1, a2 = va[i0], va[i1], va[i2]
        b0, b1, b2 = vb[i0], vb[i1], vb[i2]
        denom = (a1 - a0) * (b2 - b0) - (a2 - a0) * (b1 - b0)
        if denom == 0.0:
            continue  # edge-on to the ray direction
        lo_a = max(0, int(np.ceil((min(a0, min(a1, a2)) - oa - ja) / h)))
        hi_a = min(na - 1, int(np.floor((max(a0, max(a1, a2)) - oa - ja) / h)))
        lo_b = max(0, int(np.ceil((min(b0, min(b1, b2)) - ob - jb) / h)))
        hi_b = min(nb - 1, int(np.floor((max(b0, max(b1, b2)) - ob - jb) / h)))
        for ia in range(lo_a, hi_a + 1):
            ra = oa + ia * h + ja
            for ib in range(lo_b, hi_b + 1):
                rb = ob + ib * h + jb
                w1 = ((ra - a0) * (b2 - b0) - (rb - b0) * (a2 - a0)) / denom
                w2 = ((a1 - a0) * (rb - b0) - (b1 - b0) * (ra - a0)) / denom
                if w1 < 0.0 or w2 < 0.0 or w1 + w2 > 1.0:
                    continue
                ucross = vu[i0] + w1 * (vu[i1] - vu[i0]) + w2 * (vu[i2] - vu[i0])
                # voxels with center < ucross see this crossing ahead of them
                iend = int(np.ceil((ucross - ou) / h)) - 1
                if iend >= nu:
                    iend = nu - 1
                for iu in range(0, iend + 1):
                    parity[ia, ib, iu] += 1


def save_volume(path, volume, encoding="byte"):
    """Write a binary volume.

    Layout: text header (``binary-volume``, dims, spacing, origin,
    encoding), a blank line, then the payload: one byte per voxel in C
    order of (nx, ny, nz), or the same stream bit-packed.
    """
    if encoding not in ("byte", "bit"):
        raise ValueError(f"unknown encoding {encoding!r}")
    d = volume.data
    payload = np.packbits(d.ravel()).tobytes() if encoding == "bit" else d.tobytes()
    header = (
        "binary-volume\n"
        f"dims: {d.shape[0]} {d.shape[1]} {d.shape[2]}\n"
        f"spacing: {volume.spacing!r}\n"
        f"origin: {volume.origin[0]!r} {volume.origin[1]!r} {volume.origin[2]!r}\n"
        f"encoding: {encoding}\n\n"
    )
    with open(path, "wb") as f:
        f.write(header.encode())
        f.write(payload)


def load_volume(path):
    with open(path, "rb") as f:
        data = f.read()
    end = data.index(b"\n\n") + 2
    fields = {}
    lines = data[:end].decode().splitlines()
    if lines[0] != "binary-volume":
        raise ValueError(f"{path}: not a binary-volume file")
    for ln in lines[1:]:
        if ln:
            k, _, rest = ln.partition(":")
            fields[k.strip()] = rest.strip()
    dims = tuple(int(v) for v in fields["dims"].split())
    spacing = float(fields["spacing"])
    origin = np.array([float(v) for v in fields["origin"].split()])
    nvox = dims[0] * dims[1] * dims[2]
    if fields["encoding"] == "bit":
        flat = np.unpackbits(np.frombuffer(data, np.uint8, offset=end))[:nvox]
    else:
        flat = np.frombuffer(data, np.uint8, count=nvox, offset=end)
    return BinaryVolume(flat.reshape(dims), spacing, origin)


@dataclass(frozen=True)
class AtriumModel:
    """A surface mesh paired with its voxelized interior."""

    mesh: TriangleMesh
    volume: BinaryVolume

    @classmethod
    def from_mesh(cls, mesh, spacing=2.0):
        return cls(mesh, voxelize(mesh, spacing))

    def centroid(self):
        return self.volume.centroid()


def box_mesh(size, center=(0.0, 0.0, 0.0)):
    """Axis-aligned box; ``size`` is a scalar or per-axis extent."""
    s = np.broadcast_to(np.asarray(size, dtype=np.float64), (3,)) / 2.0
    c = np.asarray(center, dtype=np.float64)
    corners = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    verts = c + corners * s
    quads = [  # outward-facing, counter-clockwise seen from outside
        (0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1),
        (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3),
    ]
    tris = []
    for a, b, cc, d in quads:
        tris.append((a, b, cc))
        tris.append((a, cc, d))
    return TriangleMesh.from_arrays(verts, tris)


def icosphere_mesh(radius, subdivisions=3, center=(0.0, 0.0, 0.0)):
    """Geodesic sphere from a subdivided icosahedron."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts[0])
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = list(verts)
    for _ in range(subdivisions):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.asarray(verts) * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh.from_arrays(v, faces)


def write_ply(path, mesh):
    """ASCII PLY with vertices and triangular faces."""
    v, t = mesh.vertices, mesh.triangles
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {len(v)}\n")
        f.write("property double x\nproperty double y\nproperty double z\n")
        f.write(f"element face {len(t)}\n")
        f.write("property list uchar int vertex_indices\nend_header\n")
        for p in v:
            f.write(f"{p[0]!r} {p[1]!r} {p[2]!r}\n")
        for tri in t:
            f.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n")


def read_ply(path):
    """ASCII PLY reader (vertices + triangular faces; extra vertex
    properties beyond x, y, z are ignored)."""
    with open(path) as f:
        if f.readline().strip() != "ply":
            raise ValueError(f"{path}: not a PLY file")
        nvert = nface = 0
        props = []
        element = None
        for line in f:
            tok = line.split()
            if not tok or tok[0] == "comment":
                continue
            if tok[0] == "format":
                if tok[1] != "ascii":
                    raise ValueError(f"{path}: only ascii PLY is supported")
            elif tok[0] == "element":
                element = tok[1]
                if element == "vertex":
                    nvert = int(tok[2])
                elif element == "face":
                    nface = int(tok[2])
            elif tok[0] == "property" and element == "vertex" and tok[1] != "list":
                props.append(tok[-1])
            elif tok[0] == "end_header":
                break
        try:
            cols = [props.index(c) for c in ("x", "y", "z")]
        except ValueError:
            raise ValueError(f"{path}: vertex element lacks x/y/z") from None
        verts = np.empty((nvert, 3))
        for i in range(nvert):
            vals = f.readline().split()
            verts[i] = [float(vals[c]) for c in cols]
        faces = []
        for _ in range(nface):
            vals = f.readline().split()
            k = int(vals[0])
            poly = [int(x) for x in vals[1:1 + k]]
            for j in range(1, k - 1):  # fan-triangulate
                faces.append((poly[0], poly[j], poly[j + 1]))
    return TriangleMesh.from_arrays(verts, faces)


def write_off(path, mesh):
    v, t = mesh.vertices, mesh.triangles
    with open(path, "w") as f:
        f.write("OFF\n")
        f.write(f"{len(v)} {len(t)} 0\n")
        for p in v:
            f.write(f"{p[0]!r} {p[1]!r} {p[2]!r}\n")
        for tri in t:
            f.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n")


def read_off(path):
    with open(path) as f:
        tokens = []
        for line in f:
            line = line.partition("#")[0].strip()
            if line:
                tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise ValueError(f"{path}: not an OFF file")
    pos = 1
    nvert, nface = int(tokens[pos]), int(tokens[pos + 1])
    pos += 3
    verts = np.array(tokens[pos:pos + 3 * nvert], dtype=np.float64).reshape(nvert, 3)
    pos += 3 * nvert
    faces = []
    for _ in range(nface):
        k = int(tokens[pos])
        poly = [int(x) for x in tokens[pos + 1:pos + 1 + k]]
        pos += 1 + k
        for j in range(1, k - 1):
            faces.append((poly[0], poly[j], poly[j + 1]))
    return TriangleMesh.from_arrays(verts, faces)
