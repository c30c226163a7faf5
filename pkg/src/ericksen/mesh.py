"""Structured weakly acute simplicial meshes.

Triangles come from splitting every grid square along the same diagonal,
tetrahedra from the Kuhn (path) subdivision of every grid cube. Both
meshes stay weakly acute under :func:`refine_red`.
"""
from dataclasses import dataclass
from itertools import permutations

import numpy as np

ALL = "all"
_SIDE_NAMES = ("x", "y", "z")


@dataclass(frozen=True)
class Mesh:
    """A conforming P1 simplicial mesh.

    Attributes
    ----------
    vertices : (nv, d) float array
    cells : (nc, d+1) int array
    boundary_faces : (nf, d) int array of vertex indices
    face_labels : (nf,) array of region names, one per boundary face
    """

    vertices: np.ndarray
    cells: np.ndarray
    boundary_faces: np.ndarray
    face_labels: np.ndarray

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_cells(self):
        return self.cells.shape[0]

    @property
    def labels(self):
        return sorted(set(self.face_labels.tolist()))

    def cell_volumes(self):
        """Unsigned cell volumes."""
        return np.abs(signed_volumes(self.vertices, self.cells))

    def volume(self):
        return float(self.cell_volumes().sum())

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def h_max(self):
        return float(self.edge_lengths().max())

    def edges(self):
        """Unique undirected edges as an (m, 2) array with ``e[:, 0] < e[:, 1]``."""
        d = self.dim
        pairs = [(a, b) for a in range(d + 1) for b in range(a + 1, d + 1)]
        e = np.concatenate([self.cells[:, [a, b]] for a, b in pairs])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def edge_lengths(self):
        e = self.edges()
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    def oriented(self):
        """Copy with every cell reordered to have positive signed volume."""
        cells = self.cells.copy()
        neg = signed_volumes(self.vertices, cells) < 0
        cells[neg, -2], cells[neg, -1] = cells[neg, -1], cells[neg, -2].copy()
        return Mesh(self.vertices, cells, self.boundary_faces, self.face_labels)


def signed_volumes(vertices, cells):
    x = vertices[cells]
    d = vertices.shape[1]
    jac = x[:, 1:, :] - x[:, :1, :]
    fact = 2.0 if d == 2 else 6.0
    return np.linalg.det(jac) / fact


def _label_faces(vertices, faces, lo, hi, tol=1e-10):
    labels = np.empty(len(faces), dtype=object)
    x = vertices[faces]  # (nf, d, d)
    for axis in range(vertices.shape[1]):
        for side, bound in (("0", lo[axis]), ("1", hi[axis])):
            on = np.all(np.abs(x[:, :, axis] - bound) <= tol, axis=1)
            labels[on] = _SIDE_NAMES[axis] + side
    if any(lab is None for lab in labels):
        raise ValueError("boundary face not on a box side")
    return labels.astype(str)


def exterior_faces(cells):
    """Faces that belong to exactly one cell, in sorted vertex order."""
    k = cells.shape[1]
    faces = np.concatenate([np.delete(cells, i, axis=1) for i in range(k)])
    faces = np.sort(faces, axis=1)
    uniq, counts = np.unique(faces, axis=0, return_counts=True)
    return uniq[counts == 1]


def _check_counts(*counts):
    for c in counts:
        if int(c) != c or c < 1:
            raise ValueError(f"cell counts must be positive integers, got {counts}")


def build_square_mesh(nx, ny, bounds=((0.0, 1.0), (0.0, 1.0))):
    """Right-triangle mesh of a rectangle, every square cut along the same diagonal."""
    _check_counts(nx, ny)
    (x0, x1), (y0, y1) = bounds
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    v00 = (i + (nx + 1) * j).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    cells = np.concatenate([
        np.column_stack([v00, v10, v11]),
        np.column_stack([v00, v11, v01]),
    ])
    faces = exterior_faces(cells)
    labels = _label_faces(vertices, faces, (x0, y0), (x1, y1))
    return Mesh(vertices, cells, faces, labels)


# six tetrahedra per cube that apply_shear_map turns into ideal tetrahedra:
# two cut-off corners plus four cells around the min-max diagonal
_IDEAL_SPLIT = (
    ((0, 0, 1), (0, 0, 0), (1, 0, 1), (0, 1, 1)),
    ((1, 1, 0), (1, 0, 0), (0, 1, 0), (1, 1, 1)),
    ((0, 0, 0), (1, 1, 1), (1, 0, 0), (1, 0, 1)),
    ((0, 0, 0), (1, 1, 1), (1, 0, 1), (0, 1, 1)),
    ((0, 0, 0), (1, 1, 1), (0, 1, 1), (0, 1, 0)),
    ((0, 0, 0), (1, 1, 1), (0, 1, 0), (1, 0, 0)),
)


def build_cube_mesh(nx, ny, nz, bounds=((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)), split="kuhn"):
    """Tetrahedral mesh of a box with six tetrahedra per grid cube.

    ``split="kuhn"`` (default) uses the six path tetrahedra sharing the
    min-max diagonal; cell vertices are stored in path order, which is what
    lets :func:`refine_red` reproduce Kuhn children. Kuhn cells are
    non-obtuse as they stand but not after :func:`apply_shear_map`.

    ``split="ideal"`` cuts off the corners at (0,0,1) and (1,1,0) and splits
    the rest around the min-max diagonal. These cells are obtuse on the box
    itself and become ideal (weakly acute) tetrahedra under
    :func:`apply_shear_map`.
    """
    if split not in ("kuhn", "ideal"):
        raise ValueError(f"unknown cube split {split!r}")
    _check_counts(nx, ny, nz)
    lo = tuple(b[0] for b in bounds)
    hi = tuple(b[1] for b in bounds)
    axes = [np.linspace(b[0], b[1], n + 1) for b, n in zip(bounds, (nx, ny, nz))]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    # x fastest
    vertices = np.column_stack([X.transpose(2, 1, 0).ravel(),
                                Y.transpose(2, 1, 0).ravel(),
                                Z.transpose(2, 1, 0).ravel()])
    stride = np.array([1, nx + 1, (nx + 1) * (ny + 1)])
    i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    base = (i * stride[0] + j * stride[1] + k * stride[2]).ravel()

    cells = []
    if split == "kuhn":
        for perm in permutations(range(3)):
            offs = [0]
            acc = 0
            for axis in perm:
                acc += stride[axis]
                offs.append(acc)
            cells.append(base[:, None] + np.array(offs)[None, :])
    else:
        for tet in _IDEAL_SPLIT:
            offs = [int(np.dot(corner, stride)) for corner in tet]
            cells.append(base[:, None] + np.array(offs)[None, :])
    cells = np.concatenate(cells)
    faces = exterior_faces(cells)
    labels = _label_faces(vertices, faces, lo, hi)
    return Mesh(vertices, cells, faces, labels)


SHEAR_MATRIX = np.array([
    [1.0 / np.sqrt(2.0), 0.0, 0.0],
    [0.0, 1.0 / np.sqrt(2.0), 0.0],
    [-0.5, -0.5, 1.0],
])


def apply_shear_map(mesh):
    """Map vertices by the linear shear that turns the ``ideal`` cube split into ideal tetrahedra."""
    if mesh.dim != 3:
        raise ValueError("shear map is defined for 3-D meshes only")
    vertices = mesh.vertices @ SHEAR_MATRIX.T
    return Mesh(vertices, mesh.cells.copy(), mesh.boundary_faces.copy(), mesh.face_labels.copy())


def _midpoint_table(cells, n_vertices, vertices):
    """Create one midpoint vertex per edge; returns (new vertices, lookup fn)."""
    k = cells.shape[1]
    pairs = [(a, b) for a in range(k) for b in range(a + 1, k)]
    e = np.concatenate([cells[:, [a, b]] for a, b in pairs])
    e.sort(axis=1)
    uniq, inverse = np.unique(e, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    mids = 0.5 * (vertices[uniq[:, 0]] + vertices[uniq[:, 1]])
    new_vertices = np.vstack([vertices, mids])
    ids = n_vertices + inverse.reshape(len(pairs), -1).T  # (nc, npairs)
    table = {pair: ids[:, m] for m, pair in enumerate(pairs)}

    def mid(a, b):
        return table[(a, b) if a < b else (b, a)]

    return new_vertices, mid, uniq


def refine_red(mesh):
    """Uniform refinement: 1-to-4 for triangles, 1-to-8 for tetrahedra.

    For tetrahedra the inner octahedron is cut along its shortest diagonal,
    ties going to the lexicographically first pair of local vertex indices.
    Children are listed in Bey's order so Kuhn cells refine into Kuhn cells.
    """
    cells = mesh.cells
    vertices, mid, _ = _midpoint_table(cells, mesh.n_vertices, mesh.vertices)
    c = [cells[:, a] for a in range(cells.shape[1])]

    if mesh.dim == 2:
        m01, m02, m12 = mid(0, 1), mid(0, 2), mid(1, 2)
        children = [
            (c[0], m01, m02),
            (m01, c[1], m12),
            (m02, m12, c[2]),
            (m01, m12, m02),
        ]
        new_cells = np.concatenate([np.column_stack(ch) for ch in children])
    else:
        # local reorderings mapping each candidate diagonal onto (x02, x13)
        reorder = {
            ((0, 1), (2, 3)): (0, 2, 1, 3),
            ((0, 2), (1, 3)): (0, 1, 2, 3),
            ((0, 3), (1, 2)): (0, 1, 3, 2),
        }
        diags = list(reorder)
        lengths = np.stack([
            np.linalg.norm(vertices[mid(*p)] - vertices[mid(*q)], axis=1) for p, q in diags
        ], axis=1)
        # ties within relative 1e-12 go to the first listed diagonal
        best = lengths.min(axis=1, keepdims=True)
        choice = np.argmax(lengths <= best * (1 + 1e-12), axis=1)
        new_cells = np.empty((8 * len(cells), 4), dtype=cells.dtype)
        for which, key in enumerate(diags):
            sel = np.nonzero(choice == which)[0]
            if sel.size == 0:
                continue
            o = reorder[key]
            x = [c[o[a]][sel] for a in range(4)]

            def mm(a, b, o=o, sel=sel):
                return mid(o[a], o[b])[sel]

            x01, x02, x03 = mm(0, 1), mm(0, 2), mm(0, 3)
            x12, x13, x23 = mm(1, 2), mm(1, 3), mm(2, 3)
            children = [
                (x[0], x01, x02, x03),
                (x01, x[1], x12, x13),
                (x02, x12, x[2], x23),
                (x03, x13, x23, x[3]),
                (x01, x02, x03, x13),
                (x01, x02, x12, x13),
                (x02, x03, x13, x23),
                (x02, x12, x13, x23),
            ]
            for slot, ch in enumerate(children):
                new_cells[8 * sel + slot] = np.column_stack(ch)

    # boundary faces: each parent face splits like a triangle (3-D) or segment (2-D)
    faces = mesh.boundary_faces
    labels = mesh.face_labels
    fmid = _face_midpoint_lookup(mesh, faces)
    f = [faces[:, a] for a in range(faces.shape[1])]
    if mesh.dim == 2:
        m = fmid(0, 1)
        new_faces = np.concatenate([np.column_stack([f[0], m]), np.column_stack([m, f[1]])])
        new_labels = np.concatenate([labels, labels])
    else:
        m01, m02, m12 = fmid(0, 1), fmid(0, 2), fmid(1, 2)
        parts = [(f[0], m01, m02), (m01, f[1], m12), (m02, m12, f[2]), (m01, m12, m02)]
        new_faces = np.concatenate([np.column_stack(p) for p in parts])
        new_labels = np.concatenate([labels] * 4)
    new_faces = np.sort(new_faces, axis=1)
    return Mesh(vertices, new_cells, new_faces, new_labels)


def _face_midpoint_lookup(mesh, faces):
    """Midpoint vertex ids for boundary-face edges, consistent with ``_midpoint_table``."""
    k = mesh.cells.shape[1]
    pairs = [(a, b) for a in range(k) for b in range(a + 1, k)]
    e = np.concatenate([mesh.cells[:, [a, b]] for a, b in pairs])
    e.sort(axis=1)
    uniq = np.unique(e, axis=0)
    n = mesh.n_vertices
    key_all = uniq[:, 0].astype(np.int64) * n + uniq[:, 1]

    def fmid(a, b):
        ee = np.sort(faces[:, [a, b]], axis=1)
        key = ee[:, 0].astype(np.int64) * n + ee[:, 1]
        pos = np.searchsorted(key_all, key)
        return n + pos

    return fmid


@dataclass
class AcuteReport:
    passed: bool
    worst_offdiag: float
    """minimum of k_ij = -int grad(phi_i) . grad(phi_j) over i != j"""

    def __bool__(self):
        return self.passed


def check_weak_acute(mesh, tol=1e-12):
    """Audit the stiffness matrix: pass iff every ``k_ij >= -tol`` for ``i != j``."""
    from .fem import assemble_stiffness

    K = assemble_stiffness(mesh).tocoo()
    off = K.row != K.col
    k = -K.data[off]
    worst = float(k.min()) if k.size else 0.0
    return AcuteReport(passed=worst >= -tol, worst_offdiag=worst)


def boundary_nodes(mesh, label):
    """Sorted vertex indices on faces labelled ``label`` (``"all"`` for every face)."""
    if label == ALL:
        faces = mesh.boundary_faces
    else:
        mask = mesh.face_labels == label
        if not mask.any():
            raise KeyError(f"unknown boundary label {label!r}; have {mesh.labels}")
        faces = mesh.boundary_faces[mask]
    return np.unique(faces)
