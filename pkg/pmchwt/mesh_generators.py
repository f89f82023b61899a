"""
Geometrías de los experimentos: esfera, toro, condensador de placas y barra
"""
import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from pmchwt.mesh_topology import TriangleMesh, mesh_from_arrays, unique_edges

logger = logging.getLogger(__name__)


def _icosahedron() -> Tuple[np.ndarray, np.ndarray]:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def _split4(vertices: np.ndarray, triangles: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    edges, tri_edges, _ = unique_edges(triangles)
    mid = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    m = len(vertices) + tri_edges
    t = triangles
    new = np.concatenate([
        np.stack([t[:, 0], m[:, 2], m[:, 1]], axis=1),
        np.stack([t[:, 1], m[:, 0], m[:, 2]], axis=1),
        np.stack([t[:, 2], m[:, 1], m[:, 0]], axis=1),
        np.stack([m[:, 0], m[:, 1], m[:, 2]], axis=1),
    ])
    return np.vstack([vertices, mid]), new


def icosphere(radius: float = 1.0, level: int = 1, equal_volume: bool = False) -> TriangleMesh:
    """
    Esfera por subdivisión del icosaedro (20·4^level triángulos)

    Args:
        radius: Radio en metros
        level: Número de subdivisiones 4:1
        equal_volume: Reescala para que el volumen poliédrico coincida con el de la esfera
    """
    v, f = _icosahedron()
    for _ in range(level):
        v, f = _split4(v, f)
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
    mesh = mesh_from_arrays(radius * v, f)
    if equal_volume:
        target = 4.0 / 3.0 * np.pi * radius ** 3
        mesh = mesh.transformed(scale=(target / mesh.signed_volume()) ** (1.0 / 3.0))
    return mesh


def octahedron(radius: float = 1.0) -> TriangleMesh:
    v = radius * np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], float)
    f = np.array([[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
                  [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]])
    return mesh_from_arrays(v, f)


def torus(major: float = 1.0, minor: float = 0.3, n_major: int = 16, n_minor: int = 8,
          equal_area: bool = True) -> TriangleMesh:
    """
    Toro estructurado de eje z (género 1)

    Con equal_area la sección poligonal conserva el área del círculo de radio `minor`.
    """
    a = minor
    if equal_area:
        a = minor * np.sqrt(np.pi / (0.5 * n_minor * np.sin(2 * np.pi / n_minor)))
    phi = 2 * np.pi * np.arange(n_major) / n_major
    theta = 2 * np.pi * np.arange(n_minor) / n_minor
    P, T = np.meshgrid(phi, theta, indexing='ij')
    rho = major + a * np.cos(T)
    v = np.stack([rho * np.cos(P), rho * np.sin(P), a * np.sin(T)], axis=-1).reshape(-1, 3)

    i = np.arange(n_major)[:, None]
    j = np.arange(n_minor)[None, :]
    v00 = (i * n_minor + j).ravel()
    v10 = (((i + 1) % n_major) * n_minor + j).ravel()
    v01 = (i * n_minor + (j + 1) % n_minor).ravel()
    v11 = (((i + 1) % n_major) * n_minor + (j + 1) % n_minor).ravel()
    f = np.concatenate([np.stack([v00, v10, v11], 1), np.stack([v00, v11, v01], 1)])
    return mesh_from_arrays(v, f)


def _subdivide(p0: Sequence[float], p1: Sequence[float], h: float) -> List[Tuple[float, float]]:
    """Puntos de p0 (incluido) a p1 (excluido) con separación <= h"""
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    n = max(1, int(np.ceil(np.linalg.norm(p1 - p0) / h)))
    return [tuple(p0 + (p1 - p0) * s) for s in np.arange(n) / n]


def revolve_profile(profile: Sequence[Tuple[float, float]], n_phi: int) -> TriangleMesh:
    """
    Superficie de revolución alrededor de z a partir de un perfil (r, z)

    El perfil empieza y termina sobre el eje (r = 0); los puntos interiores deben tener r > 0.
    """
    profile = np.asarray(profile, dtype=float)
    if profile[0, 0] != 0.0 or profile[-1, 0] != 0.0 or np.any(profile[1:-1, 0] <= 0):
        raise ValueError("El perfil debe empezar y terminar en el eje con r > 0 en el interior")
    rings = profile[1:-1]
    n_r = len(rings)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    ring_vertices = np.stack([
        rings[:, None, 0] * np.cos(phi)[None, :],
        rings[:, None, 0] * np.sin(phi)[None, :],
        np.repeat(rings[:, None, 1], n_phi, axis=1),
    ], axis=-1).reshape(-1, 3)
    top = np.array([[0.0, 0.0, profile[0, 1]]])
    bottom = np.array([[0.0, 0.0, profile[-1, 1]]])
    v = np.vstack([top, ring_vertices, bottom])

    idx = lambda ring, k: 1 + ring * n_phi + (k % n_phi)
    faces = []
    last = len(v) - 1
    for k in range(n_phi):
        faces.append([0, idx(0, k), idx(0, k + 1)])
        faces.append([last, idx(n_r - 1, k + 1), idx(n_r - 1, k)])
    for ring in range(n_r - 1):
        for k in range(n_phi):
            a, b = idx(ring, k), idx(ring, k + 1)
            c, d = idx(ring + 1, k), idx(ring + 1, k + 1)
            faces.append([a, c, d])
            faces.append([a, d, b])
    return mesh_from_arrays(v, np.array(faces))


def revolved_sphere(radius: float = 1.0, n_theta: int = 8, n_phi: int = 16) -> TriangleMesh:
    theta = np.linspace(0.0, np.pi, n_theta + 1)
    profile = np.stack([radius * np.sin(theta), radius * np.cos(theta)], axis=1)
    profile[0, 0] = profile[-1, 0] = 0.0
    return revolve_profile(profile, n_phi)


def capacitor(plate_radius: float = 4.0, gap: float = 0.2, thickness: float = 0.2,
              wire_radius: float = 0.2, h: float = 0.5, n_phi: int = 24) -> TriangleMesh:
    """
    Dos placas circulares unidas por un hilo axial recto que cruza el hueco

    El hilo tiene longitud igual al hueco; la geometría es un único cuerpo cerrado.
    """
    zt, zb = gap / 2 + thickness, -gap / 2 - thickness
    corners = [
        (0.0, zt), (plate_radius, zt), (plate_radius, gap / 2), (wire_radius, gap / 2),
        (wire_radius, -gap / 2), (plate_radius, -gap / 2), (plate_radius, zb), (0.0, zb),
    ]
    profile: List[Tuple[float, float]] = []
    for p0, p1 in zip(corners[:-1], corners[1:]):
        profile.extend(_subdivide(p0, p1, h))
    profile.append(corners[-1])
    return revolve_profile(profile, n_phi)


def box(lx: float, ly: float, lz: float, nx: int, ny: int, nz: int) -> TriangleMesh:
    """Paralelepípedo centrado en el origen con nx·ny·nz divisiones por cara"""
    xs = np.linspace(-lx / 2, lx / 2, nx + 1)
    ys = np.linspace(-ly / 2, ly / 2, ny + 1)
    zs = np.linspace(-lz / 2, lz / 2, nz + 1)
    pts, faces = [], []

    def add_face(U, V, W, axis_order):
        base = sum(len(p) for p in pts)
        uu, vv = np.meshgrid(U, V, indexing='ij')
        ww = np.full_like(uu, W)
        grid = np.stack([uu, vv, ww], axis=-1)[..., axis_order].reshape(-1, 3)
        pts.append(grid)
        nu, nv = len(U), len(V)
        for i in range(nu - 1):
            for j in range(nv - 1):
                a = base + i * nv + j
                b, c, d = a + nv, a + nv + 1, a + 1
                faces.append([a, b, c])
                faces.append([a, c, d])

    for W in (zs[0], zs[-1]):
        add_face(xs, ys, W, [0, 1, 2])
    for W in (ys[0], ys[-1]):
        add_face(xs, zs, W, [0, 2, 1])
    for W in (xs[0], xs[-1]):
        add_face(ys, zs, W, [2, 0, 1])

    v = np.vstack(pts)
    scale = max(lx, ly, lz)
    keys = np.round(v / scale * 1e9).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    return mesh_from_arrays(v[first], inverse.reshape(-1)[np.array(faces)])


def write_off(mesh: TriangleMesh, path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, 'w', encoding='utf-8') as f:
        f.write("OFF\n")
        f.write(f"{mesh.n_vertices} {mesh.n_faces} 0\n")
        for x, y, z in mesh.vertices:
            f.write(f"{x:.17g} {y:.17g} {z:.17g}\n")
        for a, b, c in mesh.triangles:
            f.write(f"3 {a} {b} {c}\n")
    return path


def write_msh2(mesh: TriangleMesh, path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, 'w', encoding='utf-8') as f:
        f.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        f.write(f"$Nodes\n{mesh.n_vertices}\n")
        for i, (x, y, z) in enumerate(mesh.vertices, start=1):
            f.write(f"{i} {x:.17g} {y:.17g} {z:.17g}\n")
        f.write("$EndNodes\n")
        f.write(f"$Elements\n{mesh.n_faces}\n")
        for i, (a, b, c) in enumerate(mesh.triangles, start=1):
            f.write(f"{i} 2 2 1 1 {a + 1} {b + 1} {c + 1}\n")
        f.write("$EndElements\n")
    return path
