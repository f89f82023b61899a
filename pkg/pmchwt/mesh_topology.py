"""
Mallas triangulares cerradas: lectura, validación, orientación, conectividad
y refinamiento baricéntrico
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from pmchwt.errors import (DegenerateTriangleError, MeshParseError, MultiComponentError,
                           NonOrientableError, OpenSurfaceError, UnsupportedElementError)

logger = logging.getLogger(__name__)

# Tipos de elemento Gmsh v2 que se ignoran (puntos y líneas de grupos físicos)
GMSH_IGNORED_TYPES = {1, 15}
GMSH_TRIANGLE = 2


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Malla de triángulos planos con orientación exterior consistente"""

    vertices: np.ndarray
    triangles: np.ndarray
    characteristic_length: float

    @cached_property
    def corners(self) -> np.ndarray:
        """Vértices de cada triángulo, forma (N_f, 3, 3)"""
        return self.vertices[self.triangles]

    @cached_property
    def raw_normals(self) -> np.ndarray:
        c = self.corners
        return np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.raw_normals, axis=1)

    @cached_property
    def normals(self) -> np.ndarray:
        return self.raw_normals / (2.0 * self.areas[:, None])

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.corners.mean(axis=1)

    @cached_property
    def diameters(self) -> np.ndarray:
        c = self.corners
        lengths = np.linalg.norm(c[:, [1, 2, 0]] - c, axis=2)
        return lengths.max(axis=1)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.triangles)

    def signed_volume(self) -> float:
        c = self.corners
        return float(np.einsum('ij,ij->i', c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)

    def total_area(self) -> float:
        return float(self.areas.sum())

    def mean_edge_length(self) -> float:
        c = self.corners
        return float(np.linalg.norm(c[:, [1, 2, 0]] - c, axis=2).mean())

    def transformed(self, rotation: Optional[np.ndarray] = None,
                    translation: Optional[np.ndarray] = None,
                    scale: float = 1.0) -> 'TriangleMesh':
        """Copia rígida (y escalada) de la malla; la topología no cambia"""
        v = self.vertices * scale
        if rotation is not None:
            v = v @ np.asarray(rotation).T
        if translation is not None:
            v = v + np.asarray(translation)
        return TriangleMesh(v, self.triangles.copy(), self.characteristic_length * scale)


@dataclass(frozen=True, eq=False)
class MeshConnectivity:
    """Aristas canónicas, incidencia arista-triángulo y género"""

    mesh: TriangleMesh
    edges: np.ndarray
    edge_to_triangles: np.ndarray
    triangle_edges: np.ndarray
    triangle_edge_signs: np.ndarray
    genus: int

    @property
    def n_vertices(self) -> int:
        return self.mesh.n_vertices

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_faces(self) -> int:
        return self.mesh.n_faces

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        v = self.mesh.vertices
        return np.linalg.norm(v[self.edges[:, 1]] - v[self.edges[:, 0]], axis=1)

    def edge_index(self, a: int, b: int) -> int:
        """Índice de la arista {a, b}; KeyError si no existe"""
        return self._edge_lookup[(min(a, b), max(a, b))]

    @cached_property
    def _edge_lookup(self) -> Dict[Tuple[int, int], int]:
        return {(int(a), int(b)): i for i, (a, b) in enumerate(self.edges)}


@dataclass(frozen=True, eq=False)
class BarycentricRefinement:
    """Refinamiento baricéntrico (6 hijos por triángulo) con mapas al padre"""

    parent: TriangleMesh
    mesh: TriangleMesh
    child_parent: np.ndarray
    # 0 = vértice primal, 1 = punto medio de arista, 2 = baricentro de cara
    vertex_kind: np.ndarray
    vertex_origin: np.ndarray
    parent_edges: np.ndarray = field(repr=False)


def _half_edges(triangles: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Medias aristas (claves canónicas, sentido, triángulo, índice local opuesto)"""
    start = triangles[:, [1, 2, 0]].reshape(-1)
    end = triangles[:, [2, 0, 1]].reshape(-1)
    keys = np.stack([np.minimum(start, end), np.maximum(start, end)], axis=1)
    forward = start < end
    tri = np.repeat(np.arange(len(triangles)), 3)
    local = np.tile(np.arange(3), len(triangles))
    return keys, forward, tri, local


def unique_edges(triangles: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Aristas únicas ordenadas, arista opuesta a cada vértice local y conteos"""
    keys, _, _, _ = _half_edges(triangles)
    edges, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    return edges, inverse.reshape(-1, 3), counts


def characteristic_length(vertices: np.ndarray) -> float:
    """Diámetro de la caja envolvente"""
    return float(np.linalg.norm(vertices.max(axis=0) - vertices.min(axis=0)))


def _orient(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Orientación consistente por inundación y volteo global según el volumen"""
    keys, forward, tri, _ = _half_edges(triangles)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    if np.any(counts != 2):
        bad = int(np.sum(counts != 2))
        raise OpenSurfaceError(f"{bad} aristas no están compartidas por exactamente 2 triángulos")

    order = np.argsort(inverse, kind='stable')
    pairs = order.reshape(-1, 2)
    t1, t2 = tri[pairs[:, 0]], tri[pairs[:, 1]]
    # +1 si recorren la arista en sentidos opuestos (consistentes)
    rel = np.where(forward[pairs[:, 0]] != forward[pairs[:, 1]], 1, -1)

    n_f = len(triangles)
    adjacency = sparse.coo_matrix((np.ones(len(t1)), (t1, t2)), shape=(n_f, n_f))
    adjacency = (adjacency + adjacency.T).tocsr()
    n_comp, _ = connected_components(adjacency, directed=False)
    if n_comp != 1:
        raise MultiComponentError(f"La malla tiene {n_comp} componentes conexas; se admite un solo cuerpo")

    neighbours = [[] for _ in range(n_f)]
    for a, b, r in zip(t1, t2, rel):
        neighbours[a].append((b, r))
        neighbours[b].append((a, r))

    c = vertices[triangles]
    normals = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    seed = int(np.argmax(normals[:, 2]))

    state = np.zeros(n_f, dtype=int)
    state[seed] = 1
    queue = deque([seed])
    while queue:
        t = queue.popleft()
        for nb, r in neighbours[t]:
            if state[nb] == 0:
                state[nb] = state[t] * r
                queue.append(nb)

    if np.any(state[t1] * state[t2] * rel != 1):
        raise NonOrientableError("La superficie no es orientable")

    oriented = triangles.copy()
    flip = state < 0
    if flip.any():
        logger.info(f"Reorientados {int(flip.sum())} triángulos")
        oriented[flip] = oriented[flip][:, [0, 2, 1]]

    c = vertices[oriented]
    volume = np.einsum('ij,ij->i', c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0
    if volume < 0:
        logger.info("Volumen con signo negativo: se invierte la orientación global")
        oriented = oriented[:, [0, 2, 1]]
    return oriented


def mesh_from_arrays(vertices, triangles) -> TriangleMesh:
    """Construye una malla validada y orientada a partir de arreglos"""
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise MeshParseError("Los vértices deben tener forma (N, 3)")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshParseError("Los triángulos deben tener forma (M, 3)")
    if triangles.size == 0:
        raise MeshParseError("La malla no contiene triángulos")
    if triangles.min() < 0 or triangles.max() >= len(vertices):
        raise MeshParseError("Índices de vértice fuera de rango")

    # Vértices libres fuera
    used = np.unique(triangles)
    if len(used) != len(vertices):
        remap = -np.ones(len(vertices), dtype=np.int64)
        remap[used] = np.arange(len(used))
        vertices = vertices[used]
        triangles = remap[triangles]

    length = characteristic_length(vertices)
    c = vertices[triangles]
    areas = 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)
    degenerate = areas <= 1e-14 * length ** 2
    if degenerate.any():
        raise DegenerateTriangleError(f"{int(degenerate.sum())} triángulos degenerados")

    oriented = _orient(vertices, triangles)
    return TriangleMesh(vertices, oriented, length)


def _read_off(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    tokens = []
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            line = line.split('#', 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if not tokens or not tokens[0].endswith('OFF'):
        raise MeshParseError(f"{path}: falta la cabecera OFF")
    rest = tokens[1:] if tokens[0] == 'OFF' else [tokens[0][3:]] + tokens[1:]
    try:
        n_v, n_f = int(rest[0]), int(rest[1])
        pos = 3
        vertices = np.array(rest[pos:pos + 3 * n_v], dtype=float).reshape(n_v, 3)
        pos += 3 * n_v
        faces = []
        for _ in range(n_f):
            k = int(rest[pos])
            if k != 3:
                raise UnsupportedElementError(f"{path}: cara con {k} vértices; solo se admiten triángulos")
            faces.append([int(x) for x in rest[pos + 1:pos + 4]])
            pos += 1 + k
    except (IndexError, ValueError) as e:
        raise MeshParseError(f"{path}: archivo OFF mal formado ({e})")
    return vertices, np.array(faces, dtype=np.int64)


def _read_msh2(path: Path) -> Tuple[np.ndarray, np.ndarray]:
    with open(path, 'r', encoding='utf-8') as f:
        lines = [line.strip() for line in f]

    def section(name: str):
        try:
            start = lines.index(f"${name}")
            end = lines.index(f"$End{name}", start)
        except ValueError:
            raise MeshParseError(f"{path}: falta la sección ${name}")
        return lines[start + 1:end]

    fmt = section('MeshFormat')
    if not fmt or not fmt[0].split()[0].startswith('2') or fmt[0].split()[1] != '0':
        raise MeshParseError(f"{path}: solo se admite MSH v2 ASCII")

    try:
        node_lines = section('Nodes')
        n_nodes = int(node_lines[0])
        ids = np.empty(n_nodes, dtype=np.int64)
        coords = np.empty((n_nodes, 3))
        for i, line in enumerate(node_lines[1:n_nodes + 1]):
            parts = line.split()
            ids[i] = int(parts[0])
            coords[i] = [float(x) for x in parts[1:4]]

        element_lines = section('Elements')
        n_elem = int(element_lines[0])
        faces = []
        for line in element_lines[1:n_elem + 1]:
            parts = [int(x) for x in line.split()]
            etype, ntags = parts[1], parts[2]
            if etype in GMSH_IGNORED_TYPES:
                continue
            if etype != GMSH_TRIANGLE:
                raise UnsupportedElementError(f"{path}: elemento Gmsh tipo {etype} no soportado; solo triángulos lineales")
            faces.append(parts[3 + ntags:6 + ntags])
    except (IndexError, ValueError) as e:
        raise MeshParseError(f"{path}: archivo MSH mal formado ({e})")

    lookup = {int(node_id): i for i, node_id in enumerate(ids)}
    try:
        triangles = np.array([[lookup[n] for n in face] for face in faces], dtype=np.int64)
    except KeyError as e:
        raise MeshParseError(f"{path}: el elemento referencia el nodo inexistente {e}")
    return coords, triangles.reshape(-1, 3)


def load_mesh(path: Union[str, Path], fmt: Optional[str] = None) -> TriangleMesh:
    """
    Lee una malla Gmsh MSH v2 ASCII u OFF y la valida

    Args:
        path: Ruta del archivo
        fmt: 'gmsh_msh_ascii' u 'off'; si falta se deduce de la extensión

    Returns:
        TriangleMesh cerrada con orientación exterior
    """
    path = Path(path)
    if not path.exists():
        raise MeshParseError(f"No existe el archivo de malla {path}", field='mesh.path')
    if fmt is None:
        fmt = 'off' if path.suffix.lower() == '.off' else 'gmsh_msh_ascii'
    if fmt == 'off':
        vertices, triangles = _read_off(path)
    elif fmt == 'gmsh_msh_ascii':
        vertices, triangles = _read_msh2(path)
    else:
        raise MeshParseError(f"Formato de malla desconocido: {fmt}", field='mesh.format')

    mesh = mesh_from_arrays(vertices, triangles)
    logger.info(f"Malla {path.name}: {mesh.n_vertices} vértices, {mesh.n_faces} triángulos")
    return mesh


def build_connectivity(mesh: TriangleMesh) -> MeshConnectivity:
    """Aristas canónicas (menor→mayor índice), triángulos más/menos y género"""
    edges, triangle_edges, counts = unique_edges(mesh.triangles)
    if np.any(counts != 2):
        raise OpenSurfaceError("La malla no es una superficie cerrada")

    # Arista local i va de triangles[:, i+1] a triangles[:, i+2]
    start = mesh.triangles[:, [1, 2, 0]]
    end = mesh.triangles[:, [2, 0, 1]]
    signs = np.where(start < end, 1, -1)

    n_e = len(edges)
    edge_to_triangles = -np.ones((n_e, 2), dtype=np.int64)
    tri_index = np.repeat(np.arange(mesh.n_faces), 3)
    flat_edges = triangle_edges.reshape(-1)
    flat_signs = signs.reshape(-1)
    plus = flat_signs > 0
    edge_to_triangles[flat_edges[plus], 0] = tri_index[plus]
    edge_to_triangles[flat_edges[~plus], 1] = tri_index[~plus]
    if np.any(edge_to_triangles < 0):
        raise NonOrientableError("Alguna arista no tiene un triángulo más y uno menos")

    chi = mesh.n_vertices - n_e + mesh.n_faces
    if chi % 2:
        raise NonOrientableError(f"Característica de Euler impar ({chi})")
    genus = (2 - chi) // 2
    return MeshConnectivity(mesh, edges, edge_to_triangles, triangle_edges, signs, genus)


def barycentric_refine(mesh: TriangleMesh) -> BarycentricRefinement:
    """Divide cada triángulo en 6 hijos conservando la orientación"""
    edges, triangle_edges, _ = unique_edges(mesh.triangles)
    n_v, n_e, n_f = mesh.n_vertices, len(edges), mesh.n_faces

    v = mesh.vertices
    midpoints = 0.5 * (v[edges[:, 0]] + v[edges[:, 1]])
    vertices = np.vstack([v, midpoints, mesh.centroids])

    t = mesh.triangles
    m = n_v + triangle_edges  # m[:, i] es el punto medio opuesto al vértice i
    c = n_v + n_e + np.arange(n_f)
    children = np.stack([
        np.stack([t[:, 0], m[:, 2], c], axis=1),
        np.stack([m[:, 2], t[:, 1], c], axis=1),
        np.stack([t[:, 1], m[:, 0], c], axis=1),
        np.stack([m[:, 0], t[:, 2], c], axis=1),
        np.stack([t[:, 2], m[:, 1], c], axis=1),
        np.stack([m[:, 1], t[:, 0], c], axis=1),
    ], axis=1).reshape(-1, 3)

    vertex_kind = np.concatenate([np.zeros(n_v, int), np.ones(n_e, int), np.full(n_f, 2)])
    vertex_origin = np.concatenate([np.arange(n_v), np.arange(n_e), np.arange(n_f)])
    refined = TriangleMesh(vertices, children, mesh.characteristic_length)
    return BarycentricRefinement(mesh, refined, np.repeat(np.arange(n_f), 6),
                                 vertex_kind, vertex_origin, edges)


def winding_numbers(mesh: TriangleMesh, points: np.ndarray) -> np.ndarray:
    """Suma de ángulos sólidos / 4π: ≈1 en el interior y ≈0 en el exterior"""
    points = np.atleast_2d(points)
    total = np.zeros(len(points))
    c = mesh.corners
    for start in range(0, len(points), 256):
        p = points[start:start + 256]
        a = c[None, :, 0, :] - p[:, None, :]
        b = c[None, :, 1, :] - p[:, None, :]
        d = c[None, :, 2, :] - p[:, None, :]
        la, lb, ld = (np.linalg.norm(x, axis=2) for x in (a, b, d))
        numerator = np.einsum('pfj,pfj->pf', a, np.cross(b, d))
        denominator = (la * lb * ld + np.einsum('pfj,pfj->pf', a, b) * ld
                       + np.einsum('pfj,pfj->pf', a, d) * lb + np.einsum('pfj,pfj->pf', b, d) * la)
        total[start:start + 256] = (2.0 * np.arctan2(numerator, denominator)).sum(axis=1) / (4 * np.pi)
    return total


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    t = np.clip(np.einsum('...j,...j->...', p - a, ab) / np.einsum('...j,...j->...', ab, ab), 0.0, 1.0)
    return np.linalg.norm(p - (a + t[..., None] * ab), axis=-1)


def distance_to_surface(mesh: TriangleMesh, points: np.ndarray) -> np.ndarray:
    """Distancia euclídea mínima de cada punto a la malla"""
    points = np.atleast_2d(points)
    out = np.empty(len(points))
    c, n = mesh.corners, mesh.normals
    for start in range(0, len(points), 256):
        p = points[start:start + 256, None, :]
        height = np.einsum('pfj,fj->pf', p - c[None, :, 0], n)
        foot = p - height[..., None] * n[None]
        inside = np.ones(height.shape, dtype=bool)
        for i in range(3):
            edge = c[:, (i + 1) % 3] - c[:, i]
            side = np.einsum('pfj,fj->pf', np.cross(edge[None], foot - c[None, :, i]), n)
            inside &= side >= 0
        edges = np.stack([_segment_distance(p, c[None, :, i], c[None, :, (i + 1) % 3])
                          for i in range(3)], axis=-1).min(axis=-1)
        dist = np.where(inside, np.abs(height), edges)
        out[start:start + 256] = dist.min(axis=1)
    return out
