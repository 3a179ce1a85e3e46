"""Area adjacency graphs and scaled ICAR precision structure.

An :class:`AreaGraph` fixes the canonical area ordering used everywhere
else in the package: row ``i`` of any area-indexed vector or matrix refers
to ``graph.names[i]``.  The intrinsic CAR precision built from it is
singular, so :func:`scale_icar` also carries the eigendecomposition needed
to draw sum-to-zero samples and to evaluate generalized inverses.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "AreaGraph",
    "ScaledIcarPrecision",
    "build_graph",
    "icar_precision",
    "scale_icar",
    "sample_icar",
    "read_adjacency",
    "read_area_names",
]

# Relative cutoff below which an eigenvalue of the ICAR precision is
# treated as structurally zero (one zero per connected component).
ZERO_EIGENVALUE_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class AreaGraph:
    """Undirected adjacency structure over a fixed list of areas.

    Parameters
    ----------
    names : tuple of str
        Area identifiers in canonical order.  Index ``i`` in every
        area-indexed array produced by this package refers to ``names[i]``.
    neighbors : tuple of tuple of int
        ``neighbors[i]`` holds the sorted indices adjacent to area ``i``.
    components : numpy.ndarray
        Integer label of the connected component of each area.  Labels are
        assigned in order of first appearance, starting at zero.
    """

    names: tuple[str, ...]
    neighbors: tuple[tuple[int, ...], ...]
    components: np.ndarray = field(repr=False)

    @property
    def n_areas(self) -> int:
        return len(self.names)

    @property
    def n_components(self) -> int:
        return int(self.components.max()) + 1 if len(self.names) else 0

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown area name: {name!r}") from None

    def degrees(self) -> np.ndarray:
        return np.array([len(nb) for nb in self.neighbors], dtype=float)

    def adjacency_matrix(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency matrix in canonical order."""
        a = len(self.names)
        w = np.zeros((a, a))
        for i, nbs in enumerate(self.neighbors):
            for j in nbs:
                w[i, j] = 1.0
        return w

    def edges(self) -> list[tuple[int, int]]:
        """Each undirected edge once, as an (i, j) pair with i < j."""
        out = []
        for i, nbs in enumerate(self.neighbors):
            out.extend((i, j) for j in nbs if i < j)
        return out


@dataclass(frozen=True, eq=False)
class ScaledIcarPrecision:
    """ICAR precision rescaled so the latent field has unit typical variance.

    ``q_star = scale_factor * q_raw`` where the factor is chosen so the
    geometric mean of the marginal variances of the sum-to-zero constrained
    field equals one.  For a graph with several components the scaling is
    applied per component and ``scale_factor`` holds one value per
    component; for the usual connected case it is a plain float.

    ``eigenvalues``/``eigenvectors`` decompose ``q_star``.  Eigenvectors
    with (numerically) zero eigenvalue span the per-component constant
    directions that the sum-to-zero constraint removes.
    """

    q_star: np.ndarray = field(repr=False)
    scale_factor: float | np.ndarray
    rank_deficiency: int
    components: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)

    @property
    def n_areas(self) -> int:
        return self.q_star.shape[0]

    def generalized_inverse(self) -> np.ndarray:
        """Moore-Penrose inverse of ``q_star`` (covariance of the constrained field)."""
        pos = self.eigenvalues > 0
        v = self.eigenvectors[:, pos]
        return (v / self.eigenvalues[pos]) @ v.T

    def marginal_variances(self) -> np.ndarray:
        pos = self.eigenvalues > 0
        v = self.eigenvectors[:, pos]
        return np.einsum("ij,ij->i", v, v / self.eigenvalues[pos])


def build_graph(adjacency, areas) -> AreaGraph:
    """Validate adjacency input against an area universe and build the graph.

    Parameters
    ----------
    adjacency : iterable of pairs or mapping
        Either an iterable of ``(name_a, name_b)`` edge pairs, or a mapping
        from each area name to an iterable of neighbor names.  A mapping
        that is not symmetric (``a`` lists ``b`` but not vice versa) is
        symmetrized with a warning.  Duplicate edges are collapsed.
    areas : sequence of str
        Full area universe in canonical order.  Every name appearing in
        ``adjacency`` must belong to it.

    Raises
    ------
    ValidationError
        On an unknown or duplicated area name, a self-loop, or fewer than
        two areas.
    """
    names = tuple(str(a) for a in areas)
    if len(names) < 2:
        raise ValidationError(f"need at least 2 areas, got {len(names)}")
    if len(set(names)) != len(names):
        seen, dups = set(), set()
        for n in names:
            (dups if n in seen else seen).add(n)
        raise ValidationError(f"duplicate area names: {sorted(dups)}")
    index = {n: i for i, n in enumerate(names)}

    def to_idx(name):
        try:
            return index[str(name)]
        except KeyError:
            raise ValidationError(f"unknown area name in adjacency: {name!r}") from None

    edge_set: set[tuple[int, int]] = set()
    if hasattr(adjacency, "items"):
        listed: set[tuple[int, int]] = set()
        for a, nbs in adjacency.items():
            ia = to_idx(a)
            for b in nbs:
                listed.add((ia, to_idx(b)))
        asymmetric = sorted(
            (i, j) for i, j in listed if (j, i) not in listed
        )
        if asymmetric:
            shown = ", ".join(
                f"{names[i]}->{names[j]}" for i, j in asymmetric[:5]
            )
            warnings.warn(
                f"adjacency is not symmetric ({len(asymmetric)} one-way "
                f"entries, e.g. {shown}); symmetrizing",
                stacklevel=2,
            )
        pairs = listed
    else:
        pairs = {(to_idx(a), to_idx(b)) for a, b in adjacency}

    for i, j in pairs:
        if i == j:
            raise ValidationError(f"self-loop on area {names[i]!r}")
        edge_set.add((min(i, j), max(i, j)))

    nbr: list[set[int]] = [set() for _ in names]
    for i, j in edge_set:
        nbr[i].add(j)
        nbr[j].add(i)

    components = _label_components(nbr)
    return AreaGraph(
        names=names,
        neighbors=tuple(tuple(sorted(s)) for s in nbr),
        components=components,
    )


def _label_components(nbr: list[set[int]]) -> np.ndarray:
    labels = np.full(len(nbr), -1, dtype=np.int64)
    current = 0
    for start in range(len(nbr)):
        if labels[start] >= 0:
            continue
        labels[start] = current
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for j in nbr[i]:
                if labels[j] < 0:
                    labels[j] = current
                    queue.append(j)
        current += 1
    return labels


def icar_precision(graph: AreaGraph) -> np.ndarray:
    """Raw intrinsic CAR precision ``Q = D - W``.

    ``D`` is the diagonal matrix of neighbor counts and ``W`` the 0/1
    adjacency matrix.  ``Q`` is symmetric positive semidefinite with one
    zero eigenvalue per connected component.
    """
    w = graph.adjacency_matrix()
    return np.diag(w.sum(axis=1)) - w


def scale_icar(q: np.ndarray, *, allow_components: bool = False) -> ScaledIcarPrecision:
    """Rescale a raw ICAR precision to unit typical marginal variance.

    The marginal variances of the sum-to-zero constrained field are the
    diagonal of the generalized inverse of ``q``.  The precision is
    multiplied by their geometric mean, so that after scaling the geometric
    mean of the marginal variances is exactly one and the interpretation of
    the field's standard deviation parameter is comparable across graphs.

    Parameters
    ----------
    q : numpy.ndarray
        Symmetric PSD precision with zero row sums, as produced by
        :func:`icar_precision`.
    allow_components : bool
        A disconnected graph is rejected by default.  When true, each
        connected component is scaled separately (and the constrained field
        sums to zero within every component); ``scale_factor`` is then an
        array with one entry per component.

    Raises
    ------
    ValidationError
        If ``q`` is not square/symmetric, has nonzero row sums, or is
        disconnected while ``allow_components`` is false.
    """
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValidationError(f"precision must be square, got shape {q.shape}")
    if not np.allclose(q, q.T, atol=1e-10):
        raise ValidationError("precision must be symmetric")
    a = q.shape[0]
    row_sums = q.sum(axis=1)
    if np.max(np.abs(row_sums)) > 1e-8 * max(1.0, np.max(np.abs(q))):
        raise ValidationError("precision rows must sum to zero (Q = D - W)")

    components = _components_from_precision(q)
    n_comp = int(components.max()) + 1
    if n_comp > 1 and not allow_components:
        raise ValidationError(
            f"graph has {n_comp} connected components; pass "
            "allow_components=True to scale each component separately"
        )

    q_star = np.zeros_like(q)
    evals = np.zeros(a)
    evecs = np.zeros((a, a))
    factors = np.zeros(n_comp)
    for c in range(n_comp):
        idx = np.flatnonzero(components == c)
        block = q[np.ix_(idx, idx)]
        lam, vec = np.linalg.eigh(block)
        cutoff = ZERO_EIGENVALUE_RTOL * lam.max() if lam.max() > 0 else np.inf
        zero = np.abs(lam) < cutoff
        if zero.sum() != 1:
            raise ValidationError(
                f"component of size {len(idx)} has rank deficiency "
                f"{int(zero.sum())}, expected 1; adjacency is malformed"
            )
        lam = np.where(zero, 0.0, lam)
        if np.any(lam < 0):
            raise ValidationError("precision has a negative eigenvalue")
        # Marginal variances under the sum-to-zero constraint: diagonal of
        # the generalized inverse restricted to the nonzero eigenspace.
        pos = lam > 0
        margvar = np.einsum("ij,ij->i", vec[:, pos], vec[:, pos] / lam[pos])
        gm = float(np.exp(np.mean(np.log(margvar))))
        factors[c] = gm
        q_star[np.ix_(idx, idx)] = block * gm
        evals[idx] = lam * gm
        for k, col in enumerate(idx):
            evecs[idx, col] = vec[:, k]

    order = np.argsort(evals, kind="stable")
    evals = evals[order]
    evecs = evecs[:, order]
    scale: float | np.ndarray = float(factors[0]) if n_comp == 1 else factors
    return ScaledIcarPrecision(
        q_star=q_star,
        scale_factor=scale,
        rank_deficiency=n_comp,
        components=components,
        eigenvalues=evals,
        eigenvectors=evecs,
    )


def _components_from_precision(q: np.ndarray) -> np.ndarray:
    nbr = [set(np.flatnonzero(q[i] != 0.0)) - {i} for i in range(q.shape[0])]
    return _label_components(nbr)


def sample_icar(
    prec: ScaledIcarPrecision, rng: np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Draw sum-to-zero constrained samples of the scaled ICAR field.

    Samples are built in the nonzero eigenspace of ``q_star``, which
    enforces the per-component sum-to-zero constraint exactly.  Returns an
    array of shape ``(n_areas,)``, or ``(size, n_areas)`` when ``size`` is
    given.
    """
    pos = prec.eigenvalues > 0
    v = prec.eigenvectors[:, pos]
    n = (size,) if size is not None else ()
    z = rng.standard_normal(n + (int(pos.sum()),))
    return (z / np.sqrt(prec.eigenvalues[pos])) @ v.T


def read_adjacency(path) -> list[tuple[str, str]]:
    """Read an edge list: one edge per line, two tab-separated area names.

    Blank lines and lines starting with ``#`` are skipped.  Malformed lines
    raise :class:`ValidationError` with the offending line number.
    """
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ValidationError(
                    f"{path}:{lineno}: expected two tab-separated area names, "
                    f"got {line!r}"
                )
            edges.append((parts[0], parts[1]))
    return edges


def read_area_names(path) -> list[str]:
    """Read the area universe: one area name per line, in canonical order."""
    names = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            names.append(line)
    if not names:
        raise ValidationError(f"{path}: no area names found")
    return names
