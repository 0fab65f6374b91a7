"""Graph symmetry utilities.

Automorphism groups of small adjacency matrices (exhaustive backtracking
with degree pruning, or direct construction for complete graphs, cycles,
and stars), orbit partitions, transitivity and regularity tests,
orbit-averaging of primal points and multiplier vectors, invariance checks,
and the spectral chromatic lower bound.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .designsdp import PrimalPoint
from .envmodel import Environment
from .matcore import _check_finite, sym


class TooLarge(ValueError):
    pass


class EnvironmentNotInvariant(ValueError):
    pass


@dataclass(frozen=True)
class AutomorphismGroup:
    n: int
    permutations: tuple  # tuples of length n, identity included

    def __post_init__(self):
        perms = {tuple(p) for p in self.permutations}
        ident = tuple(range(self.n))
        if ident not in perms:
            raise ValueError("identity permutation missing")
        for p in perms:
            inv = tuple(np.argsort(p))
            if inv not in perms:
                raise ValueError("group not closed under inverse")
        for p in perms:
            for q in perms:
                comp = tuple(p[q[i]] for i in range(self.n))
                if comp not in perms:
                    raise ValueError("group not closed under composition")
        object.__setattr__(self, "permutations", tuple(sorted(perms)))

    def __len__(self):
        return len(self.permutations)


def _preserves(G, p) -> bool:
    n = G.shape[0]
    for i in range(n):
        for j in range(n):
            if G[i, j] != G[p[i], p[j]]:
                return False
    return True


def automorphisms(G) -> AutomorphismGroup:
    """Exact automorphism group by backtracking search (n <= 10)."""
    G = _check_finite(G, "G")
    n = G.shape[0]
    if n > 10:
        raise TooLarge("exhaustive search limited to n <= 10")
    indeg = G.sum(axis=0)
    outdeg = G.sum(axis=1)
    found = []

    def extend(partial):
        k = len(partial)
        if k == n:
            found.append(tuple(partial))
            return
        used = set(partial)
        for cand in range(n):
            if cand in used:
                continue
            if indeg[cand] != indeg[k] or outdeg[cand] != outdeg[k]:
                continue
            ok = True
            for j in range(k):
                if G[k, j] != G[cand, partial[j]] or G[j, k] != G[partial[j], cand]:
                    ok = False
                    break
            if ok:
                extend(partial + [cand])

    extend([])
    return AutomorphismGroup(n=n, permutations=tuple(found))


def _first_automorphism(G, indeg, outdeg, partial, n):
    k = len(partial)
    if k == n:
        return tuple(partial)
    used = set(partial)
    for cand in range(n):
        if cand in used:
            continue
        if indeg[cand] != indeg[k] or outdeg[cand] != outdeg[k]:
            continue
        ok = True
        for j in range(k):
            if G[k, j] != G[cand, partial[j]] or G[j, k] != G[partial[j], cand]:
                ok = False
                break
        if ok:
            res = _first_automorphism(G, indeg, outdeg, partial + [cand], n)
            if res is not None:
                return res
    return None


def is_vertex_transitive(G) -> bool:
    """Vertex transitivity without enumerating the whole group.

    Searches for a single automorphism carrying vertex 0 to each other
    vertex, so large groups (complete graphs) stay cheap.
    """
    G = _check_finite(G, "G")
    n = G.shape[0]
    indeg = G.sum(axis=0)
    outdeg = G.sum(axis=1)
    for v in range(1, n):
        if indeg[v] != indeg[0] or outdeg[v] != outdeg[0]:
            return False
        if _first_automorphism(G, indeg, outdeg, [v], n) is None:
            return False
    return True


def complete_group(n) -> AutomorphismGroup:
    """All n! permutations (the complete graph's group)."""
    if n > 10:
        raise TooLarge("n <= 10")
    return AutomorphismGroup(n=n, permutations=tuple(itertools.permutations(range(n))))


def cycle_group(n) -> AutomorphismGroup:
    """The dihedral group of rotations and reflections of an n-cycle."""
    perms = []
    base = list(range(n))
    for shift in range(n):
        rot = tuple((i + shift) % n for i in base)
        perms.append(rot)
        perms.append(tuple(rot[::-1]))
    return AutomorphismGroup(n=n, permutations=tuple(set(perms)))


def star_group(n) -> AutomorphismGroup:
    """Permutations fixing the hub (node 0) of a star on n nodes."""
    if n - 1 > 9:
        raise TooLarge("n <= 10")
    perms = [(0,) + p for p in itertools.permutations(range(1, n))]
    return AutomorphismGroup(n=n, permutations=tuple(perms))


def orbits(group: AutomorphismGroup):
    """Orbit partition of the vertex set, blocks sorted by representative."""
    n = group.n
    seen = [False] * n
    parts = []
    for i in range(n):
        if seen[i]:
            continue
        block = sorted({p[i] for p in group.permutations})
        for j in block:
            seen[j] = True
        parts.append(tuple(block))
    return parts


def is_transitive(group: AutomorphismGroup) -> bool:
    return len(orbits(group)) == 1


def degree_profile(G):
    G = _check_finite(G, "G")
    indeg = G.sum(axis=0)
    outdeg = G.sum(axis=1)
    regular = bool(np.allclose(indeg, indeg[0]) and np.allclose(outdeg, outdeg[0])
                   and np.isclose(indeg[0], outdeg[0]))
    return {
        "in": indeg,
        "out": outdeg,
        "regular": regular,
        "d": float(indeg[0]) if regular else None,
    }


def _perm_matrix(p):
    n = len(p)
    P = np.zeros((n, n))
    for i, j in enumerate(p):
        P[j, i] = 1.0
    return P


def invariance_check(M, group: AutomorphismGroup, tol: float = 1e-8) -> bool:
    """True iff P M P.T = M entrywise within tol for every group element."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    for p in group.permutations:
        P = _perm_matrix(p)
        if np.max(np.abs(P @ M @ P.T - M)) > tol:
            return False
    return True


def check_env_invariant(env: Environment, group: AutomorphismGroup,
                        tol: float = 1e-8):
    """The averaging argument needs V, W, Z (and Q, R) permutation-invariant."""
    if env.m != env.n:
        raise EnvironmentNotInvariant("averaging requires one state per agent")
    for name, M in (("Q", env.Q), ("R", env.R), ("V", env.V), ("W", env.W),
                    ("Z", env.Z)):
        if not invariance_check(M, group, tol):
            raise EnvironmentNotInvariant(f"{name} is not invariant")


def symmetrize(obj, group: AutomorphismGroup, env: Environment = None):
    """Average a primal point, multiplier vector, or matrix over the group.

    Averaging preserves primal feasibility and the designer value in
    invariant environments, and produces a group-invariant object.
    """
    if env is not None:
        check_env_invariant(env, group)
    k = len(group)
    if isinstance(obj, PrimalPoint):
        X = np.zeros_like(obj.X)
        Y = np.zeros_like(obj.Y)
        for p in group.permutations:
            P = _perm_matrix(p)
            X += P @ obj.X @ P.T
            Y += P @ obj.Y @ P.T
        return PrimalPoint(X=sym(X / k), Y=Y / k)
    obj = np.asarray(obj, dtype=float)
    if obj.ndim == 1:
        out = np.zeros_like(obj)
        for p in group.permutations:
            P = _perm_matrix(p)
            out += P @ obj
        return out / k
    out = np.zeros_like(obj)
    for p in group.permutations:
        P = _perm_matrix(p)
        out += P @ obj @ P.T
    return out / k


def hoffman_bound(G) -> float:
    """Spectral lower bound 1 - d / mu_min on the chromatic number of a
    regular graph; also controls the full-disclosure cutoff."""
    G = _check_finite(G, "G")
    prof = degree_profile(G)
    if not prof["regular"] or not prof["d"]:
        raise ValueError("requires a regular graph with positive degree")
    mu_min = float(np.linalg.eigvalsh(sym(G))[0])
    if mu_min >= 0:
        raise ValueError("requires a negative smallest eigenvalue")
    return 1.0 - prof["d"] / mu_min
