"""Truncated D-vine copulas: structure selection, fitting, and transforms.

A D-vine of dimension ``d`` is a sequence of path trees.  Tree ``t`` has
edges ``e = 1..d-t``; edge ``(t, e)`` couples path positions ``(e, e+t)``
given the block between them.  Positions refer to ``order``: position ``k``
holds the original column ``order[k-1]``.  Trees beyond ``trunc_level`` are
the independence copula and are never stored.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import kendalltau

from .errors import DegenerateData, DimensionError, DomainError
from .pair_copula import (COND_ON_FIRST, COND_ON_SECOND, EdgePenalty,
                          INDEPENDENCE, PairCopulaSpec, hfunc, hinv,
                          select_pair_family)


@dataclass(frozen=True)
class DVineModel:
    """A fitted (possibly truncated) D-vine copula."""

    order: tuple                 # original column index at each path position
    trunc_level: int             # number of estimated trees
    trees: tuple                 # trees[t-1][e-1] -> PairCopulaSpec, t <= trunc_level
    n_fit: int = 0

    @property
    def dim(self):
        return len(self.order)

    def pair(self, tree, position):
        """Copula at (tree, position), independence beyond the truncation."""
        if not (1 <= tree <= self.dim - 1) or not (1 <= position <= self.dim - tree):
            raise DimensionError(f"no edge at tree {tree}, position {position}")
        if tree > self.trunc_level:
            return INDEPENDENCE
        return self.trees[tree - 1][position - 1]

    @property
    def n_params(self):
        return sum(spec.n_params for tree in self.trees for spec in tree)

    @property
    def loglik(self):
        total = 0.0
        for tree in self.trees:
            for spec in tree:
                if spec.loglik is not None:
                    total += spec.loglik
        return total

    def to_dict(self):
        edges = []
        for t, tree in enumerate(self.trees, start=1):
            for e, spec in enumerate(tree, start=1):
                entry = {"tree": t, "position": e, "copula": spec.to_dict()}
                if spec.loglik is not None:
                    entry["loglik"] = spec.loglik
                edges.append(entry)
        return {"dim": self.dim, "order": list(int(o) for o in self.order),
                "trunc_level": int(self.trunc_level), "n_fit": int(self.n_fit),
                "edges": edges}

    @classmethod
    def from_dict(cls, d):
        dim = int(d["dim"])
        trunc = int(d["trunc_level"])
        trees = [[INDEPENDENCE] * (dim - t) for t in range(1, trunc + 1)]
        for entry in d.get("edges", ()):
            spec = PairCopulaSpec.from_dict(entry["copula"])
            if "loglik" in entry:
                spec = PairCopulaSpec(spec.family, spec.rotation, spec.params,
                                      loglik=float(entry["loglik"]))
            trees[int(entry["tree"]) - 1][int(entry["position"]) - 1] = spec
        return cls(order=tuple(int(o) for o in d["order"]), trunc_level=trunc,
                   trees=tuple(tuple(tr) for tr in trees),
                   n_fit=int(d.get("n_fit", 0)))

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, source):
        try:
            data = json.loads(source)
        except (json.JSONDecodeError, TypeError):
            with open(source) as fh:
                data = json.load(fh)
        return cls.from_dict(data)


def _check_copula_matrix(U, d=None):
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[None, :]
    if np.any(U <= 0.0) or np.any(U >= 1.0) or np.any(~np.isfinite(U)):
        raise DomainError("matrix entries must lie strictly inside (0, 1)")
    if d is not None and U.shape[1] != d:
        raise DimensionError(f"expected {d} columns, got {U.shape[1]}")
    return U


def kendall_tau_matrix(U):
    """Pairwise Kendall tau of the columns of U."""
    U = np.asarray(U, dtype=float)
    d = U.shape[1]
    taus = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            taus[i, j] = taus[j, i] = kendalltau(U[:, i], U[:, j]).statistic
    return taus


def _path_weight(path, W):
    return sum(W[path[i], path[i + 1]] for i in range(len(path) - 1))


def select_order(U):
    """Variable order maximizing the sum of |Kendall tau| over the path.

    Greedy farthest insertion on the |tau| graph followed by 2-opt segment
    reversals until no move improves; ties break on the smallest index, so
    the result is deterministic and invariant to row permutations of U.
    """
    U = np.asarray(U, dtype=float)
    n, d = U.shape
    if d < 2:
        return np.arange(d)
    if n < 10:
        raise DegenerateData("need at least 10 rows to order variables")
    for j in range(d):
        if np.ptp(U[:, j]) <= 0.0:
            raise DegenerateData(f"column {j} is constant")
    W = np.abs(kendall_tau_matrix(U))
    np.fill_diagonal(W, -np.inf)

    # seed with the strongest pair (lexicographic tie-break)
    best = (-np.inf, 0, 1)
    for i in range(d):
        for j in range(i + 1, d):
            if W[i, j] > best[0] + 1e-15:
                best = (W[i, j], i, j)
    path = [best[1], best[2]]
    remaining = [k for k in range(d) if k not in path]

    while remaining:
        # farthest insertion: strongest single link into the current path
        pick, pick_link = None, -np.inf
        for v in remaining:
            link = max(W[v, p] for p in path)
            if link > pick_link + 1e-15:
                pick, pick_link = v, link
        # best insertion position (ends or in between)
        cand = [(W[pick, path[0]], 0), (W[pick, path[-1]], len(path))]
        for i in range(len(path) - 1):
            gain = W[path[i], pick] + W[pick, path[i + 1]] - W[path[i], path[i + 1]]
            cand.append((gain, i + 1))
        cand.sort(key=lambda g: (-g[0], g[1]))
        path.insert(cand[0][1], pick)
        remaining.remove(pick)

    # 2-opt segment reversals until no strict improvement
    improved = True
    while improved:
        improved = False
        for i in range(len(path) - 1):
            for j in range(i + 1, len(path)):
                new = path[:i] + path[i:j + 1][::-1] + path[j + 1:]
                if _path_weight(new, W) > _path_weight(path, W) + 1e-12:
                    path = new
                    improved = True
    # canonical direction: first endpoint smaller than last
    if path[0] > path[-1]:
        path = path[::-1]
    return np.asarray(path, dtype=int)


def _tau_indep_test(u, v, level=0.05):
    """Asymptotic Kendall-tau independence test; True when independent."""
    from scipy.special import ndtri
    n = len(u)
    tau = kendalltau(u, v).statistic
    stat = math.sqrt(9.0 * n * (n - 1) / (2.0 * (2 * n + 5))) * abs(tau)
    return stat <= ndtri(1.0 - level / 2.0)


def _edge_candidates(families, u_pairs, rotation_policy):
    """Expand family names to (family, rotation) pairs for one edge."""
    cands = []
    from .families import FAMILIES
    tau_hat = kendalltau(u_pairs[:, 0], u_pairs[:, 1]).statistic
    for fam in families:
        if fam == "independence":
            continue
        if not FAMILIES[fam].rotatable:
            cands.append((fam, 0))
        elif rotation_policy == "all":
            cands.extend((fam, rot) for rot in (0, 90, 180, 270))
        else:  # "tau_sign": keep the orientations matching the sample tau
            rots = (0, 180) if tau_hat >= 0 else (90, 270)
            cands.extend((fam, rot) for rot in rots)
    return cands


DEFAULT_FAMILIES = ("gaussian", "studentt", "clayton", "gumbel", "frank", "joe")


def fit_dvine(U, order, trunc_level, candidates=DEFAULT_FAMILIES,
              criterion="mbicv", psi0=0.9, rotation_policy="tau_sign",
              indep_test=False):
    """Sequential tree-by-tree fit of a truncated D-vine.

    Tree 1 couples consecutive variables in ``order``; pseudo-observations
    for deeper trees come from the h-functions of the tree below.  Each
    edge's family is chosen by the penalized criterion among ``candidates``
    (family names); trees beyond ``trunc_level`` stay independence.
    """
    U = _check_copula_matrix(U)
    n, d = U.shape
    order = np.asarray(order, dtype=int)
    if sorted(order.tolist()) != list(range(d)):
        raise DimensionError("order must be a permutation of 0..d-1")
    if not (0 <= trunc_level <= d - 1):
        raise DimensionError(f"trunc_level must lie in [0, {d - 1}]")

    X = U[:, order]
    trees = []
    A = [X[:, e] for e in range(d)]        # F(x_e | mid block)
    B = [X[:, e + 1] for e in range(d - 1)]  # F(x_{e+t} | mid block)
    for t in range(1, trunc_level + 1):
        n_edges = d - t
        tree = []
        for e in range(n_edges):
            u_pairs = np.column_stack([A[e], B[e]])
            if indep_test and _tau_indep_test(A[e], B[e]):
                spec = INDEPENDENCE
            else:
                cands = _edge_candidates(candidates, u_pairs, rotation_policy)
                penalty = EdgePenalty(n=n, tree=t, psi0=psi0, kind=criterion)
                try:
                    spec = select_pair_family(u_pairs, cands, penalty)
                except Exception as err:
                    raise type(err)(f"tree {t}, position {e + 1}: {err}") from err
            tree.append(spec)
        trees.append(tuple(tree))
        if t < trunc_level:
            A_next = [hfunc(tree[e], COND_ON_SECOND, A[e], B[e])
                      for e in range(n_edges - 1)]
            B_next = [hfunc(tree[e + 1], COND_ON_FIRST, A[e + 1], B[e + 1])
                      for e in range(n_edges - 1)]
            A, B = A_next, B_next
    return DVineModel(order=tuple(int(o) for o in order),
                      trunc_level=int(trunc_level),
                      trees=tuple(trees), n_fit=n)


def dvine_loglik(model, U):
    """Log-likelihood of U under the model (independence edges add zero)."""
    U = _check_copula_matrix(U, model.dim)
    X = U[:, list(model.order)]
    d = model.dim
    total = 0.0
    A = [X[:, e] for e in range(d)]
    B = [X[:, e + 1] for e in range(d - 1)]
    from .pair_copula import copula_logpdf
    for t in range(1, model.trunc_level + 1):
        n_edges = d - t
        for e in range(n_edges):
            spec = model.pair(t, e + 1)
            if spec.family != "independence":
                total += float(np.sum(copula_logpdf(spec, A[e], B[e])))
        if t < model.trunc_level:
            A_next = [hfunc(model.pair(t, e + 1), COND_ON_SECOND, A[e], B[e])
                      for e in range(n_edges - 1)]
            B_next = [hfunc(model.pair(t, e + 2), COND_ON_FIRST, A[e + 1], B[e + 1])
                      for e in range(n_edges - 1)]
            A, B = A_next, B_next
    return total


def mbicv(model, n=None, psi0=0.9):
    """Sparse-vine information criterion of a fitted model.

    -2 loglik + nu log(n) - 2 sum_t [q_t log(psi0^t) + (d-t-q_t) log(1-psi0^t)]
    with nu the parameter count and q_t the non-independence edges in tree t.
    """
    if n is None:
        n = model.n_fit
    if n <= 0:
        raise DimensionError("sample size n must be positive")
    d = model.dim
    score = -2.0 * model.loglik + model.n_params * math.log(n)
    for t in range(1, d):
        q_t = 0
        if t <= model.trunc_level:
            q_t = sum(1 for spec in model.trees[t - 1]
                      if spec.family != "independence")
        prior = q_t * t * math.log(psi0) + (d - t - q_t) * math.log1p(-psi0 ** t)
        score -= 2.0 * prior
    return score


def rosenblatt(model, u):
    """Sequential conditional-CDF transform along the vine order.

    Row vectors (or an (n, d) matrix) on the copula scale, indexed by
    original columns, map to i.i.d.-uniform rows in path coordinates:
    ``v_k = F(u_(k) | u_(1..k-1))``.
    """
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    U = _check_copula_matrix(u, model.dim)
    X = U[:, list(model.order)]
    d = model.dim
    V = np.empty_like(X)
    V[:, 0] = X[:, 0]
    if model.trunc_level == 0:
        V[:, 1:] = X[:, 1:]
        return V[0] if single else V
    A = [X[:, e] for e in range(d)]
    B = [X[:, e + 1] for e in range(d - 1)]
    for t in range(1, min(model.trunc_level, d - 1) + 1):
        n_edges = d - t
        # conditional of position t+1 on the full left block 1..t
        V[:, t] = hfunc(model.pair(t, 1), COND_ON_FIRST, A[0], B[0])
        A_next = [hfunc(model.pair(t, e + 1), COND_ON_SECOND, A[e], B[e])
                  for e in range(n_edges - 1)]
        B_next = [hfunc(model.pair(t, e + 2), COND_ON_FIRST, A[e + 1], B[e + 1])
                  for e in range(n_edges - 1)]
        A, B = A_next, B_next
        if t == model.trunc_level and t < d - 1:
            # beyond the truncation the conditioning block saturates and the
            # remaining conditionals are the propagated B values:
            # v_k = F(u_(k) | u_(k-t)..u_(k-1))
            for k in range(t + 2, d + 1):
                V[:, k - 1] = B[k - t - 2]
            break
    return V[0] if single else V


def inverse_rosenblatt(model, v):
    """Inverse of :func:`rosenblatt`: i.i.d. uniforms to model-distributed rows."""
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    V = _check_copula_matrix(v, model.dim)
    d = model.dim
    n = V.shape[0]
    X = np.empty_like(V)
    X[:, 0] = V[:, 0]
    # B[j] = F(x_j | x_(j+1)..x_(k-1)) entering iteration k (1-based j)
    B = [None] * (d + 1)
    B[1] = X[:, 0]
    for k in range(2, d + 1):
        w = V[:, k - 1]
        jmin = max(1, k - model.trunc_level)
        stripped = {}
        for j in range(jmin, k):
            t = k - j
            w = hinv(model.pair(t, j), COND_ON_FIRST, w, B[j])
            stripped[j] = w
        X[:, k - 1] = w
        for j in range(jmin, k):
            B[j] = hfunc(model.pair(k - j, j), COND_ON_SECOND, B[j], stripped[j])
        B[k] = X[:, k - 1]
    out = np.empty_like(X)
    out[:, list(model.order)] = X
    return out[0] if single else out


def simulate(model, n, rng):
    """Draw n i.i.d. rows from the vine (uniforms through the inverse map)."""
    if n < 1:
        raise DimensionError("n must be at least 1")
    rng = np.random.default_rng(rng)
    V = rng.uniform(size=(n, model.dim))
    V = np.clip(V, 1e-12, 1.0 - 1e-12)
    return inverse_rosenblatt(model, V)


def extract_prefix_subvine(model, p):
    """The D-vine over the first p path positions of a 2p-dimensional model.

    Edges (t, e) with t <= p-1, e <= p-t are shared verbatim with the full
    model, so the sub-vine's Rosenblatt transform matches the full model's
    forward recursion restricted to the prefix.
    """
    if model.dim != 2 * p:
        raise DimensionError(f"model dimension {model.dim} is not 2p for p={p}")
    labels = np.asarray(model.order[:p])
    sub_order = tuple(int(r) for r in np.argsort(np.argsort(labels)))
    trunc = min(model.trunc_level, p - 1)
    trees = tuple(tuple(model.trees[t - 1][:p - t]) for t in range(1, trunc + 1))
    return DVineModel(order=sub_order, trunc_level=trunc, trees=trees,
                      n_fit=model.n_fit)
