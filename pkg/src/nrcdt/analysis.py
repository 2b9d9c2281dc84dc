"""Classification and clustering harness plus partition quality measures."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import derive_seed, rng_for


def _as_matrix(X) -> np.ndarray:
    X = np.asarray([getattr(x, "values", x) for x in X] if isinstance(X, (list, tuple)) else X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    return X


def _vec(q) -> np.ndarray:
    return np.asarray(getattr(q, "values", q), dtype=float).ravel()


# --- nearest template / k-NN --------------------------------------------------


def _distances(X, q, norm):
    diff = X - q
    if norm == "l2":
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    if norm == "linf":
        return np.abs(diff).max(axis=1)
    raise ValueError(f"unknown norm {norm!r}")


def nearest_template(query, templates, norm: str = "l2", labels=None):
    """Return ``(class id, distance)`` of the closest template.

    ``labels[i]`` is the class of ``templates[i]`` (default ``i``).  Exact
    distance ties go to the smallest class id.
    """
    if len(templates) == 0:
        raise ValueError("no templates")
    T = _as_matrix(templates)
    q = _vec(query)
    if T.shape[1] != q.size:
        raise ValueError("query and template dimensions differ")
    labels = np.arange(len(T)) if labels is None else np.asarray(labels)
    d = _distances(T, q, norm)
    best = d.min()
    return int(labels[d == best].min()), float(best)


def nearest_template_batch(queries, templates, norm: str = "l2", labels=None) -> np.ndarray:
    return np.array([nearest_template(q, templates, norm, labels)[0] for q in _as_matrix(queries)])


def knn_classify(train_X, train_y, query, k: int = 1) -> int:
    """Majority label of the ``k`` Euclidean nearest neighbours; ties go to the smallest label.

    Neighbours at equal distance are taken in training order.
    """
    X = _as_matrix(train_X)
    y = np.asarray(train_y, dtype=int)
    if len(y) == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= len(y):
        raise ValueError("k must lie in [1, training size]")
    d = _distances(X, _vec(query), "l2")
    nn = np.argsort(d, kind="stable")[:k]
    votes = np.bincount(y[nn])
    return int(np.flatnonzero(votes == votes.max())[0])


# --- linear SVM ---------------------------------------------------------------


@dataclass
class LinearModel:
    """One-vs-rest linear classifiers on standardized features.

    ``weights[c]`` and ``bias[c]`` act on ``(x - mean) / scale``.
    """

    classes: np.ndarray
    weights: np.ndarray
    bias: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    C: float
    epochs: int
    seed: int
    history: list = field(default_factory=list)

    def decision(self, X) -> np.ndarray:
        Z = (_as_matrix(X) - self.mean) / self.scale
        return Z @ self.weights.T + self.bias


def _dual_cd(Z, y, C, epochs, rng, tol):
    """Dual coordinate descent for the L2-regularized hinge loss.

    The bias is an extra constant feature.  Returns ``(w, dual objectives
    after each epoch)`` with the dual written as a minimization,
    ``0.5 |w|^2 - sum(alpha)``, which never increases.
    """
    n, d = Z.shape
    Q = np.einsum("ij,ij->i", Z, Z)
    alpha = np.zeros(n)
    w = np.zeros(d)
    hist = []
    for _ in range(epochs):
        pg_max, pg_min = -np.inf, np.inf
        for i in rng.permutation(n):
            G = y[i] * (w @ Z[i]) - 1.0
            if alpha[i] <= 0:
                PG = min(G, 0.0)
            elif alpha[i] >= C:
                PG = max(G, 0.0)
            else:
                PG = G
            pg_max, pg_min = max(pg_max, PG), min(pg_min, PG)
            if PG != 0.0:
                old = alpha[i]
                alpha[i] = min(max(old - G / Q[i], 0.0), C)
                w += (alpha[i] - old) * y[i] * Z[i]
        hist.append(0.5 * float(w @ w) - float(alpha.sum()))
        if pg_max - pg_min <= tol:
            break
    return w, hist


def svm_train(X, y, C: float = 1.0, epochs: int = 1000, seed: int = 0, tol: float = 1e-8) -> LinearModel:
    """Linear SVM, one-vs-rest, trained by seeded dual coordinate descent.

    Features are standardized with the training mean and standard deviation
    (unit scale where the deviation is zero).  Class ``c`` shuffles with the
    substream ``(c,)`` of ``seed``.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=int)
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("need at least two classes to train")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = np.hstack([(X - mean) / scale, np.ones((len(X), 1))])
    W, hist = [], []
    for ci, c in enumerate(classes):
        yy = np.where(y == c, 1.0, -1.0)
        w, h = _dual_cd(Z, yy, C, epochs, rng_for(seed, ci), tol)
        W.append(w)
        hist.append(h)
    W = np.array(W)
    return LinearModel(classes, W[:, :-1], W[:, -1], mean, scale, C, epochs, seed, hist)


def svm_predict(model: LinearModel, X) -> np.ndarray:
    """Argmax of the decision values; ties go to the smallest class."""
    D = model.decision(X)
    return model.classes[np.argmax(D, axis=1)]


# --- k-means ------------------------------------------------------------------


@dataclass
class KMeansModel:
    centers: np.ndarray
    inertia: float
    n_iter: int
    history: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.centers)


def _exact_sq_dists(X, centers):
    diff = X[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kmeanspp(X, k, rng):
    n = len(X)
    idx = [int(rng.integers(n))]
    d2 = _exact_sq_dists(X, X[idx])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        nxt = int(rng.integers(n)) if total <= 0 else int(rng.choice(n, p=d2 / total))
        idx.append(nxt)
        d2 = np.minimum(d2, _exact_sq_dists(X, X[nxt:nxt + 1])[:, 0])
    return X[idx].copy()


def _lloyd(X, centers, max_iter):
    assign = None
    hist = []
    for it in range(1, max_iter + 1):
        d2 = _exact_sq_dists(X, centers)
        new = d2.argmin(axis=1)
        hist.append(float(d2[np.arange(len(X)), new].sum()))
        if assign is not None and np.array_equal(new, assign):
            return centers, hist, it
        assign = new
        for j in range(len(centers)):
            members = X[assign == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    d2 = _exact_sq_dists(X, centers)
    hist.append(float(d2.min(axis=1).sum()))
    return centers, hist, max_iter


def kmeans_fit(X, k: int, restarts: int = 20, seed: int = 0, max_iter: int = 300) -> KMeansModel:
    """Best-inertia Lloyd run over ``restarts`` k-means++ initializations.

    Restart ``r`` uses the substream ``(r,)`` of ``seed``; raising the
    restart count only appends runs, so the best inertia cannot get worse.
    The inertia is evaluated against the final assignment.
    """
    X = _as_matrix(X)
    if len(X) == 0:
        raise ValueError("empty feature set")
    if not 1 <= k <= len(X):
        raise ValueError("k must lie in [1, sample count]")
    best = None
    for r in range(max(1, restarts)):
        centers, hist, it = _lloyd(X, _kmeanspp(X, k, rng_for(seed, r)), max_iter)
        inertia = hist[-1]
        if best is None or inertia < best.inertia:
            best = KMeansModel(centers, inertia, it, hist)
    return best


def kmeans_assign(model: KMeansModel, X) -> np.ndarray:
    """Nearest center, Euclidean; ties go to the lower center index."""
    return _exact_sq_dists(_as_matrix(X), model.centers).argmin(axis=1)


# --- partitions ---------------------------------------------------------------


def partition_from_blocks(blocks) -> np.ndarray:
    """``[[1, 2], [3, 4]]`` (1-based items) -> assignment ``[0, 0, 1, 1]``."""
    items = sorted(i for b in blocks for i in b)
    if items != list(range(1, len(items) + 1)):
        raise ValueError("blocks must partition 1..n")
    out = np.empty(len(items), dtype=int)
    for j, b in enumerate(blocks):
        out[np.asarray(list(b)) - 1] = j
    return out


def _contingency(U, V):
    U = np.asarray(U)
    V = np.asarray(V)
    if U.shape != V.shape or U.ndim != 1:
        raise ValueError("partitions must cover the same items")
    _, u = np.unique(U, return_inverse=True)
    _, v = np.unique(V, return_inverse=True)
    M = np.zeros((u.max() + 1 if u.size else 0, v.max() + 1 if v.size else 0), dtype=np.int64)
    np.add.at(M, (u, v), 1)
    return M


def rand_index(U, V) -> float:
    """``(a + b) / C(n, 2)`` over unordered pairs of distinct items."""
    M = _contingency(U, V)
    n = int(M.sum())
    if n < 2:
        return 1.0

    def pairs(x):
        x = np.asarray(x, dtype=np.int64)
        return int((x * (x - 1) // 2).sum())

    a = pairs(M)
    same_u, same_v = pairs(M.sum(axis=1)), pairs(M.sum(axis=0))
    total = n * (n - 1) // 2
    b = total - same_u - same_v + a
    return (a + b) / total


def _entropy(p):
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def variation_information(U, V) -> float:
    """``H(U) + H(V) - 2 I(U, V)``, natural logarithm, ``0 log 0 = 0``."""
    M = _contingency(U, V)
    n = M.sum()
    if n == 0:
        return 0.0
    P = M / n
    pu, pv = P.sum(axis=1), P.sum(axis=0)
    nz = P > 0
    mi = float((P[nz] * np.log(P[nz] / np.outer(pu, pv)[nz])).sum())
    return max(_entropy(pu) + _entropy(pv) - 2 * mi, 0.0)


# --- PCA ----------------------------------------------------------------------


@dataclass
class PCAResult:
    coords: np.ndarray
    variances: np.ndarray
    components: np.ndarray
    mean: np.ndarray


def _fix_signs(V):
    for j in range(V.shape[1]):
        nz = np.flatnonzero(np.abs(V[:, j]) > 1e-12)
        if nz.size and V[nz[0], j] < 0:
            V[:, j] = -V[:, j]
    return V


def pca_project(X, dims: int = 2, rel_tol: float = 1e-12) -> PCAResult:
    """Projection on the top ``dims`` eigenvectors of the (1/n) covariance.

    Uses a symmetric eigensolver on the covariance, or on the Gram matrix
    when there are more features than samples.  Each component's first
    nonzero coordinate is positive.  Components beyond the numerical rank
    are zero-filled with variance 0.
    """
    X = _as_matrix(X)
    n, d = X.shape
    if dims not in (2, 3):
        raise ValueError("dims must be 2 or 3")
    if n < dims:
        raise ValueError(f"need at least {dims} samples")
    mean = X.mean(axis=0)
    Xc = X - mean
    if d <= n:
        lam, V = np.linalg.eigh(Xc.T @ Xc / n)
        order = np.argsort(lam)[::-1]
        lam, V = lam[order], V[:, order]
    else:
        lam, U = np.linalg.eigh(Xc @ Xc.T / n)
        order = np.argsort(lam)[::-1]
        lam, U = lam[order], U[:, order]
        V = Xc.T @ U
        norms = np.linalg.norm(V, axis=0)
        V = V / np.where(norms > 0, norms, 1.0)
    lam = np.clip(lam, 0.0, None)
    top = lam[0] if lam.size else 0.0
    comps = np.zeros((d, dims))
    var = np.zeros(dims)
    m = min(dims, V.shape[1])
    for j in range(m):
        if lam[j] > rel_tol * max(top, 1e-300):
            comps[:, j] = V[:, j]
            var[j] = lam[j]
    comps = _fix_signs(comps)
    return PCAResult(Xc @ comps, var, comps, mean)


def pca_to_csv(res: PCAResult, labels=None, clusters=None) -> str:
    dims = res.coords.shape[1]
    head = ["id", "label", "cluster", "x", "y", "z"][:3 + dims]
    lines = [",".join(head) + "\n"]
    for i, row in enumerate(res.coords):
        lab = "" if labels is None else str(int(labels[i]))
        clu = "" if clusters is None else str(int(clusters[i]))
        lines.append(",".join([str(i), lab, clu] + [repr(float(v)) for v in row]) + "\n")
    return "".join(lines)


# --- evaluation plumbing ------------------------------------------------------


def accuracy(predicted, truth) -> float:
    p, t = np.asarray(predicted), np.asarray(truth)
    if p.shape != t.shape:
        raise ValueError("length mismatch")
    if p.size == 0:
        raise ValueError("empty label arrays")
    return float(np.mean(p == t))


def repeat_seed(master: int, repeat: int) -> int:
    """Seed of repeat ``r``: the 32-bit state of ``SeedSequence(master, spawn_key=(r,))``."""
    return derive_seed(master, repeat)


def split_per_class(labels, train_per_class: int, seed: int):
    """Random train/test index split with ``train_per_class`` training items per class.

    Class ``c`` is permuted with the substream ``(c,)`` of ``seed``.
    Returns sorted index arrays ``(train, test)``.
    """
    labels = np.asarray(labels, dtype=int)
    train = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if train_per_class > len(idx):
            raise ValueError(f"class {c} has only {len(idx)} items")
        train.extend(idx[rng_for(seed, int(c)).permutation(len(idx))[:train_per_class]].tolist())
    train = np.sort(np.array(train, dtype=int))
    test = np.setdiff1d(np.arange(len(labels)), train)
    return train, test


def first_per_class(labels, n_first: int):
    """Indices of the first ``n_first`` items of each class, and the rest."""
    labels = np.asarray(labels, dtype=int)
    train = np.sort(np.concatenate([np.flatnonzero(labels == c)[:n_first] for c in np.unique(labels)]))
    return train, np.setdiff1d(np.arange(len(labels)), train)
