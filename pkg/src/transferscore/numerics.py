"""Shared numerical kernels for the scorers.

Covariance and shrinkage estimation, PCA, Gaussian-mixture EM, Moore-Penrose
pseudo-inversion, and log-domain utilities. Everything here is a pure
function over immutable inputs; all covariance estimates use the population
(divide by n) convention so class-scatter ratios match their
expectation-based definitions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def sample_covariance(X, center: bool = True) -> np.ndarray:
    """Population covariance (divisor n) of the rows of X; requires n >= 2."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"covariance needs a 2-D matrix, got shape {X.shape}")
    n = X.shape[0]
    if n < 2:
        raise ValueError(f"covariance needs at least 2 rows, got {n}")
    if center:
        X = X - X.mean(axis=0)
    cov = (X.T @ X) / n
    return (cov + cov.T) / 2.0


def ledoit_wolf(X, shrinkage: float | None = None) -> tuple[np.ndarray, float]:
    """Shrinkage covariance (1-a)*S + a*(tr S / d)*I with closed-form a.

    The estimate of a follows the quadratic-loss-optimal formula: with
    centered rows x_k and S the population covariance,

        phi   = (1/n^2) sum_k ||x_k||^4  -  (1/n) ||S||_F^2
        gamma = ||S - (tr S / d) I||_F^2
        a     = clip(phi / gamma, 0, 1)

    Passing `shrinkage` overrides the estimate (0.0 gives plain S back).
    A degenerate S proportional to I (including S = 0 and d = 1) has
    gamma = 0 and yields a = 0.
    """
    X = np.asarray(X, dtype=np.float64)
    S = sample_covariance(X)
    d = S.shape[0]
    mu = np.trace(S) / d
    if shrinkage is None:
        Xc = X - X.mean(axis=0)
        n = X.shape[0]
        gamma = float(np.sum(S * S)) - d * mu * mu
        if gamma <= 0.0:
            alpha = 0.0
        else:
            sq_norms = np.einsum("ij,ij->i", Xc, Xc)
            phi = float(np.sum(sq_norms**2)) / n**2 - float(np.sum(S * S)) / n
            alpha = min(1.0, max(0.0, phi / gamma))
    else:
        if not 0.0 <= shrinkage <= 1.0:
            raise ValueError(f"shrinkage must lie in [0, 1], got {shrinkage}")
        alpha = float(shrinkage)
    shrunk = (1.0 - alpha) * S + alpha * mu * np.eye(d)
    return shrunk, alpha


def pseudo_inverse(S) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric matrix via eigen-decomposition.

    Eigenvalues with magnitude below 1e-10 times the largest magnitude are
    treated as exact zeros.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"pseudo_inverse needs a square matrix, got shape {S.shape}")
    if not np.allclose(S, S.T, atol=1e-8):
        raise ValueError("pseudo_inverse needs a symmetric matrix")
    w, V = np.linalg.eigh((S + S.T) / 2.0)
    mags = np.abs(w)
    top = mags.max(initial=0.0)
    if top == 0.0:
        return np.zeros_like(S)
    inv_w = np.where(mags > 1e-10 * top, np.divide(1.0, w, where=mags > 0), 0.0)
    return (V * inv_w) @ V.T


def softmax_rows(L) -> np.ndarray:
    """Row-wise softmax with per-row max subtraction; rows sum to 1."""
    L = np.asarray(L, dtype=np.float64)
    if not np.all(np.isfinite(L)):
        raise ValueError("softmax input must be finite")
    shifted = L - L.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def logsumexp_rows(L) -> np.ndarray:
    """Row-wise log(sum(exp(.))) with max subtraction."""
    L = np.asarray(L, dtype=np.float64)
    m = L.max(axis=-1, keepdims=True)
    return (m + np.log(np.exp(L - m).sum(axis=-1, keepdims=True))).ravel()


@dataclass(frozen=True)
class PcaModel:
    """Centered linear projection: X maps to (X - mean) @ axes.

    axes columns are orthonormal; explained_variance_ratios are the
    retained eigenvalues' shares of total variance, nonincreasing, each
    in (0, 1].
    """

    mean: np.ndarray
    axes: np.ndarray
    explained_variance_ratios: np.ndarray

    def __post_init__(self):
        axes = np.asarray(self.axes, dtype=np.float64)
        ratios = np.asarray(self.explained_variance_ratios, dtype=np.float64)
        if axes.ndim != 2 or axes.shape[1] < 1:
            raise ValueError(f"axes must be d x k with k >= 1, got shape {axes.shape}")
        gram = axes.T @ axes
        if not np.allclose(gram, np.eye(axes.shape[1]), atol=1e-8):
            raise ValueError("axes columns must be orthonormal within 1e-8")
        if np.any(ratios <= 0.0) or np.any(ratios > 1.0 + 1e-12):
            raise ValueError("explained variance ratios must lie in (0, 1]")
        if np.any(np.diff(ratios) > 1e-12):
            raise ValueError("explained variance ratios must be nonincreasing")

    @property
    def n_components(self) -> int:
        return self.axes.shape[1]

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return (X - self.mean) @ self.axes


def pca_fit(X, variance_fraction: float | None = None, components: int | None = None) -> PcaModel:
    """Fit PCA by SVD of the centered data; pick k by exactly one criterion.

    variance_fraction p in (0, 1]: k = smallest k whose cumulative explained
    variance ratio reaches p. components: fixed k, capped at min(n-1, d).
    Either way k never exceeds the numerical rank, so retained ratios stay
    positive. Axis signs are fixed (largest-magnitude entry positive) so
    identical input gives identical output.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"pca_fit needs a 2-D matrix, got shape {X.shape}")
    n, d = X.shape
    if n < 2:
        raise ValueError(f"pca_fit needs at least 2 rows, got {n}")
    if (variance_fraction is None) == (components is None):
        raise ValueError("give exactly one of variance_fraction or components")

    mean = X.mean(axis=0)
    _, s, Vt = np.linalg.svd(X - mean, full_matrices=False)
    eigvals = s * s / n
    total = float(eigvals.sum())
    if total <= 0.0:
        raise ValueError("pca_fit needs data with nonzero variance")
    ratios = eigvals / total
    rank = int(np.sum(s > s[0] * 1e-12))

    if variance_fraction is not None:
        p = float(variance_fraction)
        if not 0.0 < p <= 1.0:
            raise ValueError(f"variance_fraction must lie in (0, 1], got {p}")
        cum = np.cumsum(ratios)
        k = int(np.argmax(cum >= p - 1e-12)) + 1
    else:
        k = int(components)
        if k < 1:
            raise ValueError(f"components must be >= 1, got {components}")
        k = min(k, n - 1, d)
    k = min(k, rank)

    axes = Vt[:k].T.copy()
    flips = np.sign(axes[np.argmax(np.abs(axes), axis=0), np.arange(k)])
    flips[flips == 0] = 1.0
    axes *= flips
    return PcaModel(mean=mean, axes=axes, explained_variance_ratios=ratios[:k].copy())


@dataclass(frozen=True)
class GaussianMixture:
    """Full-covariance Gaussian mixture with its EM log-likelihood trace.

    weights lie on the simplex (sum 1 within 1e-9); each covariance is
    symmetric with every diagonal floored during fitting. log_likelihoods
    records the total data log-likelihood at the start of each EM iteration.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    covariance_floor: float
    log_likelihoods: tuple[float, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError(f"mixture weights must sum to 1, got {w.sum()!r}")
        covs = np.asarray(self.covariances, dtype=np.float64)
        if not np.allclose(covs, np.swapaxes(covs, -1, -2), atol=1e-9):
            raise ValueError("mixture covariances must be symmetric within 1e-9")

    @property
    def n_components(self) -> int:
        return self.means.shape[0]


def _component_log_density(X, mean, cov) -> np.ndarray:
    # Cholesky never fails here: every fitted covariance carries a floor.
    k = X.shape[1]
    L = np.linalg.cholesky(cov)
    diff = X - mean
    sol = np.linalg.solve(L, diff.T)
    maha = np.einsum("ij,ij->j", sol, sol)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return -0.5 * (k * np.log(2.0 * np.pi) + logdet + maha)


def _log_joint(X, weights, means, covs) -> np.ndarray:
    n, K = X.shape[0], means.shape[0]
    lj = np.empty((n, K))
    for j in range(K):
        lj[:, j] = np.log(weights[j]) + _component_log_density(X, means[j], covs[j])
    return lj


def _farthest_point(X, centers, taken) -> int:
    d2 = np.min(
        np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2), axis=1
    )
    d2[list(taken)] = -np.inf
    return int(np.argmax(d2))


def _kmeans_plus_plus(X, K, rng) -> np.ndarray:
    n = X.shape[0]
    idx = [int(rng.integers(n))]
    for _ in range(K - 1):
        d2 = np.min(
            np.sum((X[:, None, :] - X[idx][None, :, :]) ** 2, axis=2), axis=1
        )
        total = float(d2.sum())
        if total <= 0.0:
            idx.append(int(rng.integers(n)))
        else:
            idx.append(int(rng.choice(n, p=d2 / total)))
    return X[idx].copy()


def _lloyd(X, centers, iterations: int = 10) -> np.ndarray:
    K = centers.shape[0]
    for _ in range(iterations):
        d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        assign = np.argmin(d2, axis=1)
        taken: set[int] = set()
        for j in range(K):
            members = assign == j
            if members.any():
                centers[j] = X[members].mean(axis=0)
            else:
                # Empty cluster: reseed at the point farthest from every
                # current center. Fully deterministic.
                pick = _farthest_point(X, centers, taken)
                centers[j] = X[pick]
                taken.add(pick)
    return centers


def gmm_fit(X, components: int, seed: int = 0) -> GaussianMixture:
    """EM for a full-covariance mixture, deterministic given the seed.

    Initialization is k-means++ followed by 10 k-means iterations. Every
    covariance diagonal is floored at 1e-6 times the mean per-dimension
    variance of X (at least 1e-12). EM stops when the relative
    log-likelihood improvement drops below 1e-6 or after 200 iterations.
    A component whose responsibility mass collapses is reseeded at the
    point farthest from the surviving means.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"gmm_fit needs a 2-D matrix, got shape {X.shape}")
    n, k = X.shape
    K = int(components)
    if K < 1:
        raise ValueError(f"components must be >= 1, got {components}")
    if K > n:
        raise ValueError(f"components ({K}) must not exceed sample count ({n})")

    floor = max(1e-6 * float(X.var(axis=0).mean()), 1e-12)
    eye = np.eye(k)
    rng = np.random.default_rng(seed)
    centers = _lloyd(X, _kmeans_plus_plus(X, K, rng))

    d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    assign = np.argmin(d2, axis=1)
    global_cov = sample_covariance(X) if n >= 2 else np.zeros((k, k))
    weights = np.empty(K)
    means = centers.copy()
    covs = np.empty((K, k, k))
    taken: set[int] = set()
    for j in range(K):
        members = assign == j
        if not members.any():
            pick = _farthest_point(X, means, taken)
            taken.add(pick)
            means[j] = X[pick]
            members = np.zeros(n, dtype=bool)
            members[pick] = True
        weights[j] = members.sum() / n
        means[j] = X[members].mean(axis=0)
        diff = X[members] - means[j]
        covs[j] = (diff.T @ diff) / members.sum() + floor * eye
    weights = weights / weights.sum()

    lls: list[float] = []
    prev_ll = -np.inf
    for _ in range(200):
        lj = _log_joint(X, weights, means, covs)
        lse = logsumexp_rows(lj)
        ll = float(lse.sum())
        lls.append(ll)
        if np.isfinite(prev_ll) and abs(ll - prev_ll) < 1e-6 * max(1.0, abs(prev_ll)):
            break
        prev_ll = ll

        resp = np.exp(lj - lse[:, None])
        mass = resp.sum(axis=0)
        empties = np.flatnonzero(mass < 1e-6)
        if empties.size:
            taken = set()
            for j in empties:
                pick = _farthest_point(X, means, taken)
                taken.add(pick)
                means[j] = X[pick]
                covs[j] = global_cov + floor * eye
                mass[j] = 1.0
            alive = np.setdiff1d(np.arange(K), empties)
            for j in alive:
                means[j] = (resp[:, j] @ X) / mass[j]
                diff = X - means[j]
                covs[j] = ((resp[:, j] * diff.T) @ diff) / mass[j] + floor * eye
            weights = mass / mass.sum()
        else:
            weights = mass / n
            for j in range(K):
                means[j] = (resp[:, j] @ X) / mass[j]
                diff = X - means[j]
                covs[j] = ((resp[:, j] * diff.T) @ diff) / mass[j] + floor * eye
        covs = (covs + np.swapaxes(covs, -1, -2)) / 2.0

    return GaussianMixture(
        weights=weights,
        means=means,
        covariances=covs,
        covariance_floor=floor,
        log_likelihoods=tuple(lls),
    )


def gmm_posteriors(gm: GaussianMixture, X) -> np.ndarray:
    """Posterior component responsibilities, computed in the log domain."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != gm.means.shape[1]:
        raise ValueError(
            f"posteriors need an n x {gm.means.shape[1]} matrix, got shape {X.shape}"
        )
    lj = _log_joint(X, gm.weights, gm.means, gm.covariances)
    return np.exp(lj - logsumexp_rows(lj)[:, None])
