"""Exploratory landscape analysis: the 62-entry state vector.

Every group function takes the design sample ``(X, y)`` and returns a plain
float array.  Group functions may return NaN for degenerate samples; the
assembled state imputes those to 0.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from rlde import bbob
from rlde.sampling import latin_hypercube

log = logging.getLogger(__name__)

SAMPLE_FACTOR = 50
LEVELSET_QUANTILES = (0.1, 0.25, 0.5)
DISPERSION_QUANTILES = (0.02, 0.05, 0.10, 0.25)
PCA_THRESHOLD = 0.9
KDE_GRID = 512
PEAK_THRESHOLD = 0.1
IC_EPSILONS = np.logspace(-5, 5, 100)
IC_SETTLING_H = 0.05
N_FOLDS = 5
RQ_CAP = 10.0


def _q_tag(q: float) -> str:
    return f"{round(q * 100):02d}"


FEATURE_NAMES = tuple(
    ["dim", "ydist.skewness", "ydist.kurtosis", "ydist.n_peaks"]
    + [
        f"levelset.{stat}_{_q_tag(q)}"
        for q in LEVELSET_QUANTILES
        for stat in ("mmce_lda", "mmce_qda", "ratio")
    ]
    + [
        "meta.lin_simple.adj_r2",
        "meta.lin_simple.intercept",
        "meta.lin_simple.coef_min",
        "meta.lin_simple.coef_max",
        "meta.lin_simple.coef_max_by_min",
        "meta.lin_w_interact.adj_r2",
        "meta.quad_simple.adj_r2",
        "meta.quad_simple.cond",
        "meta.quad_w_interact.adj_r2",
    ]
    + [
        "nbc.nn_nb.sd_ratio",
        "nbc.nn_nb.mean_ratio",
        "nbc.nn_nb.cor",
        "nbc.dist_ratio.coeff_var",
        "nbc.nb_fitness.cor",
    ]
    + ["ic.h_max", "ic.eps_s", "ic.eps_max", "ic.eps_ratio", "ic.m0"]
    + [
        f"disp.{stat}_{_q_tag(q)}"
        for stat in ("ratio_mean", "ratio_median", "diff_mean", "diff_median")
        for q in DISPERSION_QUANTILES
    ]
    + [
        "pca.expl_var.cov_x",
        "pca.expl_var.cor_x",
        "pca.expl_var.cov_init",
        "pca.expl_var.cor_init",
        "pca.expl_var_PC1.cov_x",
        "pca.expl_var_PC1.cov_init",
    ]
    + [
        "limo.avg_length",
        "limo.length_mean",
        "limo.length_sd",
        "limo.cor",
        "limo.ratio_mean",
        "limo.ratio_sd",
        "limo.sd_ratio",
        "limo.sd_mean",
    ]
)
N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 62


@dataclass(frozen=True)
class ElaSample:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ValueError(f"inconsistent sample shapes {self.X.shape} and {self.y.shape}")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("sample contains non-finite objective values")


def sample_for_ela(instance: bbob.ProblemInstance, rng: np.random.Generator) -> ElaSample:
    """``50 D`` Latin-hypercube points over the box, each evaluated once."""
    n = SAMPLE_FACTOR * instance.dimension
    X = latin_hypercube(n, instance.dimension, instance.lower, instance.upper, rng)
    return ElaSample(X=X, y=bbob.evaluate_batch(instance, X))


# ---------------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------------


def _safe_ratio(a: float, b: float, zero_zero: float = 1.0) -> float:
    if b == 0:
        return zero_zero if a == 0 else math.nan
    return a / b


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation; 0 when either vector has no variance."""
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    if den == 0:
        return 0.0
    return float(a @ b) / den


def _pairwise_distances(X: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - X[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


# ---------------------------------------------------------------------------
# y-distribution
# ---------------------------------------------------------------------------


def skewness(y) -> float:
    y = np.asarray(y, dtype=float)
    n = len(y)
    d = y - y.mean()
    m2 = float(np.sum(d**2))
    if m2 == 0:
        return 0.0
    return math.sqrt(n) * float(np.sum(d**3)) / m2**1.5 * (1.0 - 1.0 / n) ** 1.5


def kurtosis(y) -> float:
    y = np.asarray(y, dtype=float)
    n = len(y)
    d = y - y.mean()
    m2 = float(np.sum(d**2))
    if m2 == 0:
        return 0.0
    return float(np.sum(d**4)) / n * (1.0 / m2) ** 2 - 3.0


def silverman_bandwidth(y) -> float:
    y = np.asarray(y, dtype=float)
    sd = float(np.std(y, ddof=1))
    q75, q25 = np.percentile(y, [75, 25])
    iqr = (q75 - q25) / 1.34
    spread = min(sd, iqr) if iqr > 0 else sd
    return 0.9 * spread * len(y) ** (-0.2)


def kde(y, grid, bandwidth: float) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    u = (np.asarray(grid)[:, None] - y[None, :]) / bandwidth
    return np.exp(-0.5 * u * u).sum(axis=1) / (len(y) * bandwidth * math.sqrt(2 * math.pi))


def count_peaks(y, n_grid: int = KDE_GRID) -> int:
    """Regions between density minima whose mean density plus width exceeds 0.1."""
    y = np.asarray(y, dtype=float)
    sd = float(np.std(y, ddof=1))
    h = silverman_bandwidth(y)
    if sd == 0 or h == 0:
        return 1
    lam = h / sd
    grid = np.linspace(y.min() - 3 * lam * sd, y.max() + 3 * lam * sd, n_grid)
    dens = kde(y, grid, h)
    slope = np.sign(np.diff(dens))
    minima = np.flatnonzero(np.diff(slope) > 0) + 1
    cuts = np.concatenate([[0], minima, [n_grid - 1]])
    count = 0
    for a, b in zip(cuts[:-1], cuts[1:]):
        mass = dens[a : b + 1].mean() + abs(grid[b] - grid[a])
        if mass > PEAK_THRESHOLD:
            count += 1
    return count


def ydist_features(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.ptp(y) == 0:
        return np.array([0.0, 0.0, 1.0])
    return np.array([skewness(y), kurtosis(y), float(count_peaks(y))])


# ---------------------------------------------------------------------------
# levelset
# ---------------------------------------------------------------------------


def _ridge(S: np.ndarray) -> np.ndarray:
    D = S.shape[0]
    tr = float(np.trace(S))
    return S + (1e-6 * tr / D if tr > 0 else 1e-12) * np.eye(D)


def lda_predict(Xtr, ytr, Xte) -> np.ndarray:
    classes = np.unique(ytr)
    if len(classes) == 1:
        return np.full(len(Xte), classes[0])
    D = Xtr.shape[1]
    S = np.zeros((D, D))
    means = []
    for c in classes:
        Xc = Xtr[ytr == c]
        mu = Xc.mean(axis=0)
        means.append(mu)
        S += (Xc - mu).T @ (Xc - mu)
    S = _ridge(S / max(len(ytr) - len(classes), 1))
    scores = []
    for c, mu in zip(classes, means):
        w = np.linalg.solve(S, mu)
        prior = np.mean(ytr == c)
        scores.append(Xte @ w - 0.5 * mu @ w + math.log(prior))
    return classes[np.argmax(np.column_stack(scores), axis=1)]


def qda_predict(Xtr, ytr, Xte) -> np.ndarray:
    classes = np.unique(ytr)
    if len(classes) == 1:
        return np.full(len(Xte), classes[0])
    D = Xtr.shape[1]
    scores = []
    for c in classes:
        Xc = Xtr[ytr == c]
        mu = Xc.mean(axis=0)
        S = (Xc - mu).T @ (Xc - mu) / max(len(Xc) - 1, 1) if len(Xc) > 1 else np.zeros((D, D))
        S = _ridge(S)
        _, logdet = np.linalg.slogdet(S)
        d = Xte - mu
        maha = np.sum(d * np.linalg.solve(S, d.T).T, axis=1)
        prior = len(Xc) / len(ytr)
        scores.append(-0.5 * logdet - 0.5 * maha + math.log(prior))
    return classes[np.argmax(np.column_stack(scores), axis=1)]


def stratified_folds(labels: np.ndarray, k: int = N_FOLDS) -> np.ndarray:
    """Fold id per point: rank within its class, modulo ``k``."""
    folds = np.empty(len(labels), dtype=int)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        folds[idx] = np.arange(len(idx)) % k
    return folds


def cv_mmce(X, labels, predict, k: int = N_FOLDS) -> float:
    folds = stratified_folds(labels, k)
    errors = []
    for fold in range(k):
        test = folds == fold
        if not test.any():
            continue
        train = ~test
        if len(np.unique(labels[train])) < 2:
            errors.append(0.0)
            continue
        pred = predict(X[train], labels[train], X[test])
        errors.append(float(np.mean(pred != labels[test])))
    return float(np.mean(errors)) if errors else 0.0


def levelset_features(X, y, quantiles=LEVELSET_QUANTILES) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    out = []
    for q in quantiles:
        labels = (y < np.quantile(y, q)).astype(int)
        lda = cv_mmce(X, labels, lda_predict)
        qda = cv_mmce(X, labels, qda_predict)
        if qda == 0:
            ratio = 1.0 if lda == 0 else RQ_CAP
        else:
            ratio = lda / qda
        out.extend([lda, qda, ratio])
    return np.array(out)


# ---------------------------------------------------------------------------
# meta-models
# ---------------------------------------------------------------------------


def fit_least_squares(A: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float, bool]:
    """Minimum-norm least squares. Returns (coef, adjusted R^2, rank_deficient)."""
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    N, p = A.shape
    resid = y - A @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        r2 = math.nan
    else:
        r2 = 1.0 - ss_res / ss_tot
    dof = N - (p - 1) - 1
    adj = 1.0 - (1.0 - r2) * (N - 1) / dof if dof > 0 else math.nan
    return coef, adj, rank < p


def _interactions(X: np.ndarray) -> np.ndarray:
    D = X.shape[1]
    cols = [X[:, i] * X[:, j] for i, j in itertools.combinations(range(D), 2)]
    return np.column_stack(cols) if cols else np.empty((X.shape[0], 0))


def metamodel_features(X, y) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    N, D = X.shape
    one = np.ones((N, 1))
    designs = {
        "lin_simple": np.hstack([one, X]),
        "lin_w_interact": np.hstack([one, X, _interactions(X)]),
        "quad_simple": np.hstack([one, X, X**2]),
        "quad_w_interact": np.hstack([one, X, X**2, _interactions(X)]),
    }
    fits = {}
    for name, A in designs.items():
        fits[name] = fit_least_squares(A, y)
        if fits[name][2]:
            log.debug("meta-model %s is rank deficient; using the minimum-norm fit", name)
    lin_coef, lin_adj, _ = fits["lin_simple"]
    lin_abs = np.abs(lin_coef[1:])
    quad_abs = np.abs(fits["quad_simple"][0][1 + D :])
    return np.array(
        [
            lin_adj,
            lin_coef[0],
            lin_abs.min(),
            lin_abs.max(),
            _safe_ratio(lin_abs.max(), lin_abs.min()),
            fits["lin_w_interact"][1],
            fits["quad_simple"][1],
            _safe_ratio(quad_abs.max(), quad_abs.min()),
            fits["quad_w_interact"][1],
        ]
    )


# ---------------------------------------------------------------------------
# nearest-better clustering
# ---------------------------------------------------------------------------


def nearest_better(X, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (nn_dist, nb_dist, nb_index); nb_index is -1 for points with no better point."""
    dist = _pairwise_distances(np.asarray(X, dtype=float))
    np.fill_diagonal(dist, np.inf)
    nn = dist.min(axis=1)
    better = y[None, :] < y[:, None]
    masked = np.where(better, dist, np.inf)
    nb_idx = np.argmin(masked, axis=1)
    has = better.any(axis=1)
    nb = np.where(has, masked[np.arange(len(y)), nb_idx], nn)
    return nn, nb, np.where(has, nb_idx, -1)


def nbc_features(X, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    nn, nb, nb_idx = nearest_better(X, y)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(nb == 0, 1.0, nn / nb)
    indegree = np.bincount(nb_idx[nb_idx >= 0], minlength=len(y)).astype(float)
    return np.array(
        [
            _safe_ratio(float(np.std(nn, ddof=1)), float(np.std(nb, ddof=1))),
            _safe_ratio(float(nn.mean()), float(nb.mean())),
            _corr(nn, nb),
            _safe_ratio(float(np.std(ratio, ddof=1)), float(ratio.mean()), zero_zero=0.0),
            _corr(indegree, y),
        ]
    )


# ---------------------------------------------------------------------------
# information content
# ---------------------------------------------------------------------------


def nearest_neighbor_tour(X) -> np.ndarray:
    """Greedy tour from point 0, always moving to the closest unvisited point."""
    X = np.asarray(X, dtype=float)
    n = len(X)
    visited = np.zeros(n, dtype=bool)
    order = np.empty(n, dtype=int)
    cur = 0
    for step in range(n):
        order[step] = cur
        visited[cur] = True
        if step == n - 1:
            break
        d = np.sum((X - X[cur]) ** 2, axis=1)
        d[visited] = np.inf
        cur = int(np.argmin(d))
    return order


def tour_slopes(X, y) -> np.ndarray:
    order = nearest_neighbor_tour(X)
    Xs = np.asarray(X, dtype=float)[order]
    ys = np.asarray(y, dtype=float)[order]
    step = np.linalg.norm(np.diff(Xs, axis=0), axis=1)
    keep = step > 0
    return np.diff(ys)[keep] / step[keep]


def symbols(slopes: np.ndarray, eps: float) -> np.ndarray:
    return np.where(slopes > eps, 1, np.where(slopes < -eps, -1, 0))


def information_entropy(sym: np.ndarray) -> float:
    """Entropy (base 6) of consecutive symbol pairs with unequal symbols."""
    if len(sym) < 2:
        return 0.0
    a, b = sym[:-1], sym[1:]
    total = len(a)
    h = 0.0
    for p in (-1, 0, 1):
        for q in (-1, 0, 1):
            if p == q:
                continue
            c = int(np.sum((a == p) & (b == q)))
            if c:
                prob = c / total
                h -= prob * math.log(prob, 6)
    return h


def partial_information(sym: np.ndarray) -> float:
    """Length of the alternating non-zero skeleton, divided by the number of symbols."""
    if len(sym) == 0:
        return 0.0
    nz = sym[sym != 0]
    if len(nz) == 0:
        return 0.0
    mu = 1 + int(np.sum(nz[1:] != nz[:-1]))
    return mu / len(sym)


def ic_features(X, y, epsilons=IC_EPSILONS) -> np.ndarray:
    slopes = tour_slopes(X, y)
    H = np.array([information_entropy(symbols(slopes, e)) for e in epsilons])
    # first epsilon attaining the maximum; the tolerance absorbs summation-order noise
    k = int(np.flatnonzero(H >= H.max() - 1e-12)[0])
    settled = np.flatnonzero(H < IC_SETTLING_H)
    eps_s = math.log10(epsilons[settled[0]] if len(settled) else epsilons[-1])
    m0 = partial_information(symbols(slopes, 0.0))
    m_at = partial_information(symbols(slopes, epsilons[k]))
    ratio = m_at / m0 if m0 > 0 else 0.0
    return np.array([H[k], eps_s, math.log10(epsilons[k]), ratio, m0])


# ---------------------------------------------------------------------------
# dispersion
# ---------------------------------------------------------------------------


def _upper_distances(X) -> np.ndarray:
    dist = _pairwise_distances(X)
    iu = np.triu_indices(len(X), k=1)
    return dist[iu]


def best_subset_size(q: float, N: int) -> int:
    return max(2, math.ceil(q * N - 1e-9))


def dispersion_features(X, y, quantiles=DISPERSION_QUANTILES) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    full = _upper_distances(X)
    full_mean, full_median = float(full.mean()), float(np.median(full))
    order = np.argsort(y, kind="stable")
    rm, rmed, dm, dmed = [], [], [], []
    for q in quantiles:
        sub = _upper_distances(X[order[: best_subset_size(q, len(y))]])
        m, med = float(sub.mean()), float(np.median(sub))
        rm.append(_safe_ratio(m, full_mean))
        rmed.append(_safe_ratio(med, full_median))
        dm.append(m - full_mean)
        dmed.append(med - full_median)
    return np.array(rm + rmed + dm + dmed)


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------


def _correlation(A: np.ndarray) -> np.ndarray:
    C = np.atleast_2d(np.cov(A, rowvar=False))
    sd = np.sqrt(np.diag(C))
    ok = sd > 0
    R = np.zeros_like(C)
    R[np.ix_(ok, ok)] = C[np.ix_(ok, ok)] / np.outer(sd[ok], sd[ok])
    return R


def _explained(M: np.ndarray) -> tuple[float, float]:
    """(share of components needed for 90% of the trace, first-PC share)."""
    ev = np.sort(np.linalg.eigvalsh(M))[::-1]
    ev = np.maximum(ev, 0.0)
    total = float(ev.sum())
    if total == 0:
        return math.nan, math.nan
    cum = np.cumsum(ev) / total
    k = int(np.searchsorted(cum, PCA_THRESHOLD - 1e-12)) + 1
    return min(k, len(ev)) / len(ev), ev[0] / total


def pca_features(X, y) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    Z = np.column_stack([X, np.asarray(y, dtype=float)])
    cov_x, pc1_x = _explained(np.atleast_2d(np.cov(X, rowvar=False)))
    cor_x, _ = _explained(np.atleast_2d(_correlation(X)))
    cov_z, pc1_z = _explained(np.cov(Z, rowvar=False))
    cor_z, _ = _explained(_correlation(Z))
    return np.array([cov_x, cor_x, cov_z, cor_z, pc1_x, pc1_z])


# ---------------------------------------------------------------------------
# per-cell linear models
# ---------------------------------------------------------------------------


def cell_ids(X, lower: float = bbob.LOWER, upper: float = bbob.UPPER, blocks: int = 2) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    width = (upper - lower) / blocks
    idx = np.clip(np.floor((X - lower) / width).astype(int), 0, blocks - 1)
    return idx @ (blocks ** np.arange(X.shape[1]))


def cell_coefficients(X, y, lower=bbob.LOWER, upper=bbob.UPPER) -> np.ndarray:
    """Non-intercept linear coefficients for each cell holding at least D + 2 points."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    N, D = X.shape
    ids = cell_ids(X, lower, upper)
    coefs = []
    for c in np.unique(ids):
        mask = ids == c
        if mask.sum() >= D + 2:
            A = np.column_stack([np.ones(mask.sum()), X[mask]])
            coefs.append(np.linalg.lstsq(A, y[mask], rcond=None)[0][1:])
    if not coefs:
        A = np.column_stack([np.ones(N), X])
        coefs.append(np.linalg.lstsq(A, y, rcond=None)[0][1:])
    return np.array(coefs)


def limo_features(X, y, lower=bbob.LOWER, upper=bbob.UPPER) -> np.ndarray:
    C = cell_coefficients(X, y, lower, upper)
    k = len(C)
    lengths = np.linalg.norm(C, axis=1)
    absC = np.abs(C)
    ratios = np.array([_safe_ratio(r.max(), r.min()) for r in absC])
    if k == 1:
        cor, length_sd, ratio_sd = 1.0, 0.0, 0.0
        sd_ratio, sd_mean = 0.0, 0.0
    else:
        cor = float(np.mean([_corr(C[i], C[j]) for i, j in itertools.combinations(range(k), 2)]))
        length_sd = float(np.std(lengths, ddof=1))
        ratio_sd = float(np.std(ratios, ddof=1))
        sds = np.std(C, axis=0, ddof=1)
        sd_ratio = _safe_ratio(float(sds.max()), float(sds.min()))
        sd_mean = float(sds.mean())
    return np.array(
        [
            float(np.linalg.norm(C.mean(axis=0))),
            float(lengths.mean()),
            length_sd,
            cor,
            float(np.mean(ratios)),
            ratio_sd,
            sd_ratio,
            sd_mean,
        ]
    )


# ---------------------------------------------------------------------------
# assembly and normalization
# ---------------------------------------------------------------------------


def compute_features(sample: ElaSample) -> np.ndarray:
    """Raw 62-vector for one sample; may contain NaN."""
    X, y = sample.X, sample.y
    with np.errstate(all="ignore"):
        parts = [
            np.array([float(X.shape[1])]),
            ydist_features(y),
            levelset_features(X, y),
            metamodel_features(X, y),
            nbc_features(X, y),
            ic_features(X, y),
            dispersion_features(X, y),
            pca_features(X, y),
            limo_features(X, y),
        ]
    return np.concatenate(parts).astype(float)


def impute(v: np.ndarray) -> np.ndarray:
    bad = ~np.isfinite(v)
    if bad.any():
        log.info("imputing non-finite features to 0: %s", [FEATURE_NAMES[i] for i in np.flatnonzero(bad)])
    return np.where(bad, 0.0, v)


class FeatureNormalizer:
    """Per-feature z-score from training statistics, clipped to ``[-5, 5]``.

    Entry 0 (the dimension) is passed through unchanged so the state keeps
    carrying D literally.
    """

    CLIP = 5.0

    def __init__(self, mean=None, std=None):
        self.mean = np.zeros(N_FEATURES) if mean is None else np.asarray(mean, dtype=float)
        self.std = np.ones(N_FEATURES) if std is None else np.asarray(std, dtype=float)
        if self.mean.shape != (N_FEATURES,) or self.std.shape != (N_FEATURES,):
            raise ValueError("normalizer statistics must have 62 entries")

    @classmethod
    def fit(cls, vectors) -> "FeatureNormalizer":
        V = np.atleast_2d(np.asarray(vectors, dtype=float))
        return cls(V.mean(axis=0), V.std(axis=0))

    @classmethod
    def identity(cls) -> "FeatureNormalizer":
        return cls()

    def __call__(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        scale = np.where(self.std > 0, self.std, 1.0)
        z = np.clip((v - self.mean) / scale, -self.CLIP, self.CLIP)
        z[..., 0] = v[..., 0]
        return z

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureNormalizer":
        return cls(d["mean"], d["std"])


def raw_state(instance: bbob.ProblemInstance, rng) -> np.ndarray:
    sample = sample_for_ela(instance, rng)
    return impute(compute_features(sample))


def assemble_state(instance: bbob.ProblemInstance, rng, normalizer: FeatureNormalizer | None = None) -> np.ndarray:
    """Sample, compute all groups, impute, and optionally normalize."""
    v = raw_state(instance, rng)
    if normalizer is not None:
        v = normalizer(v)
    return v
