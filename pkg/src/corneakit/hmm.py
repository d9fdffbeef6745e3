"""Discrete hidden Markov models over sliding-window map observations.

A 2-D topography map becomes a 1-D symbol sequence by sweeping a
full-width window from top to bottom (overlapping bands), summarizing
each band as (mean, variance, mirror correlation), and vector-quantizing
those summaries against a trained codebook. One HMM per class is trained
with scaled Baum-Welch; classification picks the class whose model
assigns the observation sequence the highest forward log-likelihood.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import (
    DegenerateEmissionWarning,
    DimensionMismatch,
    InvalidWindow,
    KTooLarge,
    SymbolOutOfRange,
    ValidationError,
)
from .features import mirror_correlation
from .imgprep import ScalarGrid

__all__ = [
    "HmmParams",
    "ObservationSequence",
    "Codebook",
    "HmmBank",
    "WINDOW_FEATURE_NAMES",
    "bakis_init",
    "extract_observation_windows",
    "train_codebook",
    "quantize",
    "forward_likelihood",
    "baum_welch",
    "viterbi",
    "hmm_classify",
]

ObservationSequence = Union[Sequence[int], np.ndarray]

# columns of the per-window feature vectors
WINDOW_FEATURE_NAMES = ("mean", "variance", "mirror_correlation")

SMOOTHING_FLOOR = 1e-6
_ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class HmmParams:
    """Initial distribution pi, transitions A, discrete emissions B.

    pi has length N, A is N x N, B is N x M; every row is a probability
    distribution (non-negative, summing to 1 within 1e-12).
    """

    pi: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        n = pi.shape[0]
        if pi.ndim != 1 or n < 1:
            raise ValidationError("pi must be a non-empty vector")
        if A.shape != (n, n):
            raise ValidationError(f"A must be {n}x{n}, got {A.shape}")
        if B.ndim != 2 or B.shape[0] != n or B.shape[1] < 1:
            raise ValidationError(f"B must be {n}xM with M >= 1, got {B.shape}")
        for name, arr in (("pi", pi[None, :]), ("A", A), ("B", B)):
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} entries must be finite and >= 0")
            sums = arr.sum(axis=1)
            if np.max(np.abs(sums - 1.0)) > _ROW_SUM_TOL:
                raise ValidationError(f"{name} rows must sum to 1 within {_ROW_SUM_TOL}")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n_states(self) -> int:
        return self.pi.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.B.shape[1]

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_symbols": self.n_symbols,
            "pi": [float(v) for v in self.pi],
            "A": [[float(v) for v in row] for row in self.A],
            "B": [[float(v) for v in row] for row in self.B],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HmmParams":
        return cls(
            np.asarray(doc["pi"], dtype=float),
            np.asarray(doc["A"], dtype=float),
            np.asarray(doc["B"], dtype=float),
        )


def bakis_init(n_states: int, n_symbols: int) -> HmmParams:
    """Left-to-right chain with self-loops, all mass starting in state 0,
    uniform emissions. The customary initialization for top-to-bottom
    window sweeps."""
    if n_states < 1 or n_symbols < 1:
        raise ValidationError("n_states and n_symbols must be >= 1")
    A = np.zeros((n_states, n_states))
    for i in range(n_states - 1):
        A[i, i] = A[i, i + 1] = 0.5
    A[n_states - 1, n_states - 1] = 1.0
    pi = np.zeros(n_states)
    pi[0] = 1.0
    B = np.full((n_states, n_symbols), 1.0 / n_symbols)
    return HmmParams(pi, A, B)


def _check_symbols(obs: ObservationSequence, n_symbols: int) -> np.ndarray:
    symbols = np.asarray(obs, dtype=int)
    if symbols.ndim != 1 or symbols.size == 0:
        raise ValidationError("observation sequence must be a non-empty 1-D sequence")
    if symbols.min() < 0 or symbols.max() >= n_symbols:
        raise SymbolOutOfRange(
            f"symbols must lie in [0, {n_symbols}), got range "
            f"[{symbols.min()}, {symbols.max()}]"
        )
    return symbols


# ---------------------------------------------------------------------------
# Window extraction and vector quantization
# ---------------------------------------------------------------------------


def extract_observation_windows(
    grid: ScalarGrid, window_height: int, stride: int
) -> np.ndarray:
    """Summarize overlapping full-width bands, top to bottom.

    Bands start at rows 0, stride, 2*stride, ... while they fit; when the
    last regular band stops short of the bottom row, one extra band
    anchored at height - window_height is appended so the sweep always
    covers the whole map. Returns an (n_windows, 3) array with columns
    (mean, variance, mirror_correlation).
    """
    h = grid.height
    if window_height < 1 or window_height > h:
        raise InvalidWindow(f"window height {window_height} invalid for {h}-row map")
    if stride < 1 or stride > window_height:
        raise InvalidWindow(f"stride {stride} must be in 1..window height {window_height}")
    starts = list(range(0, h - window_height + 1, stride))
    if starts[-1] + window_height < h:
        starts.append(h - window_height)
    out = np.empty((len(starts), 3))
    for i, y in enumerate(starts):
        band = grid.values[y : y + window_height]
        out[i] = (band.mean(), band.var(), mirror_correlation(band))
    return out


@dataclass
class Codebook:
    """Nearest-centroid quantizer mapping feature vectors to symbols."""

    centroids: np.ndarray  # (K, D)
    distortion_trace: list[float] = field(default_factory=list)

    def __post_init__(self):
        arr = np.asarray(self.centroids, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValidationError("codebook needs a (K, D) centroid array with K >= 1")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("codebook centroids must be finite")
        self.centroids = arr

    @property
    def n_symbols(self) -> int:
        return self.centroids.shape[0]

    def to_dict(self) -> dict:
        return {"centroids": [[float(v) for v in row] for row in self.centroids]}

    @classmethod
    def from_dict(cls, doc: dict) -> "Codebook":
        return cls(np.asarray(doc["centroids"], dtype=float))


def _pairwise_sq_dist(vectors: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = vectors[:, None, :] - centroids[None, :, :]
    return np.sum(diff * diff, axis=2)


def train_codebook(vectors: np.ndarray, n_centroids: int, seed: int) -> Codebook:
    """Lloyd's algorithm from seeded farthest-point initialization.

    The seed picks the first centroid; every later choice (farthest point,
    nearest-centroid assignment with lowest-index ties, empty clusters
    keeping their previous centroid) is deterministic. Iterates until the
    largest centroid movement drops below 1e-9 or 100 iterations.
    """
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim != 2 or vectors.shape[0] == 0:
        raise ValidationError("codebook training needs a non-empty (n, D) array")
    if n_centroids < 1:
        raise ValidationError(f"n_centroids must be >= 1, got {n_centroids}")
    n_distinct = np.unique(vectors, axis=0).shape[0]
    if n_centroids > n_distinct:
        raise KTooLarge(
            f"{n_centroids} centroids requested but only {n_distinct} distinct vectors"
        )

    rng = np.random.default_rng(seed)
    n = vectors.shape[0]
    chosen = [int(rng.integers(n))]
    min_d2 = np.sum((vectors - vectors[chosen[0]]) ** 2, axis=1)
    for _ in range(1, n_centroids):
        nxt = int(np.argmax(min_d2))
        chosen.append(nxt)
        min_d2 = np.minimum(min_d2, np.sum((vectors - vectors[nxt]) ** 2, axis=1))
    centroids = vectors[chosen].copy()

    trace: list[float] = []
    for _ in range(100):
        d2 = _pairwise_sq_dist(vectors, centroids)
        assign = np.argmin(d2, axis=1)
        trace.append(float(d2[np.arange(n), assign].sum()))
        new_centroids = centroids.copy()
        for k in range(n_centroids):
            members = vectors[assign == k]
            if members.shape[0]:
                new_centroids[k] = members.mean(axis=0)
        movement = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if movement < 1e-9:
            break
    return Codebook(centroids, trace)


def quantize(codebook: Codebook, vectors: np.ndarray) -> np.ndarray:
    """Map each vector to its nearest centroid index (ties to the lowest)."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim != 2 or vectors.shape[1] != codebook.centroids.shape[1]:
        raise DimensionMismatch(
            f"vectors of dimension {vectors.shape[1] if vectors.ndim == 2 else '?'} "
            f"vs codebook dimension {codebook.centroids.shape[1]}"
        )
    return np.argmin(_pairwise_sq_dist(vectors, codebook.centroids), axis=1)


# ---------------------------------------------------------------------------
# Forward, Baum-Welch, Viterbi
# ---------------------------------------------------------------------------


def _scaled_forward(model: HmmParams, symbols: np.ndarray):
    """Normalized forward pass. Returns (alpha_hat, scales, log-likelihood);
    alpha_hat[t] is P(state | o_1..o_t) and scales[t] = P(o_t | o_1..o_{t-1})."""
    T = symbols.shape[0]
    n = model.n_states
    alpha_hat = np.empty((T, n))
    scales = np.empty(T)
    a = model.pi * model.B[:, symbols[0]]
    for t in range(T):
        if t > 0:
            a = (alpha_hat[t - 1] @ model.A) * model.B[:, symbols[t]]
        s = a.sum()
        scales[t] = s
        if s == 0.0:
            alpha_hat[t:] = 0.0
            scales[t:] = 0.0
            return alpha_hat, scales, float("-inf")
        alpha_hat[t] = a / s
    return alpha_hat, scales, float(np.sum(np.log(scales)))


def _scaled_backward(model: HmmParams, symbols: np.ndarray, scales: np.ndarray) -> np.ndarray:
    T = symbols.shape[0]
    beta_hat = np.empty((T, model.n_states))
    beta_hat[T - 1] = 1.0
    for t in range(T - 2, -1, -1):
        beta_hat[t] = (model.A @ (model.B[:, symbols[t + 1]] * beta_hat[t + 1])) / scales[t + 1]
    return beta_hat


def forward_likelihood(model: HmmParams, obs: ObservationSequence) -> float:
    """log P(obs | model) by the scaled forward recursion; -inf when the
    sequence has probability exactly zero."""
    symbols = _check_symbols(obs, model.n_symbols)
    return _scaled_forward(model, symbols)[2]


def _floored_row(counts: np.ndarray, floor: float) -> np.ndarray:
    """Best distribution for ``counts`` with every entry held >= floor.

    Maximizes sum(counts * log(p)) subject to sum(p) = 1 and p >= floor:
    entries whose proportional share falls below the floor are pinned
    there, the rest split the remaining mass proportionally. Rows whose
    plain estimate already clears the floor come back unchanged, so the
    re-estimate stays the exact Baum-Welch update whenever the data
    supports it; using the constrained maximizer (rather than adding a
    constant and renormalizing) is what keeps the EM likelihood ascent
    intact when the floor engages.
    """
    p = counts / counts.sum()
    if p.min() >= floor:
        return p
    pinned = p < floor
    while True:
        free_mass = 1.0 - pinned.sum() * floor
        share = counts * (free_mass / counts[~pinned].sum())
        newly = ~pinned & (share < floor)
        if not newly.any():
            return np.where(pinned, floor, share)
        pinned |= newly


def _project_rows(rows: np.ndarray, floor: float) -> np.ndarray:
    """Lift any sub-floor entries of existing distributions to the floor."""
    out = rows.copy()
    for i in range(out.shape[0]):
        if out[i].min() < floor:
            out[i] = _floored_row(out[i], floor)
    return out


def baum_welch(
    init: HmmParams,
    sequences: Sequence[ObservationSequence],
    max_iter: int = 100,
    tol: float = 1e-4,
) -> tuple[HmmParams, list[float]]:
    """Multi-sequence scaled Baum-Welch re-estimation.

    Each iteration evaluates the current parameters (appending the total
    log-likelihood to the returned trace) and then re-estimates pi, A, B
    from the accumulated posteriors. Transition and emission rows are kept
    at or above SMOOTHING_FLOOR (floor-constrained re-estimates) so no
    probability can lock at zero and the per-iteration likelihood ascent
    is preserved; rows whose occupancy is zero keep their previous values,
    emissions with a DegenerateEmissionWarning. Stops when the trace
    improves by less than ``tol`` or after ``max_iter`` iterations.
    """
    if not sequences:
        raise ValidationError("baum_welch needs at least one observation sequence")
    if max_iter < 1:
        raise ValidationError(f"max_iter must be >= 1, got {max_iter}")
    symbol_seqs = [_check_symbols(obs, init.n_symbols) for obs in sequences]

    params = HmmParams(
        init.pi,
        _project_rows(init.A, SMOOTHING_FLOOR),
        _project_rows(init.B, SMOOTHING_FLOOR),
    )
    trace: list[float] = []
    n, m = init.n_states, init.n_symbols
    for _ in range(max_iter):
        pi_acc = np.zeros(n)
        a_num = np.zeros((n, n))
        a_den = np.zeros(n)
        b_num = np.zeros((n, m))
        b_den = np.zeros(n)
        total_ll = 0.0
        for symbols in symbol_seqs:
            alpha_hat, scales, ll = _scaled_forward(params, symbols)
            if not np.isfinite(ll):
                raise ValidationError(
                    "a sequence has zero probability under the current model; "
                    "use a strictly positive initialization"
                )
            total_ll += ll
            beta_hat = _scaled_backward(params, symbols, scales)
            gamma = alpha_hat * beta_hat
            pi_acc += gamma[0]
            # sum_t xi_t(i,j) = A_ij * sum_t alpha_hat[t,i] * u_t(j),
            # u_t(j) = B[j, o_{t+1}] * beta_hat[t+1, j] / scale[t+1]
            u = (params.B[:, symbols[1:]].T * beta_hat[1:]) / scales[1:, None]
            a_num += params.A * (alpha_hat[:-1].T @ u)
            a_den += gamma[:-1].sum(axis=0)
            np.add.at(b_num.T, symbols, gamma)
            b_den += gamma.sum(axis=0)

        trace.append(total_ll)
        if len(trace) > 1 and trace[-1] - trace[-2] < tol:
            break

        new_pi = pi_acc / pi_acc.sum()
        new_a = params.A.copy()
        for i in np.nonzero(a_den > 0.0)[0]:
            new_a[i] = _floored_row(a_num[i], SMOOTHING_FLOOR)
        new_b = params.B.copy()
        occupied = b_den > 0.0
        if not occupied.all():
            warnings.warn(
                f"{int((~occupied).sum())} emission row(s) re-estimated to all-zero; "
                "keeping previous values",
                DegenerateEmissionWarning,
            )
        for i in np.nonzero(occupied)[0]:
            new_b[i] = _floored_row(b_num[i], SMOOTHING_FLOOR)
        params = HmmParams(new_pi, new_a, new_b)
    return params, trace


def viterbi(model: HmmParams, obs: ObservationSequence) -> tuple[np.ndarray, float]:
    """Most probable state path in log space.

    Ties resolve toward the lower state index. A returned log-probability
    of -inf means no path has positive probability and the accompanying
    path is an arbitrary valid one.
    """
    symbols = _check_symbols(obs, model.n_symbols)
    T = symbols.shape[0]
    n = model.n_states
    with np.errstate(divide="ignore"):
        log_pi = np.log(model.pi)
        log_a = np.log(model.A)
        log_b = np.log(model.B)
    delta = log_pi + log_b[:, symbols[0]]
    back = np.zeros((T, n), dtype=int)
    for t in range(1, T):
        scores = delta[:, None] + log_a
        back[t] = np.argmax(scores, axis=0)
        delta = scores[back[t], np.arange(n)] + log_b[:, symbols[t]]
    path = np.zeros(T, dtype=int)
    path[T - 1] = int(np.argmax(delta))
    for t in range(T - 2, -1, -1):
        path[t] = back[t + 1, path[t + 1]]
    return path, float(delta[path[T - 1]])


def hmm_classify(
    models: Mapping[str, HmmParams], obs: ObservationSequence
) -> tuple[str, dict[str, float]]:
    """Pick the label whose model maximizes the forward log-likelihood;
    exact ties go to the lexicographically first label."""
    if not models:
        raise ValidationError("hmm_classify needs at least one model")
    alphabet_sizes = {m.n_symbols for m in models.values()}
    if len(alphabet_sizes) != 1:
        raise DimensionMismatch(f"models disagree on symbol count: {sorted(alphabet_sizes)}")
    loglikes = {label: forward_likelihood(models[label], obs) for label in sorted(models)}
    best_label, best_ll = None, float("-inf")
    for label, ll in loglikes.items():
        if best_label is None or ll > best_ll:
            best_label, best_ll = label, ll
    return best_label, loglikes


# ---------------------------------------------------------------------------
# Per-class model bank
# ---------------------------------------------------------------------------


@dataclass
class HmmBank:
    """Everything needed to classify a raw scalar map: per-label HMMs, the
    shared codebook, the window sweep geometry, and the window-feature
    normalization fitted on the training windows."""

    models: dict[str, HmmParams]
    codebook: Codebook
    window_height: int
    stride: int
    feature_means: np.ndarray
    feature_stds: np.ndarray  # zero-variance dims stored as 1.0

    def sequence_for(self, grid: ScalarGrid) -> np.ndarray:
        raw = extract_observation_windows(grid, self.window_height, self.stride)
        normalized = (raw - self.feature_means) / self.feature_stds
        return quantize(self.codebook, normalized)

    def classify_map(self, grid: ScalarGrid) -> tuple[str, dict[str, float]]:
        return hmm_classify(self.models, self.sequence_for(grid))

    def to_dict(self) -> dict:
        return {
            "models": {label: m.to_dict() for label, m in sorted(self.models.items())},
            "codebook": self.codebook.to_dict(),
            "window_height": self.window_height,
            "stride": self.stride,
            "feature_means": [float(v) for v in self.feature_means],
            "feature_stds": [float(v) for v in self.feature_stds],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HmmBank":
        return cls(
            models={label: HmmParams.from_dict(d) for label, d in doc["models"].items()},
            codebook=Codebook.from_dict(doc["codebook"]),
            window_height=int(doc["window_height"]),
            stride=int(doc["stride"]),
            feature_means=np.asarray(doc["feature_means"], dtype=float),
            feature_stds=np.asarray(doc["feature_stds"], dtype=float),
        )


def fit_hmm_bank(
    grids_by_label: Mapping[str, Sequence[ScalarGrid]],
    n_states: int = 5,
    n_symbols: int = 16,
    window_height: int = 10,
    stride: int = 5,
    max_iter: int = 50,
    tol: float = 1e-4,
    seed: int = 0,
    init: Optional[HmmParams] = None,
) -> HmmBank:
    """Train one HMM per label over the pooled-codebook symbol sequences.

    Window features are z-scored with statistics pooled across all
    training maps before quantization, so no single feature dimension
    dominates the codebook distances.
    """
    if not grids_by_label:
        raise ValidationError("no training maps supplied")
    windows_per_entry: dict[str, list[np.ndarray]] = {}
    for label in sorted(grids_by_label):
        windows_per_entry[label] = [
            extract_observation_windows(g, window_height, stride)
            for g in grids_by_label[label]
        ]
        if not windows_per_entry[label]:
            raise ValidationError(f"label {label!r} has no training maps")
    pooled = np.concatenate([w for ws in windows_per_entry.values() for w in ws])
    means = pooled.mean(axis=0)
    stds = pooled.std(axis=0)
    stds[stds == 0.0] = 1.0

    codebook = train_codebook((pooled - means) / stds, n_symbols, seed)
    models: dict[str, HmmParams] = {}
    for label, window_sets in windows_per_entry.items():
        sequences = [quantize(codebook, (w - means) / stds) for w in window_sets]
        start = init if init is not None else bakis_init(n_states, n_symbols)
        models[label], _ = baum_welch(start, sequences, max_iter=max_iter, tol=tol)
    return HmmBank(models, codebook, window_height, stride, means, stds)
