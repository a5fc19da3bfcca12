"""Zero-shot prediction and uncertainty scoring.

A test image is classified by cosine similarity against the text bank;
its uncertainty fuses the maximum inter-modal softmax probability with a
softmax-normalized intra-class Gaussian log-likelihood:

    s_unc = 1 - (p_max + s_d) / 2

Baselines (MaxCosine, MaxSoftmax, Entropy, TempScaling) are computed from
the same similarity profile, so every method shares one prediction per
sample and differs only in its confidence ranking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, xlogy

from .errors import DimensionMismatch, EmptyDataset, TooFewSamples, UnknownClass
from .gaussians import GaussianDictionary, log_pdf_rows
from .projection import project
from .store import EmbeddingMatrix, LabeledDataset, l2_normalize

__all__ = [
    "METHOD_FUSED",
    "METHOD_FUSED_DIAG",
    "METHOD_MAX_COSINE",
    "METHOD_MAX_SOFTMAX",
    "METHOD_ENTROPY",
    "METHOD_TEMP_SCALING",
    "SimilarityProfile",
    "Prediction",
    "UncertaintyScore",
    "RejectionPolicy",
    "ScoringConfig",
    "SampleScore",
    "ScoreRun",
    "classify",
    "similarity_matrix",
    "softmax_rows",
    "intra_class_score",
    "fused_uncertainty",
    "baseline_scores",
    "calibrate_temperature",
    "score_dataset",
    "uncertainty_from_confidence",
]

METHOD_FUSED = "Fused"
METHOD_FUSED_DIAG = "Fused-D"
METHOD_MAX_COSINE = "MaxCosine"
METHOD_MAX_SOFTMAX = "MaxSoftmax"
METHOD_ENTROPY = "Entropy"
METHOD_TEMP_SCALING = "TempScaling"

BASELINE_METHODS = (
    METHOD_MAX_COSINE,
    METHOD_MAX_SOFTMAX,
    METHOD_ENTROPY,
    METHOD_TEMP_SCALING,
)


@dataclass
class SimilarityProfile:
    """Per-class cosine similarities and their softmax at one logit scale."""

    cosines: np.ndarray  # (C,)
    softmax: np.ndarray  # (C,), positive, sums to 1
    logit_scale: float

    @property
    def p_max(self) -> float:
        return float(self.softmax.max())


@dataclass
class Prediction:
    predicted_class: int
    correct: bool | None = None


@dataclass
class UncertaintyScore:
    p_max: float
    s_d: float
    log_likelihood: float
    s_unc: float
    method_tag: str = METHOD_FUSED


@dataclass
class RejectionPolicy:
    """Flag a prediction as a likely error when s_unc exceeds tau."""

    tau: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")

    def rejects(self, s_unc: float) -> bool:
        return s_unc > self.tau


@dataclass
class ScoringConfig:
    logit_scale: float = 100.0
    temperature: float | str = "fit"  # "fit" or a fixed positive value
    seed: int = 0
    calibration_samples: int = 1000

    def __post_init__(self) -> None:
        if self.logit_scale <= 0:
            raise ValueError("logit_scale must be positive")
        if isinstance(self.temperature, str) and self.temperature != "fit":
            raise ValueError("temperature must be 'fit' or a positive float")
        if isinstance(self.temperature, (int, float)) and self.temperature <= 0:
            raise ValueError("temperature must be positive")


@dataclass
class SampleScore:
    """One CSV row: one sample scored by one method."""

    sample_index: int
    true_class: int
    predicted_class: int
    correct: bool
    method: str
    confidence: float
    p_max: float
    s_d: float
    log_likelihood: float
    s_unc: float


@dataclass
class ScoreRun:
    """All per-sample rows of one evaluation plus run-level facts."""

    rows: list[SampleScore]
    methods: list[str]
    temperature: float
    logit_scale: float
    num_classes: int
    fused_method: str

    def rows_for(self, method: str) -> list[SampleScore]:
        return [r for r in self.rows if r.method == method]


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def similarity_matrix(
    images: EmbeddingMatrix, text_bank: EmbeddingMatrix, logit_scale: float
) -> tuple[np.ndarray, np.ndarray]:
    """Cosine and softmax matrices (rows = images, columns = classes)."""
    if images.dims != text_bank.dims:
        raise DimensionMismatch(
            f"image dims {images.dims} != text bank dims {text_bank.dims}"
        )
    v = images.data if images.normalized else l2_normalize(images).data
    t = text_bank.data if text_bank.normalized else l2_normalize(text_bank).data
    cosines = v @ t.T
    return cosines, softmax_rows(logit_scale * cosines)


def classify(
    image_emb: np.ndarray, text_bank: EmbeddingMatrix, logit_scale: float = 100.0
) -> tuple[SimilarityProfile, Prediction]:
    """Zero-shot classification of a single image embedding.

    The predicted class is the argmax of the raw cosines; exact ties go to
    the lowest class index.
    """
    image_emb = np.asarray(image_emb, dtype=np.float64)
    if image_emb.ndim != 1:
        raise DimensionMismatch("image embedding must be a single vector")
    if text_bank.rows < 2:
        raise DimensionMismatch("text bank needs at least 2 classes")
    cosines, softmax = similarity_matrix(
        EmbeddingMatrix(image_emb[None, :]), text_bank, logit_scale
    )
    profile = SimilarityProfile(
        cosines=cosines[0], softmax=softmax[0], logit_scale=logit_scale
    )
    return profile, Prediction(predicted_class=int(np.argmax(cosines[0])))


def intra_class_score(
    gdict: GaussianDictionary,
    z: np.ndarray,
    predicted: int,
    queried_classes: list[int] | None = None,
) -> tuple[float, float]:
    """Softmax-normalized log-likelihood of z under the predicted class.

    Returns ``(s_d, log_likelihood)`` where s_d is the softmax over the
    queried classes' log-densities evaluated at the predicted class.
    """
    queried = sorted(queried_classes) if queried_classes is not None else gdict.class_indices
    if predicted not in queried:
        raise UnknownClass(f"predicted class {predicted} not among queried classes")
    missing = [c for c in queried if c not in gdict.entries]
    if missing:
        raise UnknownClass(f"classes {missing} not in dictionary")
    z = np.asarray(z, dtype=np.float64)
    lps = np.array([log_pdf_rows(gdict.entries[c], z[None, :])[0] for c in queried])
    pred_pos = queried.index(predicted)
    s_d = float(np.exp(lps[pred_pos] - logsumexp(lps)))
    return s_d, float(lps[pred_pos])


def fused_uncertainty(
    profile: SimilarityProfile, s_d: float, log_likelihood: float = math.nan
) -> UncertaintyScore:
    """Combine inter-modal confidence with intra-class consistency."""
    p_max = profile.p_max
    return UncertaintyScore(
        p_max=p_max,
        s_d=s_d,
        log_likelihood=log_likelihood,
        s_unc=1.0 - (p_max + s_d) / 2.0,
    )


def _entropy_rows(softmax: np.ndarray) -> np.ndarray:
    return -xlogy(softmax, softmax).sum(axis=1)


def baseline_scores(
    profile: SimilarityProfile, temperature: float | None = None
) -> dict[str, float]:
    """Confidence per baseline method (higher = more confident)."""
    t = 1.0 if temperature is None else float(temperature)
    rescaled = softmax_rows(profile.logit_scale * profile.cosines[None, :] / t)[0]
    return {
        METHOD_MAX_COSINE: float(profile.cosines.max()),
        METHOD_MAX_SOFTMAX: profile.p_max,
        METHOD_ENTROPY: float(-_entropy_rows(profile.softmax[None, :])[0]),
        METHOD_TEMP_SCALING: float(rescaled.max()),
    }


def _nll_at_log_t(cosines: np.ndarray, labels: np.ndarray, beta: float, log_t: float) -> float:
    logits = beta * cosines / math.exp(log_t)
    lse = logsumexp(logits, axis=1)
    return float(np.mean(lse - logits[np.arange(labels.shape[0]), labels]))


def calibrate_temperature(
    val_profiles: list[SimilarityProfile], val_labels: np.ndarray
) -> float:
    """Fit T > 0 minimizing mean NLL of softmax(beta*cos/T) on held-out labels.

    Golden-section search over log T in [-3, 3] to 1e-4; a flat objective
    (e.g. all profiles identical) falls back to T = 1.
    """
    labels = np.asarray(val_labels, dtype=np.int64)
    if len(val_profiles) < 10 or labels.shape[0] != len(val_profiles):
        raise TooFewSamples(
            f"temperature calibration needs >= 10 samples, got {len(val_profiles)}"
        )
    cosines = np.stack([p.cosines for p in val_profiles])
    beta = float(val_profiles[0].logit_scale)

    lo, hi = -3.0, 3.0
    probes = [_nll_at_log_t(cosines, labels, beta, x) for x in (lo, 0.0, hi)]
    if max(probes) - min(probes) < 1e-12:
        return 1.0

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = _nll_at_log_t(cosines, labels, beta, c)
    fd = _nll_at_log_t(cosines, labels, beta, d)
    while b - a > 1e-4:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = _nll_at_log_t(cosines, labels, beta, c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = _nll_at_log_t(cosines, labels, beta, d)
    return math.exp((a + b) / 2.0)


def _fit_temperature_from_train(
    ds: LabeledDataset, text_bank: EmbeddingMatrix, config: ScoringConfig
) -> float:
    idx = ds.split_indices("train")
    rng = np.random.default_rng(config.seed)
    if idx.size > config.calibration_samples:
        idx = np.sort(rng.choice(idx, size=config.calibration_samples, replace=False))
    cosines, softmax = similarity_matrix(
        EmbeddingMatrix(ds.embeddings.data[idx], normalized=ds.embeddings.normalized),
        text_bank,
        config.logit_scale,
    )
    profiles = [
        SimilarityProfile(cosines=cosines[i], softmax=softmax[i], logit_scale=config.logit_scale)
        for i in range(cosines.shape[0])
    ]
    return calibrate_temperature(profiles, ds.labels[idx])


def score_dataset(
    ds: LabeledDataset,
    text_bank: EmbeddingMatrix,
    gdict: GaussianDictionary,
    config: ScoringConfig | None = None,
) -> ScoreRun:
    """Score every test row with the fused method and all baselines.

    The prediction (and therefore the correctness bit) is shared across
    methods; only the confidence column differs.
    """
    config = config or ScoringConfig()
    test_idx = ds.split_indices("test")
    if test_idx.size == 0:
        raise EmptyDataset("test split has no rows")
    images = EmbeddingMatrix(
        ds.embeddings.data[test_idx], normalized=ds.embeddings.normalized
    )
    if text_bank.dims != gdict.pca.input_dim:
        raise DimensionMismatch("text bank dims do not match the PCA input dim")
    num_classes = text_bank.rows
    missing = [c for c in range(num_classes) if c not in gdict.entries]
    if missing:
        raise UnknownClass(
            f"dictionary lacks entries for query classes {missing[:8]}"
            + ("..." if len(missing) > 8 else "")
        )

    cosines, softmax = similarity_matrix(images, text_bank, config.logit_scale)
    preds = np.argmax(cosines, axis=1)
    truth = ds.labels[test_idx]
    correct = preds == truth
    p_max = softmax.max(axis=1)

    # intra-class log-likelihoods over every dictionary class
    z = project(gdict.pca, images).data
    queried = gdict.class_indices
    loglik = np.stack([log_pdf_rows(gdict.entries[c], z) for c in queried], axis=1)
    pred_cols = np.searchsorted(np.asarray(queried), preds)
    lse = logsumexp(loglik, axis=1)
    n = z.shape[0]
    lp_pred = loglik[np.arange(n), pred_cols]
    s_d = np.exp(lp_pred - lse)
    s_unc = 1.0 - (p_max + s_d) / 2.0

    if config.temperature == "fit":
        temperature = _fit_temperature_from_train(ds, text_bank, config)
    else:
        temperature = float(config.temperature)

    fused_method = METHOD_FUSED if gdict.covariance_kind == "full" else METHOD_FUSED_DIAG
    confidences = {
        fused_method: 1.0 - s_unc,
        METHOD_MAX_COSINE: cosines.max(axis=1),
        METHOD_MAX_SOFTMAX: p_max,
        METHOD_ENTROPY: -_entropy_rows(softmax),
        METHOD_TEMP_SCALING: softmax_rows(
            config.logit_scale * cosines / temperature
        ).max(axis=1),
    }
    methods = [fused_method, *BASELINE_METHODS]

    rows: list[SampleScore] = []
    for i in range(n):
        for method in methods:
            rows.append(
                SampleScore(
                    sample_index=int(test_idx[i]),
                    true_class=int(truth[i]),
                    predicted_class=int(preds[i]),
                    correct=bool(correct[i]),
                    method=method,
                    confidence=float(confidences[method][i]),
                    p_max=float(p_max[i]),
                    s_d=float(s_d[i]),
                    log_likelihood=float(lp_pred[i]),
                    s_unc=float(s_unc[i]),
                )
            )
    return ScoreRun(
        rows=rows,
        methods=methods,
        temperature=temperature,
        logit_scale=config.logit_scale,
        num_classes=num_classes,
        fused_method=fused_method,
    )


def uncertainty_from_confidence(
    method: str, confidence: np.ndarray, num_classes: int
) -> np.ndarray:
    """Map a method's confidence onto a [0, 1] uncertainty for tau sweeps.

    Fused confidence is already 1 - s_unc; probability-valued baselines
    invert directly; cosines and entropies are rescaled to [0, 1] by their
    natural ranges.
    """
    confidence = np.asarray(confidence, dtype=np.float64)
    if method in (METHOD_FUSED, METHOD_FUSED_DIAG, METHOD_MAX_SOFTMAX, METHOD_TEMP_SCALING):
        return 1.0 - confidence
    if method == METHOD_MAX_COSINE:
        return (1.0 - confidence) / 2.0
    if method == METHOD_ENTROPY:
        if num_classes < 2:
            raise ValueError("entropy rescaling needs >= 2 classes")
        return np.clip(-confidence / math.log(num_classes), 0.0, 1.0)
    raise ValueError(f"unknown method {method!r}")
