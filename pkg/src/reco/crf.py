"""Dense-CRF mean-field refinement of fused probability maps.

Unary potentials are negative logs of the per-pixel renormalized map
values. Two Gaussian pairwise kernels couple pixels: an appearance
kernel over position and color, and a smoothness kernel over position
alone, both with Potts label compatibility. Messages are computed by
direct pairwise summation (optionally truncated to a spatial radius),
which is exact and entirely adequate at the image sizes this engine
targets; lattice-accelerated filtering is deliberately not used.

One mean-field iteration, for pixel i and label l:

    m_i(l)   = sum_m w_m * sum_{j != i} k_m(i, j) * Q_j(l)
    pair_i(l) = sum_{l' != l} m_i(l')
    Q_i      = softmax_l( -U_i(l) - pair_i(l) )

With zero pairwise weights or zero iterations the result is exactly the
unary argmax.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .inference import ProbabilityMap, SegmentationMask

# pixel count below which the full kernel matrices are cached across iterations
_CACHE_PIXELS = 4096
_CHUNK = 2048


@dataclass
class CrfParams:
    """Mean-field schedule and Gaussian kernel widths.

    Defaults are conventional dense-CRF settings; they are configuration,
    not derived quantities, and are echoed into pipeline provenance.
    ``working_max_side`` bounds the resolution the CRF runs at; maps and
    image are nearest-neighbor resampled when they exceed it.
    """

    iterations: int = 10
    appearance_weight: float = 10.0
    appearance_spatial_sigma: float = 80.0
    appearance_color_sigma: float = 13.0
    smoothness_weight: float = 3.0
    smoothness_sigma: float = 3.0
    truncation_radius: float | None = None
    working_max_side: int | None = 128

    def __post_init__(self):
        if not 0 <= self.iterations <= 100:
            raise ValueError(f"iterations must be in 0..100, got {self.iterations}")
        for name in ("appearance_spatial_sigma", "appearance_color_sigma", "smoothness_sigma"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("appearance_weight", "smoothness_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.truncation_radius is not None and self.truncation_radius <= 0:
            raise ValueError("truncation_radius must be > 0 when set")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "CrfParams":
        return cls(**{k: doc[k] for k in doc})

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "appearance_weight": self.appearance_weight,
            "appearance_spatial_sigma": self.appearance_spatial_sigma,
            "appearance_color_sigma": self.appearance_color_sigma,
            "smoothness_weight": self.smoothness_weight,
            "smoothness_sigma": self.smoothness_sigma,
            "truncation_radius": self.truncation_radius,
            "working_max_side": self.working_max_side,
        }


@dataclass
class LabelDistribution:
    """Per-pixel label distribution Q, shape (C, h, w)."""

    q: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.q, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"Q must be (C, h, w), got shape {arr.shape}")
        if arr.min() < 0.0:
            raise ValueError("Q entries must be nonnegative")
        sums = arr.sum(axis=0)
        if np.abs(sums - 1.0).max() > 1e-5:
            raise ValueError("Q columns must sum to 1 within 1e-5")
        self.q = arr


def _nearest_axis(n_out: int, n_in: int) -> np.ndarray:
    return np.minimum(
        ((np.arange(n_out) + 0.5) * n_in / n_out).astype(np.int64), n_in - 1
    )


def _nearest_resize(arr: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor resample along the last two axes."""
    h_in, w_in = arr.shape[-2], arr.shape[-1]
    ys = _nearest_axis(out_hw[0], h_in)
    xs = _nearest_axis(out_hw[1], w_in)
    return arr[..., ys[:, None], xs[None, :]]


def _normalize_probs(stack: np.ndarray) -> np.ndarray:
    """Renormalize map values across labels at every pixel."""
    sums = stack.sum(axis=0)
    bad = sums == 0.0
    if bad.any():
        warnings.warn(
            f"{int(bad.sum())} pixel(s) have zero total probability; "
            "using a uniform unary there",
            stacklevel=2,
        )
    c = stack.shape[0]
    safe = np.where(bad, 1.0, sums)
    probs = stack / safe[None, :, :]
    probs[:, bad] = 1.0 / c
    return probs


def _pairwise_feature_blocks(image: np.ndarray, params: CrfParams):
    """Per-pixel feature rows for the two Gaussian kernels.

    Returns (positions scaled for appearance, colors scaled, positions
    scaled for smoothness, raw squared-distance positions for truncation).
    """
    h, w = image.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]
    pos = np.stack([ys.ravel(), xs.ravel()], axis=1).astype(np.float64)
    color = image.reshape(-1, image.shape[2]).astype(np.float64)
    app_pos = pos / params.appearance_spatial_sigma
    app_col = color / params.appearance_color_sigma
    smo_pos = pos / params.smoothness_sigma
    return app_pos, app_col, smo_pos, pos


def _kernel_rows(i0, i1, app_pos, app_col, smo_pos, pos, params):
    """Rows [i0:i1) of the weighted pairwise kernel sum, diagonal zeroed."""

    def sq_dists(feat):
        diff = feat[i0:i1, None, :] - feat[None, :, :]
        return np.einsum("ijk,ijk->ij", diff, diff)

    rows = np.zeros((i1 - i0, pos.shape[0]))
    if params.appearance_weight > 0.0:
        rows += params.appearance_weight * np.exp(
            -0.5 * (sq_dists(app_pos) + sq_dists(app_col))
        )
    if params.smoothness_weight > 0.0:
        rows += params.smoothness_weight * np.exp(-0.5 * sq_dists(smo_pos))
    if params.truncation_radius is not None:
        rows[sq_dists(pos) > params.truncation_radius**2] = 0.0
    cols = np.arange(i0, i1)
    rows[np.arange(i1 - i0), cols] = 0.0
    return rows


def mean_field_trace(
    probabilities: Sequence[ProbabilityMap] | np.ndarray,
    image: np.ndarray,
    params: CrfParams,
) -> list[LabelDistribution]:
    """Run mean field at native resolution, keeping Q after init and each step."""
    stack = _as_stack(probabilities)
    _check_image(image, stack)
    qs = []
    for q in _mean_field_iter(stack, image, params):
        qs.append(LabelDistribution(q=q.reshape(stack.shape).copy()))
    return qs


def _as_stack(probabilities) -> np.ndarray:
    if isinstance(probabilities, np.ndarray):
        stack = np.asarray(probabilities, dtype=np.float64)
    else:
        maps = list(probabilities)
        shapes = {m.values.shape for m in maps}
        if len(shapes) > 1:
            raise ValueError(f"maps disagree on extent: {sorted(shapes)}")
        stack = np.stack([m.values for m in maps], axis=0)
    if stack.ndim != 3:
        raise ValueError(f"expected (C, h, w) maps, got shape {stack.shape}")
    if stack.shape[0] < 2:
        raise ValueError(f"CRF needs at least 2 label maps, got {stack.shape[0]}")
    return stack


def _check_image(image: np.ndarray, stack: np.ndarray) -> None:
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"image must be (h, w, 3), got shape {image.shape}")
    if image.shape[:2] != stack.shape[1:]:
        raise ValueError(
            f"image extent {image.shape[:2]} != map extent {stack.shape[1:]}"
        )


def _mean_field_iter(stack: np.ndarray, image: np.ndarray, params: CrfParams):
    """Yield the flattened Q (C, N) after init and after every iteration."""
    c, h, w = stack.shape
    n = h * w
    probs = _normalize_probs(stack).reshape(c, n)
    unary = -np.log(np.clip(probs, 1e-30, None))

    q = probs.copy()
    yield q
    if params.iterations == 0:
        return

    coupled = params.appearance_weight > 0.0 or params.smoothness_weight > 0.0
    if not coupled:
        for _ in range(params.iterations):
            yield q
        return

    feats = _pairwise_feature_blocks(image.astype(np.float64), params)
    kernel = None
    if n <= _CACHE_PIXELS:
        kernel = np.concatenate(
            [_kernel_rows(i, min(i + _CHUNK, n), *feats, params) for i in range(0, n, _CHUNK)],
            axis=0,
        )

    for _ in range(params.iterations):
        if kernel is not None:
            messages = q @ kernel.T
        else:
            messages = np.empty_like(q)
            for i0 in range(0, n, _CHUNK):
                i1 = min(i0 + _CHUNK, n)
                rows = _kernel_rows(i0, i1, *feats, params)
                messages[:, i0:i1] = q @ rows.T
        pairwise = messages.sum(axis=0, keepdims=True) - messages
        logits = -unary - pairwise
        logits -= logits.max(axis=0, keepdims=True)
        expd = np.exp(logits)
        q = expd / expd.sum(axis=0, keepdims=True)
        yield q


def refine(
    probabilities: Sequence[ProbabilityMap] | np.ndarray,
    image: np.ndarray,
    params: CrfParams,
    label_table: Mapping[int, str] | None = None,
) -> SegmentationMask:
    """Mean-field refinement; returns the argmax mask of the final Q.

    When the input exceeds ``params.working_max_side`` the computation
    runs at a reduced resolution and the resulting mask is resampled back
    (nearest neighbor both ways).
    """
    stack = _as_stack(probabilities)
    _check_image(image, stack)
    if label_table is None:
        if isinstance(probabilities, np.ndarray):
            label_table = {i: str(i) for i in range(stack.shape[0])}
        else:
            label_table = {i: m.concept_name for i, m in enumerate(probabilities)}

    h, w = stack.shape[1:]
    work_stack, work_image = stack, np.asarray(image, dtype=np.float64)
    ms = params.working_max_side
    if ms is not None and max(h, w) > ms:
        scale = ms / max(h, w)
        out_hw = (max(1, round(h * scale)), max(1, round(w * scale)))
        work_stack = _nearest_resize(stack, out_hw)
        work_image = _nearest_resize(
            np.moveaxis(work_image, 2, 0), out_hw
        )
        work_image = np.moveaxis(work_image, 0, 2)

    q = None
    for q in _mean_field_iter(work_stack, work_image, params):
        pass
    indices = np.argmax(q.reshape(work_stack.shape), axis=0)
    if indices.shape != (h, w):
        indices = _nearest_resize(indices, (h, w))
    return SegmentationMask(indices=indices, label_table=dict(label_table))
