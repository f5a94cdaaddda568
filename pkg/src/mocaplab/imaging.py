"""Image-plane feature extraction and the packed pixel encodings.

Two byte encodings are used throughout:
  model image:     bits 0..6 part label (0 = background), bit 7 edge flag
  reference image: bits 0..6 quantized normalized distance q = round(127 n),
                   bit 7 silhouette flag
"""

import math
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from . import kernels


class NoEdges(Exception):
    """Distance transform requested for an image with no edge pixels."""


class BadParams(ValueError):
    """Normalization or extractor parameters out of range."""


class ImageTooSmall(ValueError):
    """Operation needs at least a 3x3 image."""


class Roi(NamedTuple):
    x: int
    y: int
    w: int
    h: int


EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


# -- PGM I/O ---------------------------------------------------------------------


def write_pgm(path, img):
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValueError("PGM frames are 8-bit")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM")
    # header: magic, width, height, maxval, single whitespace, then raster
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1
    w, h, maxval = fields
    if maxval > 255:
        raise ValueError(f"{path}: 16-bit PGM not supported")
    img = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    return img.reshape(h, w).copy()


# -- background subtraction -------------------------------------------------------


class MoGBackground:
    """Per-pixel mixture-of-Gaussians background model for grayscale frames.

    Components are kept sorted by weight/sigma (most background-like first).
    A pixel matches the first component within match_sigma standard
    deviations; matched components blend toward the observation, unmatched
    pixels replace their weakest component. The first components whose
    cumulative weight reaches t_bg count as background.
    """

    def __init__(
        self,
        shape,
        k=3,
        alpha=0.01,
        t_bg=0.7,
        sigma_init=30.0,
        w_init=0.05,
        match_sigma=2.5,
        sigma_min=4.0,
    ):
        if k < 1:
            raise BadParams("k must be >= 1")
        if not 0.0 < alpha <= 1.0:
            raise BadParams("alpha must be in (0, 1]")
        if not 0.0 < t_bg <= 1.0:
            raise BadParams("t_bg must be in (0, 1]")
        h, w = shape
        self.k = k
        self.alpha = alpha
        self.t_bg = t_bg
        self.sigma_init = sigma_init
        self.w_init = w_init
        self.match_sigma = match_sigma
        self.var_min = sigma_min * sigma_min
        self.w = np.full((k, h, w), 1.0 / k)
        self.mu = np.full((k, h, w), 128.0)
        self.var = np.full((k, h, w), sigma_init * sigma_init)

    def prime(self, frame):
        """Bootstrap component 0 from a person-free frame.

        Gives the observed intensities a dominant weight immediately, so a
        short warmup suffices even when the scene is far from the generic
        initialization.
        """
        x = np.asarray(frame, dtype=np.float64)
        if x.shape != self.w.shape[1:]:
            raise ValueError("frame shape does not match the model")
        self.mu[0] = x
        self.w[0] = 1.0
        self.w[1:] = self.w_init
        self.w /= self.w.sum(axis=0, keepdims=True)

    def apply(self, frame):
        """Classify a frame against the current model, then update it.

        Returns the foreground mask. Classification happens before the
        update, against the component ordering carried over from the
        previous frame.
        """
        x = np.asarray(frame, dtype=np.float64)
        if x.shape != self.w.shape[1:]:
            raise ValueError("frame shape does not match the model")
        sd = np.sqrt(self.var)
        match = np.abs(x - self.mu) <= self.match_sigma * sd
        any_match = match.any(axis=0)
        first = match.argmax(axis=0)  # first matching component, fitness order

        # classify: background components = smallest prefix with cum weight >= t_bg
        n_bg = (np.cumsum(self.w, axis=0) >= self.t_bg).argmax(axis=0) + 1
        fg = ~any_match | (first >= n_bg)

        # update weights: w <- (1 - a) w + a M, M one-hot at the matched slot
        m = np.zeros_like(self.w)
        np.put_along_axis(m, first[None], 1.0, axis=0)
        m *= any_match
        self.w = (1.0 - self.alpha) * self.w + self.alpha * m

        # blend matched component toward the observation
        rho = self.alpha * _gaussian(x, self.mu, sd)
        np.clip(rho, 0.0, 1.0, out=rho)
        sel = m > 0.0
        mu_new = (1.0 - rho) * self.mu + rho * x
        self.mu = np.where(sel, mu_new, self.mu)
        diff = x - self.mu
        var_new = (1.0 - rho) * self.var + rho * diff * diff
        self.var = np.where(sel, var_new, self.var)

        # unmatched pixels replace their weakest component
        if (~any_match).any():
            weakest = self.w.argmin(axis=0)
            repl = np.zeros_like(sel)
            np.put_along_axis(repl, weakest[None], True, axis=0)
            repl &= ~any_match
            self.mu = np.where(repl, x, self.mu)
            self.var = np.where(repl, self.sigma_init * self.sigma_init, self.var)
            self.w = np.where(repl, self.w_init, self.w)

        np.clip(self.var, self.var_min, None, out=self.var)
        self.w /= self.w.sum(axis=0, keepdims=True)

        # re-sort by fitness for the next frame
        rank = np.argsort(-(self.w / np.sqrt(self.var)), axis=0, kind="stable")
        self.w = np.take_along_axis(self.w, rank, axis=0)
        self.mu = np.take_along_axis(self.mu, rank, axis=0)
        self.var = np.take_along_axis(self.var, rank, axis=0)
        return fg


def _gaussian(x, mu, sd):
    d = (x - mu) / sd
    return np.exp(-0.5 * d * d) / (sd * math.sqrt(2.0 * math.pi))


# -- edges -----------------------------------------------------------------------


GAUSS3 = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]]) / 16.0


def smooth3(img):
    """3x3 Gaussian pre-filter; border pixels keep their input values."""
    x = np.asarray(img, dtype=np.float64)
    if x.shape[0] < 3 or x.shape[1] < 3:
        raise ImageTooSmall("need at least 3x3")
    out = x.copy()
    out[1:-1, 1:-1] = (
        x[:-2, :-2] + 2.0 * x[:-2, 1:-1] + x[:-2, 2:]
        + 2.0 * x[1:-1, :-2] + 4.0 * x[1:-1, 1:-1] + 2.0 * x[1:-1, 2:]
        + x[2:, :-2] + 2.0 * x[2:, 1:-1] + x[2:, 2:]
    ) / 16.0
    return out


def sobel_magnitude(img, smooth=True):
    """|G_x| + |G_y| of the (optionally pre-smoothed) image; borders are 0."""
    x = np.asarray(img, dtype=np.float64)
    if x.shape[0] < 3 or x.shape[1] < 3:
        raise ImageTooSmall("need at least 3x3")
    if smooth:
        x = smooth3(x)
    gx = (
        x[:-2, 2:] + 2.0 * x[1:-1, 2:] + x[2:, 2:]
        - x[:-2, :-2] - 2.0 * x[1:-1, :-2] - x[2:, :-2]
    )
    gy = (
        x[2:, :-2] + 2.0 * x[2:, 1:-1] + x[2:, 2:]
        - x[:-2, :-2] - 2.0 * x[:-2, 1:-1] - x[:-2, 2:]
    )
    mag = np.zeros_like(x)
    mag[1:-1, 1:-1] = np.abs(gx) + np.abs(gy)
    return mag


def sobel_edges(img, threshold=300.0, smooth=True):
    return sobel_magnitude(img, smooth=smooth) > threshold


def dilate(mask, iterations=1):
    """Binary dilation with the 8-connected 3x3 structuring element."""
    mask = np.asarray(mask, dtype=bool)
    if iterations < 1:
        # scipy treats iterations < 1 as "repeat until stable"; we want a no-op
        return mask.copy()
    return ndimage.binary_dilation(
        mask, structure=EIGHT_CONNECTED, iterations=iterations
    )


def mask_edges(edges, silhouette, grow=1):
    """Keep edge pixels inside the (dilated) silhouette."""
    return np.asarray(edges, dtype=bool) & dilate(silhouette, iterations=grow)


# -- distance maps ----------------------------------------------------------------

METRICS = ("euclidean", "city_block", "chessboard", "quasi")
_BIG = 1e18


def distance_map(edges, metric="chessboard", d_sat=None):
    """Distance from every pixel to the nearest edge pixel.

    With no edge pixels, returns a map saturated at d_sat when given,
    otherwise raises NoEdges.
    """
    e = np.asarray(edges, dtype=bool)
    if metric not in METRICS:
        raise BadParams(f"unknown metric {metric!r}")
    if not e.any():
        if d_sat is None:
            raise NoEdges("no edge pixels")
        return np.full(e.shape, float(d_sat))
    if metric == "euclidean":
        return ndimage.distance_transform_edt(~e)
    d = np.where(e, 0.0, _BIG)
    if metric == "city_block":
        kernels.chamfer_transform(d, 1.0, 2.0)
    elif metric == "chessboard":
        kernels.chamfer_transform(d, 1.0, 1.0)
    else:  # quasi: axial step 1, diagonal step sqrt(2)
        kernels.chamfer_transform(d, 1.0, math.sqrt(2.0))
    return d


def quasi_distance(dx, dy):
    """Point-to-point quasi-euclidean distance (test oracle helper)."""
    ax, ay = abs(dx), abs(dy)
    if ax > ay:
        return ax + (math.sqrt(2.0) - 1.0) * ay
    return (math.sqrt(2.0) - 1.0) * ax + ay


# -- distance normalization --------------------------------------------------------


def normalize_map(d, fn="proportional", d_min=0.0, d_max=20.0, n_range=1.0, m=0.1):
    """Map distances to match scores in [0, 1], non-increasing in d.

    impulse:      1 at d = 0, else 0.
    proportional: 1 for d <= d_min, 0 for d >= d_max, linear from 1 down to
                  1 - n_range in between.
    exponential:  same endpoints, decaying at rate m instead of linearly.
    """
    d = np.asarray(d, dtype=np.float64)
    if fn == "impulse":
        return np.where(d == 0.0, 1.0, 0.0)
    if not d_min < d_max:
        raise BadParams("need d_min < d_max")
    if not 0.0 <= n_range <= 1.0:
        raise BadParams("n_range must be in [0, 1]")
    if fn == "proportional":
        mid = 1.0 - n_range * (d - d_min) / (d_max - d_min)
    elif fn == "exponential":
        if not 0.0 < m < 1.0:
            raise BadParams("m must be in (0, 1)")
        mid = n_range * np.exp(-m * (d - d_min)) + (1.0 - n_range)
    else:
        raise BadParams(f"unknown normalization {fn!r}")
    return np.where(d <= d_min, 1.0, np.where(d >= d_max, 0.0, mid))


# -- region of interest -------------------------------------------------------------


def compute_roi(silhouette, margin=5, min_area=4, max_blobs=4):
    """Expanded bounding box of the largest silhouette blobs, clamped to the image.

    Blobs below min_area are ignored; at most max_blobs largest are kept.
    An empty silhouette yields the full image.
    """
    sil = np.asarray(silhouette, dtype=bool)
    h, w = sil.shape
    labels, n = ndimage.label(sil, structure=EIGHT_CONNECTED)
    if n == 0:
        return Roi(0, 0, w, h)
    sizes = ndimage.sum_labels(sil, labels, index=np.arange(1, n + 1))
    keep = np.argsort(-sizes, kind="stable")[:max_blobs] + 1
    keep = [int(k) for k in keep if sizes[k - 1] >= min_area]
    if not keep:
        return Roi(0, 0, w, h)
    mask = np.isin(labels, keep)
    ys, xs = np.nonzero(mask)
    x0 = max(int(xs.min()) - margin, 0)
    y0 = max(int(ys.min()) - margin, 0)
    x1 = min(int(xs.max()) + margin, w - 1)
    y1 = min(int(ys.max()) + margin, h - 1)
    return Roi(x0, y0, x1 - x0 + 1, y1 - y0 + 1)


# -- packed encodings ----------------------------------------------------------------


def encode_reference(silhouette, nmap):
    """Pack silhouette flag and quantized normalized distance into one byte."""
    n = np.asarray(nmap, dtype=np.float64)
    if n.min() < 0.0 or n.max() > 1.0:
        raise BadParams("normalized distances must lie in [0, 1]")
    q = np.floor(127.0 * n + 0.5).astype(np.uint8)  # round half up
    sil = np.asarray(silhouette, dtype=bool)
    return np.where(sil, q | np.uint8(0x80), q).astype(np.uint8)


def decode_reference(ref):
    ref = np.asarray(ref, dtype=np.uint8)
    return (ref & 0x80) != 0, (ref & 0x7F).astype(np.float64) / 127.0


def encode_model(labels, edges):
    labels = np.asarray(labels, dtype=np.uint8)
    if labels.max(initial=0) > 127:
        raise BadParams("part labels must fit in 7 bits")
    return np.where(np.asarray(edges, dtype=bool), labels | np.uint8(0x80), labels)


def decode_model(img):
    img = np.asarray(img, dtype=np.uint8)
    return (img & 0x7F).astype(np.uint8), (img & 0x80) != 0
