import numpy as np


def fit_exponent(series):
    """Least-squares slope of ``log2 v`` against ``log2 a``.

    Returns ``(slope, residual)`` where the residual is the root-mean-square
    deviation of the log2 data from the fitted line.
    """
    pts = np.asarray(series, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("series must be a list of (abscissa, value) pairs")
    if pts.shape[0] < 3:
        raise ValueError("need at least 3 points to fit an exponent")
    if np.any(~np.isfinite(pts)) or np.any(pts <= 0):
        raise ValueError("abscissae and values must be positive and finite")
    la, lv = np.log2(pts[:, 0]), np.log2(pts[:, 1])
    A = np.stack([la, np.ones_like(la)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, lv, rcond=None)
    resid = lv - (slope * la + intercept)
    return float(slope), float(np.sqrt(np.mean(resid ** 2)))
