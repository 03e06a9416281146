"""Fitting P(m) = A + B p^m to decay data, with bootstrap intervals.

The least-squares problem has three parameters, so a hand-written damped
Gauss-Newton (Levenberg-Marquardt) solver with an analytic Jacobian is used.
It is vectorised over a leading batch axis, which makes the 1000-resample
bootstrap a single solve instead of a Python loop.

A only becomes identifiable once the data approach the asymptote; before
that, A, B and p trade off against each other and a free A mostly fits
noise.  ``pin_floor="auto"`` keeps A at its theoretical floor while the
pinned curve still retains more than a quarter of its amplitude at the
largest depth.  The same choice is repeated inside every bootstrap
resample.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

MAX_ITER = 200
STEP_TOL = 1e-12
PIN_RETENTION = 0.25


class DegenerateFitError(ValueError):
    pass


@dataclass(frozen=True)
class DecayFitResult:
    A: float
    B: float
    p: float
    p_ci_low: float
    p_ci_high: float
    r: float
    r_ci_low: float
    r_ci_high: float
    residual_rms: float
    n_samples: int
    width: int = 1
    protocol: str = "DRB"
    layers_per_depth: int = 1
    floor_pinned: bool = False
    converged: bool = True
    message: str = ""
    bootstrap_p: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        keys = ("A", "B", "p", "p_ci_low", "p_ci_high", "r", "r_ci_low", "r_ci_high", "residual_rms",
                "n_samples", "width", "protocol", "layers_per_depth", "floor_pinned", "converged", "message")
        return {k: getattr(self, k) for k in keys}


def error_rate_from_p(p: float, w: int, protocol: str = "DRB", layers_per_depth: int = 1) -> float:
    """(4^w - 1)/4^w (1 - p_layer), where p_layer = p^(1/layers_per_depth).

    The same conversion serves the polarization decays of DRB and MRB and
    the Pauli-averaged decay of CRB (where it is a process infidelity).
    """
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if str(protocol).upper() not in ("DRB", "MRB", "CRB"):
        raise ValueError(f"unknown protocol {protocol!r}")
    d2 = 4**w
    p_layer = p ** (1.0 / layers_per_depth)
    return float(min(max((d2 - 1) / d2 * (1 - p_layer), 0.0), 1.0))


def _model(theta: np.ndarray, m: np.ndarray) -> np.ndarray:
    a, b, p = theta[..., 0:1], theta[..., 1:2], theta[..., 2:3]
    return a + b * p**m


def _jacobian(theta: np.ndarray, m: np.ndarray) -> np.ndarray:
    b, p = theta[..., 1:2], theta[..., 2:3]
    pm = p**m
    dp = b * m * np.where(m > 0, p ** np.maximum(m - 1, 0), 0.0)
    return np.stack([np.ones_like(pm), pm, dp], axis=-1)


def _solve_lm(y: np.ndarray, weights: np.ndarray, m: np.ndarray, theta0: np.ndarray,
              free: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched weighted LM.  ``free`` masks which of (A, B, p) are optimised.

    y: (R, M) per-depth means; weights: (M,) or (R, M); theta0: (R, 3).
    Returns (theta, converged flags).
    """
    theta = theta0.copy()
    n_batch = theta.shape[0]
    lam = np.full(n_batch, 1e-3)
    done = np.zeros(n_batch, dtype=bool)
    mask = free.astype(float)
    eye = np.eye(3)

    def cost(t):
        res = y - _model(t, m)
        return np.sum(weights * res**2, axis=-1)

    c = cost(theta)
    for _ in range(MAX_ITER):
        active = ~done
        if not active.any():
            break
        res = y - _model(theta, m)
        jac = _jacobian(theta, m) * mask
        jtw = np.swapaxes(jac, -1, -2) * np.atleast_2d(weights)[:, None, :]
        g = np.einsum("rkm,rm->rk", jtw, res)
        h = jtw @ jac
        diag = np.einsum("rkk->rk", h)
        damp = lam[:, None, None] * (np.maximum(diag, 1e-12)[:, :, None] * eye)
        # frozen parameters get a unit diagonal so the system stays regular
        h_aug = h + damp + (1 - mask)[None, :, None] * eye
        step = np.linalg.solve(h_aug, g[..., None])[..., 0] * mask
        trial = theta + step
        trial[:, 2] = np.clip(trial[:, 2], 0.0, 1.0)
        c_trial = cost(trial)
        better = (c_trial <= c) & active
        actual_step = np.linalg.norm(trial - theta, axis=-1)
        theta = np.where(better[:, None], trial, theta)
        c = np.where(better, c_trial, c)
        lam = np.where(better, np.maximum(lam / 10, 1e-12), lam * 10)
        done |= active & ((better & (actual_step < STEP_TOL)) | (lam > 1e16))
    return theta, done


def _initial_theta(y: np.ndarray, m: np.ndarray, floor: float) -> np.ndarray:
    """Log-linear regression of log(y - floor) against m, batched over rows.

    Depths whose mean has already reached the floor carry no slope
    information and are left out of the regression.
    """
    shifted = y - floor
    sign = np.where(np.sum(shifted, axis=-1) >= 0, 1.0, -1.0)[:, None]
    mag = sign * shifted
    use = mag > 1e-3 * np.max(mag, axis=-1, keepdims=True)
    use &= mag > 1e-12
    few = use.sum(axis=-1) < 2
    use[few] = True
    wts = use.astype(float)
    z = np.log(np.maximum(mag, 1e-12))
    n = wts.sum(axis=-1)
    m_bar = (wts * m).sum(axis=-1) / n
    z_bar = (wts * z).sum(axis=-1) / n
    mc = m - m_bar[:, None]
    slope = (wts * (z - z_bar[:, None]) * mc).sum(axis=-1) / np.maximum((wts * mc**2).sum(axis=-1), 1e-12)
    slope = np.where(few, np.log(0.5), slope)
    p0 = np.clip(np.exp(slope), 1e-3, 1.0)
    b0 = sign[:, 0] * np.exp(z_bar - slope * m_bar)
    return np.stack([np.full_like(p0, floor), b0, p0], axis=-1)


def _fit_batch(y: np.ndarray, weights: np.ndarray, m: np.ndarray, floor: float,
               pinned: bool) -> tuple[np.ndarray, np.ndarray]:
    theta0 = _initial_theta(y, m, floor)
    # the pinned fit is also the starting point of the free fit
    theta, ok = _solve_lm(y, weights, m, theta0, np.array([False, True, True]))
    if not pinned:
        theta, ok = _solve_lm(y, weights, m, theta, np.array([True, True, True]))
    return theta, ok


def _group(depths: Sequence[int], values: Sequence[float]) -> tuple[np.ndarray, list[np.ndarray]]:
    depths = np.asarray(depths, dtype=int)
    values = np.asarray(values, dtype=float)
    if depths.shape != values.shape or depths.ndim != 1:
        raise ValueError("depths and values must be equal-length 1-D sequences")
    if not np.all(np.isfinite(values)):
        raise ValueError("decay values must be finite")
    uniq = np.unique(depths)
    if len(uniq) < 2:
        raise ValueError("need at least two distinct depths")
    return uniq, [values[depths == d] for d in uniq]


def _prefer_pinned(theta_pinned: np.ndarray, m: np.ndarray) -> np.ndarray:
    return theta_pinned[:, 2] ** m.max() > PIN_RETENTION


def fit_decay_arrays(depths: Sequence[int], values: Sequence[float], model_floor: float, *,
                     width: int = 1, protocol: str = "DRB", layers_per_depth: int = 1,
                     n_bootstrap: int = 1000, seed: int = 0,
                     pin_floor: bool | str = "auto") -> DecayFitResult:
    m, groups = _group(depths, values)
    counts = np.array([len(g) for g in groups], dtype=float)
    means = np.array([g.mean() for g in groups])
    weights = counts / counts.sum()
    n_samples = int(counts.sum())
    mf = m.astype(float)

    if np.ptp(means) < 1e-12 and all(np.ptp(g) < 1e-12 for g in groups):
        level = float(means[0])
        if abs(level - model_floor) < 1e-12:
            raise DegenerateFitError(f"all samples sit at the floor {model_floor}; no decay information")
        # a flat curve away from the floor is a perfect, undecayed signal
        return DecayFitResult(model_floor, level - model_floor, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0,
                              n_samples, width, protocol, layers_per_depth, True, True,
                              "constant data: no decay")

    auto = pin_floor == "auto"
    theta, ok = _fit_batch(means[None], weights, mf, model_floor, pinned=True)
    pinned = bool(_prefer_pinned(theta, mf)[0] if auto else pin_floor)
    if not pinned:
        theta, ok = _fit_batch(means[None], weights, mf, model_floor, pinned=False)
    a, b, p = (float(v) for v in theta[0])
    converged = bool(ok[0])

    if n_bootstrap:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB007]))
        draws = [g[rng.integers(len(g), size=(n_bootstrap, len(g)))] for g in groups]
        boot_means = np.stack([d.mean(axis=1) for d in draws], axis=1)
        bt, _ = _fit_batch(boot_means, weights, mf, model_floor, pinned=True)
        if auto:
            # redo the model choice per resample so the interval carries its uncertainty
            keep = _prefer_pinned(bt, mf)
            if not keep.all():
                free, _ = _fit_batch(boot_means[~keep], weights, mf, model_floor, pinned=False)
                bt[~keep] = free
        elif not pinned:
            bt, _ = _fit_batch(boot_means, weights, mf, model_floor, pinned=False)
        boot_p = bt[:, 2]
        lo, hi = np.percentile(boot_p, [2.5, 97.5])
    else:
        boot_p = None
        lo = hi = p
    lo, hi = float(min(lo, p)), float(max(hi, p))

    resid = means - (a + b * p**mf)
    rms = float(np.sqrt(np.sum(weights * resid**2)))
    conv = lambda q: error_rate_from_p(q, width, protocol, layers_per_depth)
    message = "" if converged else f"no convergence within {MAX_ITER} iterations"
    return DecayFitResult(a, b, p, lo, hi, conv(p), conv(hi), conv(lo), rms, n_samples, width, protocol,
                          layers_per_depth, pinned, converged, message, boot_p)


def fit_decay(samples: Iterable, model_floor: float, **kwargs) -> DecayFitResult:
    """Fit samples carrying ``depth`` and ``value`` attributes (e.g. DecaySample)."""
    samples = list(samples)
    return fit_decay_arrays([s.depth for s in samples], [s.value for s in samples], model_floor, **kwargs)


def average_pauli_fits(fits: Sequence[DecayFitResult]) -> DecayFitResult:
    """Uniform average of per-Pauli decay fits into one process-fidelity estimate.

    The interval comes from averaging the per-Pauli bootstrap draws
    draw-by-draw, so it reflects the spread of the mean decay.
    """
    if not fits:
        raise ValueError("no fits to average")
    first = fits[0]
    p = float(np.mean([f.p for f in fits]))
    draws = [f.bootstrap_p for f in fits]
    if all(d is not None for d in draws) and len({len(d) for d in draws}) == 1:
        mean_draws = np.mean(draws, axis=0)
        lo, hi = np.percentile(mean_draws, [2.5, 97.5])
    else:
        mean_draws = None
        lo, hi = np.mean([f.p_ci_low for f in fits]), np.mean([f.p_ci_high for f in fits])
    lo, hi = float(min(lo, p)), float(max(hi, p))
    conv = lambda q: error_rate_from_p(q, first.width, first.protocol, first.layers_per_depth)
    bad = [f.message for f in fits if not f.converged]
    return replace(
        first,
        A=float(np.mean([f.A for f in fits])),
        B=float(np.mean([f.B for f in fits])),
        p=p, p_ci_low=lo, p_ci_high=hi,
        r=conv(p), r_ci_low=conv(hi), r_ci_high=conv(lo),
        residual_rms=float(np.sqrt(np.mean([f.residual_rms**2 for f in fits]))),
        n_samples=sum(f.n_samples for f in fits),
        floor_pinned=all(f.floor_pinned for f in fits),
        converged=not bad,
        message="; ".join(bad),
        bootstrap_p=mean_draws,
    )
