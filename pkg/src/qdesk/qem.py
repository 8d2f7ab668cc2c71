"""Zero-noise extrapolation.

The circuit is evaluated with its noise amplified by factors lambda >= 1, a
model is fitted to the values f(lambda), and the fit is read off at lambda = 0.
Amplification rescales every error probability (and the coherent over-rotation)
by lambda; global unitary folding is available as an alternative.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from . import density as dm
from .circuit import Circuit, fold, run_density, run_statevector
from .measure import estimate_from_probabilities, expectation

MAX_POLY_DEGREE = 3


class ZneError(ValueError):
    pass


@dataclass(frozen=True)
class FitModel:
    kind: str = "linear"
    degree: int = 1

    def __post_init__(self):
        if self.kind not in ("linear", "polynomial", "exponential"):
            raise ZneError(f"unknown fit model {self.kind!r}")
        if self.kind == "linear" and self.degree != 1:
            object.__setattr__(self, "degree", 1)
        if self.kind == "polynomial" and not 1 <= self.degree <= MAX_POLY_DEGREE:
            raise ZneError(f"polynomial degree must be in [1, {MAX_POLY_DEGREE}]")

    @property
    def n_params(self) -> int:
        return 2 if self.kind == "exponential" else self.degree + 1

    @classmethod
    def parse(cls, text: str | FitModel) -> FitModel:
        """'linear', 'exponential', 'polynomial:2', 'polynomial(2)' or 'poly2'."""
        if isinstance(text, FitModel):
            return text
        t = text.strip().lower()
        if t in ("linear", "exponential"):
            return cls(t)
        m = re.fullmatch(r"(?:polynomial|poly)\s*[:(]?\s*(\d+)\s*\)?", t)
        if m:
            return cls("polynomial", int(m.group(1)))
        raise ZneError(f"cannot parse fit model {text!r}")

    def __str__(self) -> str:
        return f"polynomial({self.degree})" if self.kind == "polynomial" else self.kind


@dataclass(frozen=True)
class ZneConfig:
    scale_factors: tuple[float, ...] = (1.0, 1.5, 2.0, 2.5)
    fit_model: FitModel = field(default_factory=FitModel)
    samples_per_point: int = 10_000
    method: str = "scale"

    def __post_init__(self):
        lams = tuple(float(x) for x in self.scale_factors)
        object.__setattr__(self, "scale_factors", lams)
        object.__setattr__(self, "fit_model", FitModel.parse(self.fit_model))
        if any(x < 1 for x in lams):
            raise ZneError("scale factors must be >= 1")
        if list(lams) != sorted(set(lams)):
            raise ZneError("scale factors must be sorted and distinct")
        if len(lams) < self.fit_model.n_params:
            raise ZneError(f"{self.fit_model} needs at least {self.fit_model.n_params} scale factors")
        if self.samples_per_point < 1:
            raise ZneError("samples_per_point must be positive")
        if self.method not in ("scale", "fold"):
            raise ZneError(f"unknown amplification method {self.method!r}")
        if self.method == "fold" and any(x != int(x) or int(x) % 2 == 0 for x in lams):
            raise ZneError("folding needs odd integer scale factors")

    @classmethod
    def from_dict(cls, d: dict | None) -> ZneConfig:
        d = dict(d or {})
        unknown = set(d) - {"scale_factors", "fit_model", "samples_per_point", "method"}
        if unknown:
            raise ZneError(f"unknown ZNE config keys {sorted(unknown)}")
        if "scale_factors" in d:
            d["scale_factors"] = tuple(d["scale_factors"])
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "scale_factors": list(self.scale_factors),
            "fit_model": str(self.fit_model),
            "samples_per_point": self.samples_per_point,
            "method": self.method,
        }


@dataclass
class NoisyValue:
    value: float
    stderr: float
    warnings: list[str]


def _amplified(c: Circuit, lam: float, method: str) -> tuple[Circuit, list[str]]:
    if method == "fold":
        return fold(c, int(lam)), []
    noise, warnings = c.noise.scaled(lam)
    return c.with_noise(noise), warnings


def noisy_expectation(
    c: Circuit,
    noise_scale: float = 1.0,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
    method: str = "scale",
) -> NoisyValue:
    """<M> of the circuit run with its noise amplified by ``noise_scale``.

    Exact when ``shots`` is None, otherwise the mean of ``shots`` sampled eigenvalues.
    """
    if noise_scale < 1:
        raise ZneError("noise scale must be >= 1")
    amp, warnings = _amplified(c, noise_scale, method)
    obs = amp.measured()
    rho = run_density(amp)
    if shots is None:
        return NoisyValue(dm.expectation(obs, rho), 0.0, warnings)
    rng = rng if rng is not None else np.random.default_rng()
    probs = np.array([p for _, p in dm.measure_probabilities(obs, rho)])
    est, se, _ = estimate_from_probabilities(obs.eigenvalues, probs, shots, rng)
    return NoisyValue(est, se, warnings)


def ideal_expectation(c: Circuit) -> float:
    """Noise-free value: no channels and no coherent over-rotation."""
    return expectation(c.measured(), run_statevector(c, cce_epsilon=0.0))


@dataclass
class ZneFit:
    model: FitModel
    f0: float
    params: np.ndarray
    residuals: np.ndarray
    stderr: float | None
    warnings: list[str] = field(default_factory=list)

    def predict(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if self.model.kind == "exponential":
            return self.params[0] * np.exp(-self.params[1] * lam)
        return np.polyval(self.params[::-1], lam)

    def to_dict(self) -> dict:
        return {
            "model": str(self.model),
            "f0": self.f0,
            "params": self.params.tolist(),
            "residuals": self.residuals.tolist(),
            "stderr": self.stderr,
            "warnings": self.warnings,
        }


def _exp_model(lam, a, b):
    return a * np.exp(-b * lam)


def zne_extrapolate(points: Sequence[tuple[float, float]], model="linear", stderrs: Sequence[float] | None = None) -> ZneFit:
    """Least-squares fit of f(lambda) and its value at lambda = 0.

    Polynomial params are in increasing power order (c0, c1, ...); exponential
    params are (a, b) for a exp(-b lambda). With ``stderrs`` the standard error
    of f0 is propagated through the fit.
    """
    model = FitModel.parse(model)
    lam = np.array([p[0] for p in points], dtype=float)
    f = np.array([p[1] for p in points], dtype=float)
    if not np.all(np.isfinite(lam)) or not np.all(np.isfinite(f)):
        raise ZneError("non-finite data point")
    if len(np.unique(lam)) < model.n_params:
        raise ZneError(
            f"rank-deficient fit: {len(np.unique(lam))} distinct scale factors for {model.n_params} parameters"
        )
    sig = None if stderrs is None else np.asarray(stderrs, dtype=float)
    if model.kind != "exponential":
        v = np.vander(lam, model.degree + 1, increasing=True)
        pinv = np.linalg.pinv(v)
        params = pinv @ f
        resid = f - v @ params
        se = None if sig is None else float(np.sqrt(np.sum(pinv[0] ** 2 * sig**2)))
        return ZneFit(model, float(params[0]), params, resid, se)
    warnings = []
    if np.all(f > 0) or np.all(f < 0):
        slope, icpt = np.polyfit(lam, np.log(np.abs(f)), 1)
        guess = [math.copysign(math.exp(icpt), f[0]), -slope]
    else:
        guess = [f[0], 0.0]
    use_sigma = sig is not None and np.all(sig > 0)
    try:
        params, cov = curve_fit(
            _exp_model, lam, f, p0=guess, sigma=sig if use_sigma else None, absolute_sigma=use_sigma, maxfev=10_000
        )
    except RuntimeError as exc:
        warnings.append(f"exponential fit did not converge ({exc}); using the log-linear estimate")
        params, cov = np.array(guess, dtype=float), np.full((2, 2), np.nan)
    params = np.asarray(params, dtype=float)
    resid = f - _exp_model(lam, *params)
    se = None
    if sig is not None and np.isfinite(cov[0, 0]):
        se = float(math.sqrt(max(cov[0, 0], 0.0)))
    return ZneFit(model, float(params[0]), params, resid, se, warnings)


@dataclass
class ZneReport:
    raw: float
    raw_stderr: float
    mitigated: float
    mitigated_stderr: float | None
    ideal: float
    scale_factors: list[float]
    values: list[float]
    stderrs: list[float]
    fit: ZneFit
    warnings: list[str]

    def to_dict(self) -> dict:
        return {
            "raw": self.raw,
            "raw_stderr": self.raw_stderr,
            "mitigated": self.mitigated,
            "mitigated_stderr": self.mitigated_stderr,
            "ideal": self.ideal,
            "points": [
                {"scale": lam, "value": v, "stderr": s}
                for lam, v, s in zip(self.scale_factors, self.values, self.stderrs)
            ],
            "fit": self.fit.to_dict(),
            "warnings": self.warnings,
        }


def zne_run(
    c: Circuit,
    config: ZneConfig | None = None,
    mode: str = "exact",
    rng: np.random.Generator | None = None,
) -> ZneReport:
    """Evaluate at every scale factor, fit, and extrapolate to zero noise."""
    config = config or ZneConfig()
    if mode not in ("exact", "shots"):
        raise ZneError(f"mode must be 'exact' or 'shots', got {mode!r}")
    shots = config.samples_per_point if mode == "shots" else None
    rng = rng if rng is not None else np.random.default_rng()
    vals, ses, warnings = [], [], []
    for lam in config.scale_factors:
        nv = noisy_expectation(c, lam, shots, rng, config.method)
        vals.append(nv.value)
        ses.append(nv.stderr)
        warnings += nv.warnings
    if config.scale_factors[0] == 1.0:
        raw, raw_se = vals[0], ses[0]
    else:
        nv = noisy_expectation(c, 1.0, shots, rng, config.method)
        raw, raw_se = nv.value, nv.stderr
    fit = zne_extrapolate(list(zip(config.scale_factors, vals)), config.fit_model, ses if shots else None)
    warnings += fit.warnings
    return ZneReport(
        raw, raw_se, fit.f0, fit.stderr, ideal_expectation(c), list(config.scale_factors), vals, ses, fit, warnings
    )
