"""scikit-learn style wrappers around the processor and the reference compressor."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .data import CompressorSettings, compressor_process
from .losses import SpectralConfig, esr
from .model import preset as get_preset
from .trainer import TrainConfig, build_models, train
from .validation import check_controls, check_positive_int, check_signals

__all__ = ["SPTModRegressor", "ReferenceCompressor"]


class SPTModRegressor(RegressorMixin, BaseEstimator):
    """Train an effect processor on (input, target) signal pairs.

    ``X`` and ``y`` are lists (or 2-D arrays) of mono signals; ``controls``
    gives each item's normalized control vector. ``predict`` streams each
    signal through the trained model and returns outputs shortened by
    ``warmup_`` samples at the start (the padding-free first pass consumes
    them as receptive field). ``window_sizes`` sets the STFT resolutions of
    the loss and must not exceed ``L``.
    """

    def __init__(self, preset="mini", N=2, B=4, L=4096, lr=5e-4, patience=76800,
                 max_iterations=1_000_000, max_epochs=None, max_seconds=None, eval_every=None,
                 precision="single", use_spn=True, validation_fraction=0.25, window_sizes=(512, 1024, 2048),
                 seed=0):
        self.preset = preset
        self.N = N
        self.B = B
        self.L = L
        self.lr = lr
        self.patience = patience
        self.max_iterations = max_iterations
        self.max_epochs = max_epochs
        self.max_seconds = max_seconds
        self.eval_every = eval_every
        self.precision = precision
        self.use_spn = use_spn
        self.validation_fraction = validation_fraction
        self.window_sizes = window_sizes
        self.seed = seed

    def _config(self):
        return get_preset(self.preset) if isinstance(self.preset, str) else self.preset

    def fit(self, X, y, controls=None, X_val=None, y_val=None, controls_val=None):
        for name in ("N", "B", "L"):
            check_positive_int(getattr(self, name), name)
        config = self._config()
        X, y = check_signals(X, "X"), check_signals(y, "y")
        if len(X) != len(y) or any(len(a) != len(b) for a, b in zip(X, y)):
            raise ValueError("X and y must hold signals of matching lengths")
        c = check_controls(controls, len(X), config.num_controls)
        items = [(a, b, np.zeros(0) if c is None else c[i]) for i, (a, b) in enumerate(zip(X, y))]
        if X_val is None:
            n_val = max(1, int(round(self.validation_fraction * len(items))))
            if n_val >= len(items):
                raise ValueError("need at least two items to hold one out for validation")
            order = np.random.default_rng(self.seed).permutation(len(items))
            val = [items[i] for i in order[:n_val]]
            items = [items[i] for i in order[n_val:]]
        else:
            Xv, yv = check_signals(X_val, "X_val"), check_signals(y_val, "y_val")
            cv = check_controls(controls_val, len(Xv), config.num_controls)
            val = [(a, b, np.zeros(0) if cv is None else cv[i]) for i, (a, b) in enumerate(zip(Xv, yv))]
        self.model_, self.spn_ = build_models(config, self.L, self.precision, self.seed, self.use_spn)
        cfg = TrainConfig(
            N=self.N, B=self.B, L=self.L, lr=self.lr, patience=self.patience,
            max_iterations=self.max_iterations, precision=self.precision, seed=self.seed,
            eval_every=self.eval_every, max_epochs=self.max_epochs, max_seconds=self.max_seconds,
        )
        self.record_ = train(self.model_, self.spn_, items, val, cfg, run_id="estimator",
                             spectral=SpectralConfig(tuple(self.window_sizes)))
        if self.record_.status != "completed":
            raise RuntimeError(f"training failed: {self.record_.error}")
        self.warmup_ = self.model_.L_nopad - self.L
        return self

    def predict(self, X, controls=None):
        check_is_fitted(self, "model_")
        X = check_signals(X, "X", min_length=self.model_.L_nopad)
        c = check_controls(controls, len(X), self.model_.config.num_controls)
        out = []
        for i, x in enumerate(X):
            y, _ = self.model_.stream(x, None if c is None else c[i : i + 1], chunk=self.L)
            out.append(y[0].astype(np.float64))
        return out

    def score(self, X, y, controls=None):
        """Negative mean error-to-signal ratio over the streamed outputs."""
        preds = self.predict(X, controls)
        y = check_signals(y, "y")
        return -float(np.mean([esr(t[self.warmup_ :][None], p[None]) for t, p in zip(y, preds)]))


class ReferenceCompressor(TransformerMixin, BaseEstimator):
    """The dataset's feed-forward compressor as a stateless transformer."""

    def __init__(self, threshold=0.0, ratio=3.0, attack=1e-3, release=3.0, knee=6.0, thrust=False,
                 thrust_cutoff=500.0, sample_rate=44100):
        self.threshold = threshold
        self.ratio = ratio
        self.attack = attack
        self.release = release
        self.knee = knee
        self.thrust = thrust
        self.thrust_cutoff = thrust_cutoff
        self.sample_rate = sample_rate

    def _settings(self):
        return CompressorSettings(self.threshold, self.attack, self.ratio, self.release, self.knee,
                                  self.thrust, self.thrust_cutoff)

    def fit(self, X=None, y=None):
        self.settings_ = self._settings()
        return self

    def transform(self, X):
        check_is_fitted(self, "settings_")
        signals = check_signals(X, "X")
        out = [compressor_process(x, self.settings_, self.sample_rate) for x in signals]
        if isinstance(X, np.ndarray) and X.ndim == 2:
            return np.stack(out)
        if isinstance(X, np.ndarray) and X.ndim == 1:
            return out[0]
        return out
