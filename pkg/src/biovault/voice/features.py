"""Frame-level speech features.

The chain: fixed-length frames at a hop interval, Hamming window, one-sided
power spectrum, triangular mel filterbank (HTK mel scale), log compression
with a fixed floor, and an orthonormal DCT-II whose first coefficients are the
MFCCs. Alongside the cepstra: autocorrelation pitch, LPC formants, spectral
centroid/bandwidth/rolloff, and first/second temporal differences.

Conventions pinned here:

* mel(f) = 2595 * log10(1 + f / 700); filters are placed on FFT bin indices so
  every triangle peaks at exactly 1.
* log energies are floored at log(1e-10).
* delta is the central difference c(t+1) - c(t-1) with the first and last
  frames copying their nearest computable value; delta-delta applies the same
  operator to the deltas.
* rolloff is the smallest bin frequency where the cumulative magnitude reaches
  rolloff_fraction of the total (the printed source formula is dimensionally
  broken; this is the standard reading).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateFrame, SignalTooShort, TooFewFrames
from .audio import AudioSignal

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class FeatureConfig:
    frame_len: int = 512
    hop: int = 160
    n_mels: int = 26
    n_mfcc: int = 13
    mel_fmin: float = 0.0
    mel_fmax: float = 8000.0
    rolloff_fraction: float = 0.5
    pitch_tau_min: int = 40
    pitch_tau_max: int = 320
    pitch_voicing_min: float = 0.3
    lpc_order: int = 12
    include_prosody: bool = False

    def __post_init__(self) -> None:
        if self.frame_len < 2:
            raise ValueError("frame_len must be at least 2")
        if not 0 < self.hop <= self.frame_len:
            raise ValueError("hop must lie in (0, frame_len]")
        if not 0 < self.n_mfcc <= self.n_mels:
            raise ValueError("need 0 < n_mfcc <= n_mels")
        if not 0 <= self.mel_fmin < self.mel_fmax:
            raise ValueError("need 0 <= mel_fmin < mel_fmax")
        if not 0.0 < self.rolloff_fraction <= 1.0:
            raise ValueError("rolloff_fraction must lie in (0, 1]")
        if not 0 < self.pitch_tau_min < self.pitch_tau_max:
            raise ValueError("need 0 < pitch_tau_min < pitch_tau_max")
        if self.pitch_tau_max >= self.frame_len:
            raise ValueError("pitch_tau_max must be below frame_len")
        if self.lpc_order < 1:
            raise ValueError("lpc_order must be positive")

    @property
    def gmm_dim(self) -> int:
        """Dimension of the per-frame model vector (cepstra + deltas [+ prosody])."""
        base = 3 * self.n_mfcc
        return base + 6 if self.include_prosody else base


@dataclass(frozen=True)
class FeatureVector:
    """Per-frame feature report (the model vector plus the scalar descriptors)."""

    mfcc: np.ndarray
    delta: np.ndarray
    delta2: np.ndarray
    pitch_period: int | None
    formants: tuple[float, float] | None
    spectral: tuple[float, float, float]


# -- framing and windows ---------------------------------------------------------

def hamming_window(n: int) -> np.ndarray:
    """w(i) = 0.54 - 0.46 cos(2 pi i / (n - 1))."""
    if n < 2:
        raise ValueError("window length must be at least 2")
    i = np.arange(n)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * i / (n - 1))


def frame_signal(signal: AudioSignal, cfg: FeatureConfig) -> np.ndarray:
    """Raw frames (n_frames, frame_len) starting at multiples of hop."""
    n = signal.samples.size
    if n < cfg.frame_len:
        raise SignalTooShort(f"signal has {n} samples, frame needs {cfg.frame_len}")
    starts = np.arange(0, n - cfg.frame_len + 1, cfg.hop)
    return np.stack([signal.samples[s:s + cfg.frame_len] for s in starts])


def frame_window(signal: AudioSignal, cfg: FeatureConfig) -> np.ndarray:
    """Hamming-windowed frames (n_frames, frame_len)."""
    return frame_signal(signal, cfg) * hamming_window(cfg.frame_len)


# -- spectra ---------------------------------------------------------------------

def power_spectrum(frame: np.ndarray) -> np.ndarray:
    """One-sided power spectrum |DFT|^2 for bins 0 .. N // 2.

    Accepts one frame (N,) or a batch (M, N).
    """
    frame = np.asarray(frame, dtype=np.float64)
    spectrum = np.fft.rfft(frame, axis=-1)
    return np.abs(spectrum) ** 2


def bin_frequencies(frame_len: int, sample_rate: int) -> np.ndarray:
    return np.arange(frame_len // 2 + 1) * (sample_rate / frame_len)


def mel_scale(freq_hz):
    return 2595.0 * np.log10(1.0 + np.asarray(freq_hz, dtype=np.float64) / 700.0)


def mel_inverse(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: FeatureConfig, sample_rate: int) -> np.ndarray:
    """Triangular filters (n_mels, frame_len // 2 + 1), each peaking at 1.

    Band edges are spaced uniformly on the mel scale and snapped to FFT bins;
    the snap must leave every filter at least one bin wide on each side.
    """
    if cfg.mel_fmax > sample_rate / 2:
        raise ValueError(
            f"mel_fmax {cfg.mel_fmax} exceeds the Nyquist frequency {sample_rate / 2}"
        )
    n_bins = cfg.frame_len // 2 + 1
    mel_points = np.linspace(
        mel_scale(cfg.mel_fmin), mel_scale(cfg.mel_fmax), cfg.n_mels + 2
    )
    hz_points = mel_inverse(mel_points)
    bins = np.floor((cfg.frame_len + 1) * hz_points / sample_rate).astype(int)
    bins = np.clip(bins, 0, n_bins - 1)
    if np.any(np.diff(bins) < 1):
        raise ValueError(
            "mel filters collapse at this FFT resolution; "
            "raise frame_len or lower n_mels"
        )
    bank = np.zeros((cfg.n_mels, n_bins))
    for j in range(cfg.n_mels):
        left, center, right = bins[j], bins[j + 1], bins[j + 2]
        rise = np.arange(left, center + 1)
        bank[j, rise] = (rise - left) / (center - left)
        fall = np.arange(center, right + 1)
        bank[j, fall] = (right - fall) / (right - center)
        bank[j, center] = 1.0
    return bank


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix G with G @ G.T == I.

    G[k, i] = c_k cos(pi k (2i + 1) / (2n)), c_0 = sqrt(1/n), c_k = sqrt(2/n).
    """
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    mat = np.cos(np.pi * k * (2 * i + 1) / (2 * n)) * np.sqrt(2.0 / n)
    mat[0, :] = np.sqrt(1.0 / n)
    return mat


def mfcc(frames: np.ndarray, sample_rate: int, cfg: FeatureConfig) -> np.ndarray:
    """MFCCs (n_frames, n_mfcc) from windowed frames.

    Power spectrum -> mel filterbank energies -> natural log (floored at
    log(1e-10)) -> orthonormal DCT-II -> first n_mfcc coefficients.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    spectra = power_spectrum(frames)
    bank = mel_filterbank(cfg, sample_rate)
    energies = spectra @ bank.T
    logs = np.log(np.maximum(energies, LOG_FLOOR))
    cepstra = logs @ dct_matrix(cfg.n_mels).T
    return cepstra[:, : cfg.n_mfcc]


# -- pitch -----------------------------------------------------------------------

def autocorrelation(frame: np.ndarray, max_lag: int) -> np.ndarray:
    """phi(tau) = sum_n x[n] x[n + tau] for tau = 0 .. max_lag."""
    frame = np.asarray(frame, dtype=np.float64)
    n = frame.size
    if max_lag >= n:
        raise ValueError("max_lag must be below the frame length")
    return np.array([float(frame[: n - tau] @ frame[tau:]) for tau in range(max_lag + 1)])


def pitch_period(frame: np.ndarray, cfg: FeatureConfig) -> int | None:
    """Lag of the autocorrelation peak in [tau_min, tau_max], or None when the
    normalized peak falls below the voicing floor (unvoiced/aperiodic frame)."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.size <= cfg.pitch_tau_max:
        raise SignalTooShort(
            f"pitch needs frames longer than {cfg.pitch_tau_max} samples"
        )
    phi = autocorrelation(frame, cfg.pitch_tau_max)
    if phi[0] <= 0.0:
        raise DegenerateFrame("frame has no energy")
    window = phi[cfg.pitch_tau_min: cfg.pitch_tau_max + 1]
    best = int(np.argmax(window))
    if window[best] / phi[0] < cfg.pitch_voicing_min:
        return None
    return cfg.pitch_tau_min + best


# -- formants --------------------------------------------------------------------

def levinson_durbin(r: np.ndarray, order: int) -> np.ndarray:
    """Solve the Toeplitz normal equations for LPC coefficients a_1 .. a_p
    predicting x[n] as sum_i a_i x[n - i]."""
    a = np.zeros(order)
    error = float(r[0])
    if error <= 0.0:
        raise DegenerateFrame("zero-energy frame has no LPC solution")
    for i in range(order):
        acc = float(r[i + 1]) - float(a[:i] @ r[i:0:-1])
        k = acc / error
        new_a = a.copy()
        new_a[i] = k
        new_a[:i] = a[:i] - k * a[:i][::-1]
        a = new_a
        error *= 1.0 - k * k
        if error <= 0.0:
            error = 1e-12
    return a


def formants(
    frame: np.ndarray, sample_rate: int, cfg: FeatureConfig, min_freq: float = 90.0
) -> tuple[float, float]:
    """First two resonance frequencies from the LPC polynomial roots.

    Roots with positive imaginary part map to frequencies via their angle;
    anything at or below min_freq is discarded as a DC artifact. The two
    lowest surviving frequencies come back sorted.
    """
    frame = np.asarray(frame, dtype=np.float64)
    r = autocorrelation(frame, cfg.lpc_order)
    a = levinson_durbin(r, cfg.lpc_order)
    # A(z) = 1 - sum a_i z^-i; poles are the roots of the coefficient poly.
    roots = np.roots(np.concatenate(([1.0], -a)))
    roots = roots[np.imag(roots) > 1e-9]
    freqs = np.sort(np.angle(roots) * sample_rate / (2.0 * np.pi))
    freqs = freqs[freqs > min_freq]
    if freqs.size < 2:
        raise DegenerateFrame("fewer than two resonances above the frequency floor")
    return float(freqs[0]), float(freqs[1])


# -- spectral shape ----------------------------------------------------------------

def spectral_moments(
    freqs: np.ndarray, mags: np.ndarray, rolloff_fraction: float
) -> tuple[float, float, float]:
    """Centroid, bandwidth, and rolloff of a magnitude spectrum.

    centroid  f_c = sum f X / sum X
    bandwidth SB  = sqrt(sum (f - f_c)^2 X / sum X)
    rolloff   f_r = smallest f where the cumulative magnitude reaches
                    rolloff_fraction * total (inclusive)
    """
    freqs = np.asarray(freqs, dtype=np.float64)
    mags = np.asarray(mags, dtype=np.float64)
    if freqs.shape != mags.shape:
        raise ValueError("freqs and mags must align")
    total = float(mags.sum())
    if total <= 0.0:
        raise DegenerateFrame("spectrum is all zero")
    centroid = float((freqs * mags).sum() / total)
    bandwidth = float(np.sqrt(((freqs - centroid) ** 2 * mags).sum() / total))
    cumulative = np.cumsum(mags)
    idx = int(np.searchsorted(cumulative, rolloff_fraction * total - 1e-12))
    rolloff = float(freqs[min(idx, freqs.size - 1)])
    return centroid, bandwidth, rolloff


def spectral_features(
    frame: np.ndarray, sample_rate: int, cfg: FeatureConfig
) -> tuple[float, float, float]:
    """Spectral moments of one frame's one-sided magnitude spectrum."""
    frame = np.asarray(frame, dtype=np.float64)
    mags = np.abs(np.fft.rfft(frame))
    freqs = bin_frequencies(frame.size, sample_rate)
    return spectral_moments(freqs, mags, cfg.rolloff_fraction)


# -- temporal differences -----------------------------------------------------------

def _delta(seq: np.ndarray) -> np.ndarray:
    out = np.empty_like(seq)
    out[1:-1] = seq[2:] - seq[:-2]
    out[0] = out[1]
    out[-1] = out[-2]
    return out


def delta_features(seq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central differences over time: delta(t) = c(t+1) - c(t-1), and the same
    operator applied again for the second difference. Edges copy their nearest
    computable value. Needs at least 3 frames."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim == 1:
        seq = seq[:, None]
    if seq.shape[0] < 3:
        raise TooFewFrames(f"delta features need >= 3 frames, got {seq.shape[0]}")
    delta = _delta(seq)
    return delta, _delta(delta)


# -- aggregate extraction -------------------------------------------------------------

def feature_matrix(signal: AudioSignal, cfg: FeatureConfig) -> np.ndarray:
    """The per-frame model vectors: MFCC + delta + delta-delta, and optionally
    pitch/formants/spectral scalars when cfg.include_prosody is set (absent
    pitch encodes as 0, degenerate formants as 0s)."""
    windowed = frame_window(signal, cfg)
    cepstra = mfcc(windowed, signal.sample_rate, cfg)
    if cepstra.shape[0] < 3:
        raise TooFewFrames("need at least 3 frames for the delta features")
    delta, delta2 = delta_features(cepstra)
    columns = [cepstra, delta, delta2]
    if cfg.include_prosody:
        raw = frame_signal(signal, cfg)
        extras = np.zeros((raw.shape[0], 6))
        for t in range(raw.shape[0]):
            try:
                tau = pitch_period(raw[t], cfg)
            except DegenerateFrame:
                tau = None
            extras[t, 0] = float(tau) if tau is not None else 0.0
            try:
                f1, f2 = formants(windowed[t], signal.sample_rate, cfg)
            except DegenerateFrame:
                f1 = f2 = 0.0
            extras[t, 1], extras[t, 2] = f1, f2
            try:
                extras[t, 3:] = spectral_features(windowed[t], signal.sample_rate, cfg)
            except DegenerateFrame:
                extras[t, 3:] = 0.0
        columns.append(extras)
    return np.hstack(columns)


def analyze(signal: AudioSignal, cfg: FeatureConfig) -> list[FeatureVector]:
    """Per-frame feature report for inspection and calibration tooling."""
    windowed = frame_window(signal, cfg)
    raw = frame_signal(signal, cfg)
    cepstra = mfcc(windowed, signal.sample_rate, cfg)
    if cepstra.shape[0] < 3:
        raise TooFewFrames("need at least 3 frames for the delta features")
    delta, delta2 = delta_features(cepstra)
    out: list[FeatureVector] = []
    for t in range(cepstra.shape[0]):
        try:
            tau = pitch_period(raw[t], cfg)
        except DegenerateFrame:
            tau = None
        try:
            fmts: tuple[float, float] | None = formants(
                windowed[t], signal.sample_rate, cfg
            )
        except DegenerateFrame:
            fmts = None
        try:
            spec = spectral_features(windowed[t], signal.sample_rate, cfg)
        except DegenerateFrame:
            spec = (0.0, 0.0, 0.0)
        out.append(
            FeatureVector(
                mfcc=cepstra[t].copy(),
                delta=delta[t].copy(),
                delta2=delta2[t].copy(),
                pitch_period=tau,
                formants=fmts,
                spectral=spec,
            )
        )
    return out
