"""Channel profiles, channel-inversion equalization, and the Monte Carlo
experiment engine (SER runs, clipping-noise power measurement, statistics).

Equalized reception model: y = x + v where v is the post-equalization noise,
white Gaussian for a flat channel and colored (per-bin power N*Pv/|H(k)|^2)
otherwise. Frames are processed in seeded batches so a run is reproducible
for a given (seed, batch size) pair.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import modems
from .modems import power_relations
from .multilayer import SchemeConfig, receive, transmit
from .numerics import make_rng, real_ifft, spawn_seeds

DEFAULT_FRAMES = 10_000
DEFAULT_BATCH = 500


@dataclass(frozen=True)
class ChannelProfile:
    """Per-subcarrier gain H(k) plus the pre-equalization white-noise power."""
    n: int
    noise_power: float = 1.0
    h: np.ndarray | None = None   # None means flat (H = 1)

    @classmethod
    def flat(cls, n: int, noise_power: float = 1.0) -> "ChannelProfile":
        return cls(n, noise_power)

    @classmethod
    def exponential(cls, n: int, att_db: float = 10.0, noise_power: float = 1.0) -> "ChannelProfile":
        """Low-pass magnitude profile |H(k)| = 10^(-a*min(k, N-k)/N) with the
        band-edge power attenuation att_db (a = att_db/10)."""
        a = att_db / 10.0
        k = np.arange(n)
        h = 10.0 ** (-a * np.minimum(k, n - k) / n)
        return cls(n, noise_power, h)

    @classmethod
    def from_csv(cls, path, n: int, noise_power: float = 1.0) -> "ChannelProfile":
        """Load (k, |H|) or (k, Re H, Im H) rows; unlisted bins default to 1."""
        h = np.ones(n, dtype=complex)
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                row = [c.strip() for c in row if c.strip()]
                if not row or not row[0].lstrip("-").isdigit():
                    continue  # header or blank
                k = int(row[0])
                if len(row) >= 3:
                    h[k] = float(row[1]) + 1j * float(row[2])
                else:
                    h[k] = float(row[1])
        if np.allclose(h.imag, 0.0):
            h = h.real
        return cls(n, noise_power, h)

    @property
    def gain(self) -> np.ndarray:
        return np.ones(self.n) if self.h is None else np.abs(self.h)

    def bin_noise_power(self) -> np.ndarray:
        """Post-equalization noise power per bin, P{V(k)} = N*Pv/|H(k)|^2."""
        g = self.gain
        if np.any(g == 0.0):
            raise ValueError("channel gain must be nonzero on all bins")
        return self.n * self.noise_power / g ** 2


def equalize(received, profile: ChannelProfile):
    """Channel inversion Y'(k) = Y(k)/H(k) applied to a time-domain frame."""
    y = np.asarray(received, dtype=float)
    if y.shape[-1] != profile.n:
        raise ValueError("frame length does not match the channel profile")
    if profile.h is None:
        return y.copy()
    h = np.asarray(profile.h)
    if np.any(np.abs(h) == 0.0):
        raise ValueError("channel gain must be nonzero on all bins")
    return np.fft.ifft(np.fft.fft(y) / h).real


def post_eq_noise(profile: ChannelProfile, rng, frames: int) -> np.ndarray:
    """Draw post-equalization noise frames.

    White time-domain Gaussian for a flat channel; otherwise the white noise
    is shaped by 1/|H(k)| in frequency (only the magnitude affects the
    post-equalization statistics).
    """
    rng = make_rng(rng)
    v0 = rng.normal(0.0, np.sqrt(profile.noise_power), size=(frames, profile.n))
    if profile.h is None:
        return v0
    g = profile.gain
    if np.any(g == 0.0):
        raise ValueError("channel gain must be nonzero on all bins")
    if not np.allclose(g, np.roll(g[::-1], 1)):
        raise ValueError("channel magnitude must satisfy |H(k)| = |H(N-k)|")
    return real_ifft(np.fft.fft(v0) / g)


def gamma_to_p_eff(scheme: str, gamma_db: float, noise_power: float = 1.0,
                   layers: int | None = None, effective: bool = False) -> float:
    """Convert an SNR point (electrical, or effective with effective=True)
    into the effective-power budget."""
    p = 10.0 ** (gamma_db / 10.0) * noise_power
    if effective:
        return p
    return p / power_relations(scheme, 1.0, layers).p_elec


@dataclass
class ExperimentConfig:
    scheme: str
    n: int = 1024
    M: object = 16                  # scalar or per-layer sequence
    layers: int | None = None
    gammas: tuple = (20.0,)
    gamma_effective: bool = False   # interpret gammas as effective SNR
    frames: int = DEFAULT_FRAMES
    seed: int = 0
    rims: int = 3
    channel: ChannelProfile | None = None
    batch: int = DEFAULT_BATCH

    def profile(self) -> ChannelProfile:
        return self.channel if self.channel is not None else ChannelProfile.flat(self.n)

    def scheme_config(self, gamma_db: float) -> SchemeConfig:
        p_eff = gamma_to_p_eff(self.scheme, gamma_db, self.profile().noise_power,
                               self.layers, self.gamma_effective)
        return SchemeConfig.uniform(self.scheme, self.n, self.M, p_eff, self.layers)


def _batches(frames: int, batch: int):
    sizes = [batch] * (frames // batch)
    if frames % batch:
        sizes.append(frames % batch)
    return sizes


def run_point(scheme_cfg: SchemeConfig, profile: ChannelProfile, frames: int, seed,
              batch: int = DEFAULT_BATCH, instrument: bool = False,
              probe_bin: int | None = None):
    """Monte Carlo run at a single operating point.

    Returns a dict with per-layer error counts, overall SER and its standard
    error, and (when instrumented) per-frame delta/error powers and probe-bin
    clipping-noise samples per layer.
    """
    sizes = _batches(frames, batch)
    seeds = spawn_seeds(seed, len(sizes))
    n_layers = len(scheme_cfg.layers)
    err_counts = np.zeros(n_layers, dtype=np.int64)
    delta_p, err_p, probes = [], [], []
    for size, ss in zip(sizes, seeds):
        rng = np.random.default_rng(ss)
        tx = transmit(scheme_cfg, rng, size, instrument=instrument)
        y = tx.x + post_eq_noise(profile, rng, size)
        rx = receive(y, scheme_cfg, truth=tx, instrument=instrument, probe_bin=probe_bin)
        for j in range(n_layers):
            err_counts[j] += int(np.count_nonzero(rx.errors[j]))
        if instrument:
            delta_p.append(rx.delta_power)
            err_p.append(rx.err_power)
            if probe_bin is not None:
                probes.append(rx.probe)
    n_prime = scheme_cfg.n_loaded
    ser = 2.0 * err_counts.sum() / (frames * n_prime)
    out = {
        "ser": ser,
        "stderr": float(np.sqrt(max(ser * (1.0 - ser), 0.0) / frames)),
        "layer_errors": err_counts,
        "layer_ser": [2.0 * err_counts[j] / (frames * 2 * len(scheme_cfg.layers[j].bins))
                      for j in range(n_layers)],
        "frames": frames,
    }
    if instrument:
        out["delta_power"] = np.concatenate(delta_p, axis=1)   # (J, frames)
        out["err_power"] = np.concatenate(err_p, axis=1)
        if probe_bin is not None:
            out["probe"] = np.concatenate(probes, axis=1)      # (J, frames) complex
    return out


def run_ser_experiment(cfg: ExperimentConfig):
    """Simulated SER over the configured SNR grid. Returns a list of rows
    {gamma, ser, stderr, layer_ser}."""
    rows = []
    profile = cfg.profile()
    for i, gamma in enumerate(cfg.gammas):
        point = run_point(cfg.scheme_config(gamma), profile, cfg.frames,
                          (cfg.seed, i), batch=cfg.batch)
        rows.append({"gamma": gamma, "ser": point["ser"], "stderr": point["stderr"],
                     "layer_ser": point["layer_ser"]})
    return rows


def measure_rcn_power(cfg: ExperimentConfig):
    """Measured per-layer residual-clipping-noise and detection-error powers.

    Returns rows {gamma, delta_power, err_power, delta_stderr} with per-layer
    arrays, averaged over frames.
    """
    rows = []
    profile = cfg.profile()
    for i, gamma in enumerate(cfg.gammas):
        point = run_point(cfg.scheme_config(gamma), profile, cfg.frames,
                          (cfg.seed, i), batch=cfg.batch, instrument=True)
        dp = point["delta_power"]
        rows.append({
            "gamma": gamma,
            "delta_power": dp.mean(axis=1),
            "delta_stderr": dp.std(axis=1) / np.sqrt(dp.shape[1]),
            "err_power": point["err_power"].mean(axis=1),
            "delta_power_frames": dp,
            "err_power_frames": point["err_power"],
        })
    return rows


def rcn_statistics(cfg: ExperimentConfig, probe_bin: int):
    """Frequency-domain clipping-noise statistics at one probe subcarrier.

    For each layer t with probe_bin in its affected set, collects the complex
    samples Delta_t(probe_bin), normalizes real/imaginary parts by the
    standard deviation of their combined sample set, and reports the
    normalized covariance matrix and Kolmogorov-Smirnov distances to N(0,1).
    """
    rows = []
    profile = cfg.profile()
    for i, gamma in enumerate(cfg.gammas):
        scheme_cfg = cfg.scheme_config(gamma)
        t_max = _probed_layers(scheme_cfg, probe_bin)
        if t_max == 0:
            raise ValueError(f"probe bin {probe_bin} is not affected by any layer")
        point = run_point(scheme_cfg, profile, cfg.frames, (cfg.seed, i),
                          batch=cfg.batch, instrument=True, probe_bin=probe_bin)
        samples = point["probe"][:t_max]            # (T, frames)
        centered = samples - samples.mean(axis=1, keepdims=True)
        var = np.mean(np.abs(centered) ** 2, axis=1)
        rho = (centered @ centered.conj().T) / samples.shape[1]
        rho /= np.sqrt(np.outer(var, var))
        norm_re, norm_im, ks = [], [], []
        for t in range(t_max):
            both = np.concatenate([samples[t].real, samples[t].imag])
            sd = np.std(both)
            re = samples[t].real / sd
            im = samples[t].imag / sd
            norm_re.append(re)
            norm_im.append(im)
            ks.append((stats.kstest(re, "norm").statistic,
                       stats.kstest(im, "norm").statistic))
        rows.append({"gamma": gamma, "rho": rho, "ks": ks,
                     "normalized_re": norm_re, "normalized_im": norm_im,
                     "delta_power": point["delta_power"].mean(axis=1)})
    return rows


def _probed_layers(scheme_cfg: SchemeConfig, probe_bin: int) -> int:
    count = 0
    for t in range(1, len(scheme_cfg.layers) + 1):
        if probe_bin in modems.affected_subcarriers(t, scheme_cfg.n):
            count = t
        else:
            break
    return count


def measure_power_relations(scheme: str, p_eff: float, n: int = 1024, M: int = 64,
                            frames: int = 1000, seed: int = 0,
                            layers: int | None = None, batch: int = DEFAULT_BATCH):
    """Monte Carlo estimate of (P_elec, P_opt) of a transmitter at the given
    effective power, for comparison against the closed forms."""
    if scheme in modems.MULTI_LAYER_SCHEMES:
        cfg = SchemeConfig.uniform(scheme, n, M, p_eff, layers)
    else:
        # single-layer schemes expressed as one-layer configs
        ks = modems.effective_subcarriers(scheme, 1, n)
        indep = ks[ks < n // 2]
        eps = n ** 2 * p_eff / len(ks)
        kind = scheme
        power = eps if kind == "dco" else 4.0 * eps
        from .multilayer import LayerSpec
        cfg = SchemeConfig(scheme, n, [LayerSpec(
            kind, indep, np.full(indep.shape, M, dtype=np.int64),
            np.full(indep.shape, power))])
    sizes = _batches(frames, batch)
    seeds = spawn_seeds(seed, len(sizes))
    sq_sum = 0.0
    mean_sum = 0.0
    count = 0
    for size, ss in zip(sizes, seeds):
        tx = transmit(cfg, np.random.default_rng(ss), size)
        sq_sum += float(np.sum(tx.x ** 2))
        mean_sum += float(np.sum(tx.x))
        count += tx.x.size
    return {"p_elec": sq_sum / count, "p_opt": mean_sum / count, "p_eff": p_eff}
