"""Multi-layer optical OFDM: superposition transmitters (ADO/HACO/LACO) and
the unified iterative receiver with residual-clipping-noise instrumentation.

Per layer j the receiver takes the FFT of the running residual, selects the
layer's subcarriers, scales them by 2 to undo the clipping attenuation
(except for a bias-clipped DCO layer, which is detected unscaled), performs
ML detection, remodulates the detected layer, and subtracts it from the
residual before moving to the next layer.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constellation import Constellation
from .modems import clip, effective_subcarriers, MULTI_LAYER_SCHEMES
from .numerics import hermitian_embed, make_rng, real_ifft

_LAYER_KINDS = {"ado": ("aco", "dco"), "haco": ("aco", "pam")}


@dataclass(frozen=True)
class LayerSpec:
    """Per-layer loading: independent data bins (k < N/2, mirrors implied),
    constellation order and frequency-domain symbol power per bin."""
    kind: str               # "aco" | "dco" | "pam" clipping behavior
    bins: np.ndarray        # independent subcarrier indices, ascending
    M: np.ndarray           # constellation order per bin
    sym_power: np.ndarray   # E|S_j(k)|^2 per bin

    def constellations(self):
        """Unit-power alphabets grouped by order, with the bin columns using each."""
        out = []
        for order in np.unique(self.M):
            cols = np.flatnonzero(self.M == order)
            if self.kind == "pam":
                const = Constellation.pam(int(order), 1.0)
            else:
                const = Constellation.qam(int(order), 1.0)
            out.append((const, cols))
        return out


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str
    n: int
    layers: list
    bias_multiplier: float = 3.0

    @property
    def n_loaded(self) -> int:
        """Loaded effective subcarriers counting both Hermitian mirrors."""
        return int(sum(2 * len(sp.bins) for sp in self.layers))

    @classmethod
    def uniform(cls, scheme: str, n: int, M, p_eff: float, layers: int | None = None,
                bias_multiplier: float = 3.0) -> "SchemeConfig":
        """Equal per-subcarrier effective power over all effective subcarriers.

        M may be a scalar or a per-layer sequence. The per-subcarrier
        effective power is eps = N^2 * p_eff / N'; clipped layers carry
        symbol power 4*eps (detection recovers S/2), a DCO layer carries eps.
        """
        scheme = scheme.lower()
        if scheme not in MULTI_LAYER_SCHEMES:
            raise ValueError(f"unknown multi-layer scheme {scheme!r}")
        if scheme == "laco":
            j_count = int(np.log2(n // 2)) if layers is None else layers
            kinds = ("aco",) * j_count
        else:
            j_count = 2
            kinds = _LAYER_KINDS[scheme]
        orders = [M] * j_count if np.isscalar(M) else list(M)
        if len(orders) != j_count:
            raise ValueError("per-layer order list does not match the layer count")
        bins = [effective_subcarriers(scheme, j + 1, n) for j in range(j_count)]
        n_prime = sum(len(b) for b in bins)
        eps = n ** 2 * p_eff / n_prime
        specs = []
        for kind, order, ks in zip(kinds, orders, bins):
            indep = ks[ks < n // 2]
            power = eps if kind == "dco" else 4.0 * eps
            specs.append(LayerSpec(kind, indep,
                                   np.full(indep.shape, order, dtype=np.int64),
                                   np.full(indep.shape, power)))
        return cls(scheme, n, specs, bias_multiplier)

    @classmethod
    def from_allocation(cls, n: int, bits, powers) -> "SchemeConfig":
        """LACO config from per-subcarrier bit loading B(k) and effective
        power P_s(k) (full-length arrays); unloaded bins are skipped."""
        from .modems import layer_index
        bits = np.asarray(bits)
        powers = np.asarray(powers)
        j_count = int(np.log2(n // 2))
        specs = []
        for j in range(1, j_count + 1):
            ks = effective_subcarriers("laco", j, n)
            indep = ks[(ks < n // 2) & (bits[ks] > 0)]
            if len(indep) == 0:
                continue
            specs.append(LayerSpec("aco", indep, 2 ** bits[indep].astype(np.int64),
                                   4.0 * powers[indep]))
        return cls("laco", n, specs)


@dataclass
class TxBatch:
    """One batch of transmitted frames plus ground truth."""
    config: SchemeConfig
    x: np.ndarray                 # (F, N) nonnegative signal
    sym_idx: list                 # per layer (F, n_j) symbol indices
    sym_val: list                 # per layer (F, n_j) complex loads
    bias: np.ndarray | None       # (F,) DCO bias, if any
    s: list | None = None         # per layer (F, N) pre-clipping frames
    x_layers: list | None = None  # per layer (F, N) transmitted components


def _draw_indices(rng, M, frames):
    # one uniform draw per bin keeps the stream layout independent of how
    # bins group by constellation order
    u = rng.random((frames, len(M)))
    return np.minimum((u * M).astype(np.int64), M - 1)


def _map_symbols(spec: LayerSpec, idx):
    vals = np.empty(idx.shape, dtype=complex)
    for const, cols in spec.constellations():
        vals[:, cols] = const.points[idx[:, cols]]
    return vals * np.sqrt(spec.sym_power)


def transmit(config: SchemeConfig, rng, frames: int, instrument: bool = False) -> TxBatch:
    """Draw random symbols for every layer and superpose the layer signals."""
    rng = make_rng(rng)
    n = config.n
    x = np.zeros((frames, n))
    sym_idx, sym_val, s_list, x_list = [], [], [], []
    bias = None
    for spec in config.layers:
        idx = _draw_indices(rng, spec.M, frames)
        vals = _map_symbols(spec, idx)
        s = real_ifft(hermitian_embed(vals, spec.bins, n))
        if spec.kind == "dco":
            bias = config.bias_multiplier * np.std(s, axis=-1)
            x_j = clip(s + bias[:, None])
        else:
            x_j = clip(s)
        x += x_j
        sym_idx.append(idx)
        sym_val.append(vals)
        if instrument:
            s_list.append(s)
            x_list.append(x_j)
    return TxBatch(config, x, sym_idx, sym_val, bias,
                   s_list if instrument else None,
                   x_list if instrument else None)


@dataclass
class RxResult:
    det_idx: list                       # per layer (F, n_j) detected indices
    errors: list | None = None          # per layer (F, n_j) bool, needs truth
    delta_power: np.ndarray | None = None   # (J, F) per-frame mean delta^2
    err_power: np.ndarray | None = None     # (J, F) per-frame mean e^2
    probe: np.ndarray | None = None         # (J, F) complex FFT(delta)[probe_bin]
    s_hat: list | None = None
    x_hat: list | None = None
    delta: list | None = None
    e: list | None = None
    y_resid: list | None = None             # residual after subtracting layers 1..j


def receive(y, config: SchemeConfig, bias=None, truth: TxBatch | None = None,
            instrument: bool = False, probe_bin: int | None = None,
            keep_signals: bool = False) -> RxResult:
    """Iterative layer-by-layer detection of an equalized frame batch.

    With `truth` supplied, detection errors are scored; with `instrument`,
    the per-layer residual clipping noise delta_t and detection error e_t are
    measured (requires a truth batch transmitted with instrument=True).
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n = config.n
    frames = y.shape[0]
    n_layers = len(config.layers)
    res = RxResult(det_idx=[])
    if truth is not None:
        res.errors = []
    if instrument:
        if truth is None or truth.s is None:
            raise ValueError("instrumented receive needs an instrumented truth batch")
        res.delta_power = np.zeros((n_layers, frames))
        res.err_power = np.zeros((n_layers, frames))
        if probe_bin is not None:
            res.probe = np.zeros((n_layers, frames), dtype=complex)
    if keep_signals:
        res.s_hat, res.x_hat, res.delta, res.e, res.y_resid = [], [], [], [], []

    y_cur = y.copy()
    for j, spec in enumerate(config.layers):
        Y = np.fft.fft(y_cur)
        scale = 1.0 if spec.kind == "dco" else 2.0
        obs = scale * Y[:, spec.bins] / np.sqrt(spec.sym_power)
        idx = np.empty(obs.shape, dtype=np.int64)
        det_vals = np.empty(obs.shape, dtype=complex)
        for const, cols in spec.constellations():
            idx[:, cols] = const.detect(obs[:, cols])
            det_vals[:, cols] = const.points[idx[:, cols]]
        det_vals *= np.sqrt(spec.sym_power)
        res.det_idx.append(idx)

        s_hat = real_ifft(hermitian_embed(det_vals, spec.bins, n))
        if spec.kind == "dco":
            b = bias if bias is not None else (truth.bias if truth is not None else None)
            if b is None:
                raise ValueError("DCO layer needs the bias side information")
            x_hat = clip(s_hat + np.asarray(b)[:, None])
        else:
            x_hat = clip(s_hat)
        y_cur = y_cur - x_hat

        if truth is not None:
            res.errors.append(idx != truth.sym_idx[j])
        delta = e = None
        if instrument or keep_signals:
            if truth is not None and truth.s is not None:
                s = truth.s[j]
                e = s_hat - s
                if spec.kind == "dco":
                    # bias-clipped layer: residual after subtraction, shifted
                    # so that the three-term decomposition stays exact
                    delta = truth.x_layers[j] - x_hat + 0.5 * e
                else:
                    delta = 0.5 * (np.abs(s) - np.abs(s + e))
        if instrument and delta is not None:
            res.delta_power[j] = np.mean(delta ** 2, axis=-1)
            res.err_power[j] = np.mean(e ** 2, axis=-1)
            if probe_bin is not None:
                ph = np.exp(-2j * np.pi * probe_bin * np.arange(n) / n)
                res.probe[j] = delta @ ph
        if keep_signals:
            res.s_hat.append(s_hat)
            res.x_hat.append(x_hat)
            res.delta.append(delta)
            res.e.append(e)
            res.y_resid.append(y_cur.copy())
    return res


def decompose_residual(y, truth: TxBatch, rx: RxResult, j: int):
    """Split the residual after removing layers 1..j into its three parts.

    Returns (noise, err, rcn) with noise = y - x the channel noise,
    err = -(1/2) sum_{t<=j} e_t, and rcn = sum_{t<=j} delta_t, satisfying
    y_j - sum_{t>j} x_t = noise + err + rcn exactly.
    """
    if truth.s is None or rx.e is None:
        raise ValueError("decompose_residual needs instrumented truth and kept signals")
    noise = np.atleast_2d(y) - truth.x
    err = -0.5 * sum(rx.e[: j])
    rcn = sum(rx.delta[: j])
    return noise, err, rcn
