"""QAM/PAM constellation geometry, ML detection, closed-form SER, and the
rim-based detection-error power model.

The rim model approximates E{|x - xhat|^2} for ML detection of M-QAM in
complex AWGN by summing contributions of neighbors in the first three
concentric rings around the transmitted point.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .numerics import qfunc

# Rim position labels: one digit = rim 1, two digits = rim 2, three = rim 3.
RIM_POSITIONS = (1, 2, 10, 11, 12, 100, 101, 102, 103)
# Squared distance of each position in units of d_min^2.
RIM_DIST2 = {1: 1, 2: 2, 10: 4, 11: 5, 12: 8, 100: 9, 101: 10, 102: 13, 103: 18}
# Axis offsets (in d_min units) realizing each position in the grid.
_RIM_OFFSET = {1: (1, 0), 2: (1, 1), 10: (2, 0), 11: (2, 1), 12: (2, 2),
               100: (3, 0), 101: (3, 1), 102: (3, 2), 103: (3, 3)}


def _axis_levels(m: int):
    # odd-integer levels -(m-1), ..., (m-1)
    return 2.0 * np.arange(m) - (m - 1)


@dataclass(frozen=True)
class Constellation:
    """Immutable symbol alphabet scaled to average power `power`.

    QAM uses a rectangular grid (square when log2(M) is even); PAM loads are
    purely imaginary. Point index order is row-major over (I level, Q level).
    """
    kind: str
    M: int
    power: float
    points: np.ndarray
    d_min: float
    m_i: int
    m_q: int

    @classmethod
    def qam(cls, M: int, power: float) -> "Constellation":
        b = int(round(np.log2(M)))
        if 2 ** b != M or M < 2:
            raise ValueError(f"QAM order must be a power of two >= 2, got {M}")
        m_i = 2 ** ((b + 1) // 2)
        m_q = 2 ** (b // 2)
        li = _axis_levels(m_i)
        lq = _axis_levels(m_q)
        grid = (li[:, None] + 1j * lq[None, :]).ravel()
        unit_power = (m_i ** 2 - 1 + m_q ** 2 - 1) / 3.0
        scale = np.sqrt(power / unit_power)
        return cls("qam", M, power, grid * scale, 2.0 * scale, m_i, m_q)

    @classmethod
    def pam(cls, M: int, power: float) -> "Constellation":
        if M < 2 or (M & (M - 1)) != 0:
            raise ValueError(f"PAM order must be a power of two >= 2, got {M}")
        levels = _axis_levels(M)
        scale = np.sqrt(3.0 * power / (M ** 2 - 1))
        return cls("pam", M, power, 1j * levels * scale, 2.0 * scale, 1, M)

    @property
    def is_square(self) -> bool:
        return self.kind == "qam" and self.m_i == self.m_q

    def detect(self, obs):
        """ML detection via per-axis quantization (exact for rectangular grids).

        Returns integer indices into `points`.
        """
        obs = np.asarray(obs, dtype=complex)
        half = self.d_min / 2.0
        if self.kind == "pam":
            q = np.clip(np.round((obs.imag / half + (self.M - 1)) / 2.0), 0, self.M - 1)
            return q.astype(np.int64)
        qi = np.clip(np.round((obs.real / half + (self.m_i - 1)) / 2.0), 0, self.m_i - 1)
        qq = np.clip(np.round((obs.imag / half + (self.m_q - 1)) / 2.0), 0, self.m_q - 1)
        return (qi * self.m_q + qq).astype(np.int64)


def ml_detect(observation, constellation: Constellation):
    """Brute-force nearest-point detection; ties broken by lowest index.

    Returns (index, point value). Vectorized over `observation`.
    """
    obs = np.asarray(observation, dtype=complex)
    d2 = np.abs(obs[..., None] - constellation.points) ** 2
    idx = np.argmin(d2, axis=-1)
    return idx, constellation.points[idx]


def min_distance(M: int, power: float) -> float:
    """d = sqrt(6 * power / (M - 1)); exact for square QAM grids."""
    if M < 2:
        raise ValueError("constellation order must be >= 2")
    return float(np.sqrt(6.0 * power / (M - 1)))


def ser_qam(M, eps, sigma2):
    """Symbol error rate of square M-QAM with average power eps in complex
    AWGN of power sigma2: 4a*Q(arg)*(1 - a*Q(arg)), a = (sqrt(M)-1)/sqrt(M).

    Approximate for rectangular (odd log2 M) grids.
    """
    a = (np.sqrt(M) - 1.0) / np.sqrt(M)
    q = qfunc(np.sqrt(3.0 * np.asarray(eps, dtype=float) / ((M - 1) * np.asarray(sigma2, dtype=float))))
    return 4.0 * a * q * (1.0 - a * q)


def ser_pam(M, eps, sigma2):
    """Symbol error rate of M-PAM with average power eps when only one axis of
    a complex AWGN of power sigma2 acts on the decision (per-axis variance
    sigma2/2): 2(M-1)/M * Q(sqrt(6 eps / ((M^2-1) sigma2))).
    """
    arg = np.sqrt(6.0 * np.asarray(eps, dtype=float) / ((M ** 2 - 1) * np.asarray(sigma2, dtype=float)))
    return 2.0 * (M - 1.0) / M * qfunc(arg)


def rim_probabilities(d_min: float, sigma2: float, rims: int = 3):
    """Per-position hit probabilities for the first three rims.

    p_a, p_b, p_c are the tail probabilities of one noise axis (variance
    sigma2/2) exceeding d/2, 3d/2, 5d/2. With rims=1, p_b = p_c = 0; with
    rims=2, p_c = 0, which zeroes the corresponding outer-rim positions.
    """
    if sigma2 <= 0:
        raise ValueError("noise power must be positive")
    if rims not in (1, 2, 3):
        raise ValueError("rims must be 1, 2 or 3")
    sigma_axis = np.sqrt(sigma2 / 2.0)
    p_a = float(qfunc(d_min / (2.0 * sigma_axis)))
    p_b = float(qfunc(3.0 * d_min / (2.0 * sigma_axis))) if rims >= 2 else 0.0
    p_c = float(qfunc(5.0 * d_min / (2.0 * sigma_axis))) if rims >= 3 else 0.0
    p = {
        1: (p_a - p_b) * (1.0 - 2.0 * p_a),
        2: (p_a - p_b) ** 2,
        10: (p_b - p_c) * (1.0 - 2.0 * p_a),
        11: (p_b - p_c) * (p_a - p_b),
        12: (p_b - p_c) ** 2,
        100: p_c * (1.0 - 2.0 * p_a),
        101: p_c * (p_a - p_b),
        102: p_c * (p_b - p_c),
        103: p_c ** 2,
    }
    return {"p_a": p_a, "p_b": p_b, "p_c": p_c, "positions": p}


@dataclass(frozen=True)
class RimModel:
    """Average neighbor counts n_i of an M-QAM grid for the rim positions."""
    M: int
    rims: int
    counts: dict  # position label -> average neighbor count


@lru_cache(maxsize=None)
def _neighbor_counts(M: int):
    c = Constellation.qam(M, float(M))  # any power; geometry only
    li = _axis_levels(c.m_i)
    lq = _axis_levels(c.m_q)
    occupied = {(int(a), int(b)) for a in li for b in lq}
    counts = {}
    for pos, (da, db) in _RIM_OFFSET.items():
        total = 0
        for (a, b) in occupied:
            # all sign/axis arrangements of the offset (da, db) in d_min units
            offsets = {(sa * 2 * da, sb * 2 * db) for sa in (1, -1) for sb in (1, -1)}
            offsets |= {(sa * 2 * db, sb * 2 * da) for sa in (1, -1) for sb in (1, -1)}
            total += sum((a + oa, b + ob) in occupied for oa, ob in offsets)
        counts[pos] = total / M
    return counts


def avg_neighbor_counts(M: int, rims: int = 3) -> RimModel:
    """Brute-force enumeration of average neighbor counts on the M-QAM grid."""
    if rims not in (1, 2, 3):
        raise ValueError("rims must be 1, 2 or 3")
    return RimModel(M, rims, dict(_neighbor_counts(M)))


def detection_error_power(d_min: float, sigma2: float, M: int, rims: int = 3) -> float:
    """Rim-model approximation of E{|x - xhat|^2} for ML detection of M-QAM
    with minimum distance d_min in complex AWGN of power sigma2.
    """
    if sigma2 == 0.0:
        return 0.0
    probs = rim_probabilities(d_min, sigma2, rims)["positions"]
    counts = avg_neighbor_counts(M, rims).counts
    d2 = d_min ** 2
    return float(sum(d2 * RIM_DIST2[i] * probs[i] * counts[i] for i in RIM_POSITIONS))
