"""Multi-layer optical OFDM simulation and analysis toolkit."""

__version__ = "0.1.0"

from .allocate import AllocationResult, allocate, snr_gap, waterfill
from .channel import (ChannelProfile, ExperimentConfig, equalize,
                      gamma_to_p_eff, measure_power_relations,
                      measure_rcn_power, rcn_statistics, run_ser_experiment)
from .constellation import (Constellation, avg_neighbor_counts,
                            detection_error_power, min_distance, ml_detect,
                            rim_probabilities, ser_pam, ser_qam)
from .modems import (PowerTriple, aco_modulate, affected_subcarriers,
                     dco_modulate, effective_subcarriers, pam_modulate,
                     power_relations)
from .multilayer import (LayerSpec, RxResult, SchemeConfig, TxBatch,
                         decompose_residual, receive, transmit)
from .numerics import fft, gaussian_frame, ifft, qfunc, qfunc_inv, real_ifft
from .rcn import NoiseProfile, rcn_power_worst, worst_case_noise
from .ser import SerReport, evaluate_ser
