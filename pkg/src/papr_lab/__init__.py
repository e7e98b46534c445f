"""papr-lab: OFDM/MIMO link simulation with adaptive peak cancellation under
EVM and ACLR budgets, limiter baselines, and theoretical BER prediction."""

from .ofdm import (OfdmConfig, ConstellationSpec, map_bits, demap_hard, modulate,
                   demodulate, add_awgn, noise_sigma_for_ebn0)
from .pc import (WindowParams, PcKernel, PeakEvent, DistortionTracker, PcReport,
                 ThresholdSolution, synthesize_kernel, kernel_spectral_split,
                 kernel_alpha, clip_excess_power, clip_excess_power_quad,
                 solve_optimum_threshold, detect_peak, estimate_increments, cancel_peaks)
from .metrics import (CcdfCurve, ComplexityCounter, measure_evm, measure_aclr,
                      psd_periodogram, ccdf_power, complexity_of_pc)
from .baselines import (CfConfig, CompandConfig, clip, lowpass_taps, repeated_cf,
                        adaptive_cf_threshold, adaptive_cf, compand)
from .mimo import StreamConfig, ChannelRealization, SvdSet, gen_channel, svd_per_subcarrier, esdm_link
from .theory import (DistortionModel, EigenPdfSpec, model_from_threshold, calibrate_model,
                     ber_qpsk_awgn, ber_16qam_awgn, ber_64qam_awgn, ber_flat_rayleigh,
                     pel_16qam, optimal_low_threshold, eigen_pdf, eigen_normalization_audit,
                     ber_esdm, ber_awgn)

__version__ = "0.1.0"
