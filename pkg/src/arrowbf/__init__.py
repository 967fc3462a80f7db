"""Multichannel speech enhancement and speaker localization with ARROW-trained beamformers.

Filter-and-sum beamforming weights are optimized directly against a mix of
the SI-SNR loss and the ARROW loss, which asks the target's array response to
be real and the interferer's to vanish. The package also simulates shoebox
rooms, estimates directions of arrival from beampatterns and runs
experiments from the ``arrowbf`` command.
"""

from .beamforming import (Adam, BeamWeights, OptimizerConfig, OptimizationTrace, apply_beamformer,
                          distortionless_residual, mvdr_oracle, optimize_weights)
from .localization import (AngularGrid, Beampattern, DoaEstimate, beampattern, estimate_doa,
                           localization_accuracy, per_frame_doa)
from .losses import (LossBreakdown, LossProblem, LossWeights, VadMask, arrow_loss, arrow_loss_grad,
                     combined_loss, compute_vad, grad_combined_loss, loss_and_grad, si_snr,
                     si_snr_loss, si_snr_loss_grad)
from .room import (ArrayGeometry, ImpulseResponse, RoomSpec, SceneConfig, SceneSample,
                   SourcePlacement, TransferVector, compute_rtf, direct_path_taps, generate_rir,
                   measured_ratios, sample_scene, schroeder_t60, steering_vector, steering_vectors,
                   synthesize_mixture)
from .stft import MultichannelWaveform, Spectrogram, WindowSpec, frame_count, istft, stft

__version__ = "0.1.0"
