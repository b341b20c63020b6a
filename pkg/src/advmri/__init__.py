"""Localized adversarial perturbations for TV-regularized compressed-sensing MRI."""

from .attack import AttackConfig, AttackResult, amplification, attack_at, attack_grid, disk_weight
from .phantoms import PhantomSpec, SparseSpec1D, gen_phantom, gen_signal_1d
from .theory1d import artifact_bound, l1_min_eq, recovery_experiment, spike_attack, tv_min_eq
from .transforms import Mask1D, SamplingMask, dft1, dft2, forward, make_radial_mask, pseudoinverse
from .tvrecon import ReconConfig, calibrate, reconstruct_tv, soft_threshold

__version__ = "0.1.0"
