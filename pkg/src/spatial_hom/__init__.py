"""Two-photon spatial interference at a beam splitter: resolved and bucket detection."""

__version__ = "0.1.0"

from .analysis import FitResult, FringeMetrics, delta_profile, fit, fringe_metrics, similarity
from .detection import (
    DetectionGrid,
    JointDistribution,
    bucket_rate,
    dip_distribution,
    dip_scan,
    resolved_scan,
    sample_counts,
    tandem_scan,
)
from .interference import (
    InterferenceModel,
    ModeUnitary,
    bs5050,
    build_lambda,
    g2_permanent,
    p_joint_analytic,
    p_joint_delta,
    permanent,
    rcc,
)
from .modes import PhotonPairConfig, SpatialMode, chi_to_zeta, eval_chi, mode_overlap, zeta_to_chi
