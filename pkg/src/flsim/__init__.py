"""Flying-light-speck display toolkit.

Planning, reliability analytics, and deterministic simulation for drone
displays where each miniature drone (an FLS) illuminates one point of a
3D point cloud: staggered battery-charge scheduling keeps the rendering
continuous with the minimum extra fleet, proximity groups with XOR
parity standbys mask individual failures, and the simulator checks the
closed-form predictions empirically.
"""

from .failure_detect import DetectorParams, DetectorState, FailureKind, on_self_failure
from .ingest import load, synth, write
from .model import (
    BatteryParams,
    DisplayPoint,
    FlsAgent,
    PointCloud,
    ReliabilityParams,
    Role,
    validate_cloud,
)
from .reliability import (
    MtdiReport,
    ReliabilityGroup,
    form_groups,
    mtdi_grouped,
    mtdi_naive,
    mttf_group,
    parity_encode,
    parity_reconstruct,
)
from .simkernel import SimConfig, SimMetrics, degraded_onset_detector, inject_failures, run
from .stag import (
    FlockingPlan,
    FlockSpec,
    bootstrap_schedule,
    charge_time_ms,
    min_total_fls,
    plan_flocks,
    staggered_targets,
    steady_state_swaps,
)

__version__ = "0.1.0"

__all__ = [
    "BatteryParams",
    "DetectorParams",
    "DetectorState",
    "DisplayPoint",
    "FailureKind",
    "FlockSpec",
    "FlockingPlan",
    "FlsAgent",
    "MtdiReport",
    "PointCloud",
    "ReliabilityGroup",
    "ReliabilityParams",
    "Role",
    "SimConfig",
    "SimMetrics",
    "bootstrap_schedule",
    "charge_time_ms",
    "degraded_onset_detector",
    "form_groups",
    "inject_failures",
    "load",
    "mtdi_grouped",
    "mtdi_naive",
    "min_total_fls",
    "mttf_group",
    "on_self_failure",
    "parity_encode",
    "parity_reconstruct",
    "plan_flocks",
    "run",
    "staggered_targets",
    "steady_state_swaps",
    "synth",
    "validate_cloud",
    "write",
    "__version__",
]
