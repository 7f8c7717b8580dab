"""N00N-state optical centroid measurement: simulation, coincidence counting and fringe fits."""

from ._backend import BACKEND
from .analysis import (
    PUBLISHED_VISIBILITIES,
    VisibilityPoint,
    classical_visibility_theory,
    estimate_accidentals,
    scaling_table,
    subtract_accidentals,
)
from .coincidence import CoincidenceCounter, PulseRecord, extract_coincidences, fold_statistics
from .fit import FitResult, fit_fringe
from .fringe import (
    ArrayGeometry,
    FringeConfig,
    GaussianEnvelope,
    SourceKind,
    SourceModel,
    joint_distribution,
    singles_distribution,
)
from .ocm import (
    CentroidHistogram,
    DetectionEvent,
    EventBatch,
    absorber_select,
    joint_map_2d,
    project_distribution,
    project_events,
)
from .sim import DetectorModel, SimRun, sample_events, sample_singles_calibration

__version__ = "0.1.0"
