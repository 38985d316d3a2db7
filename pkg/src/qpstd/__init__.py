"""qpstd: time-domain quantum scattering on a finite lattice.

The internal model steps the reduced Schrodinger equation with plane-wave
injection across a tapered total-field/scattered-field interface and a
masking absorbing boundary, records complex field phasors on six virtual
planes, and propagates the scattered wave to arbitrary external points
(near field, Fresnel region, far field) through closed-box surface
integrals.  A partial-wave solver for central potentials provides the
reference cross-sections.

All solver math is in reduced units: one temporal and one spatial period
of the incident wave both equal 2*pi, the reduced central wavenumber and
energy are 1.  Physical units enter only at the I/O edge.
"""

from .lattice import (
    GridSpec,
    ModelGeometry,
    PotentialSpec,
    Region,
    UnitSystem,
    WaveField,
    build_geometry,
    build_potential,
    central_square_well,
    from_reduced,
    to_reduced,
)
from .boundary import AbsorberMask, AbsorberProfile, apply_mask, build_mask
from .source import (
    IncidentDirection,
    IncidentSource1D,
    RecursiveSinusoid,
    contact_corner,
    eval_incident,
    project_distance,
    recursive_sinusoid,
    step_incident_1d,
)
from .stepper import (
    STENCIL_COEFFICIENTS,
    InstabilityError,
    Propagator,
    laplacian_fdtd,
    laplacian_pstd,
    phase_velocity_correction,
    stability_dtau_fdtd,
    stability_dtau_pstd,
    stencil_factor,
    step,
)
from .tfsf import (
    TaperMask,
    build_taper,
    fdtd_consistency_update,
    injection_term,
    taper_profile,
    taper_profile_d1,
    taper_profile_d2,
)
from .parallel import HaloWeights, Topology, decompose, exchange_and_weight
from .ntdf import (
    ObservationCircle,
    SurfacePhasors,
    VirtualPlaneRecorder,
    cell_contribution,
    evaluate_distant,
    green_function,
    plane_spectra,
)
from .oracle import PartialWaveSolution, differential_cross_section, phase_shifts

__version__ = "0.1.0"
