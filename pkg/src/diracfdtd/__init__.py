"""FDTD solver for the time-dependent Dirac equation with a classical cross-check."""

__version__ = "0.1.0"

from .units import UNITS, GridSpec, UnitSystem, cfl_limit, index_to_position  # noqa: E402
from .field import NumericalBlowUp, SpinorField, probability_density_slice, total_norm  # noqa: E402
from .potentials import (  # noqa: E402
    DipoleLineSpec,
    FourPotential,
    SampledPotential,
    SolenoidPairSpec,
    dipole_lines,
    sample_on_grid,
    solenoid_pair,
    uniform_b,
    zero_potential,
)
from .stepper import MovingWindow, Observer, Stepper, StepperConfig, run, step  # noqa: E402
from .observables import (  # noqa: E402
    ObservableRecord,
    ObservableSeries,
    PacketSpec,
    center_of_probability,
    expectation_canonical_momentum,
    expectation_energy,
    expectation_mechanical_momentum,
    init_packet,
    velocity_series,
)
from .classical import (  # noqa: E402
    ClassicalState,
    classical_orbit_radius,
    conserved_quantity_check,
    integrate_canonical_conservation,
    integrate_dipole_parallel,
    integrate_dipole_perpendicular,
)
