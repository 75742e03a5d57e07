"""Transient synchronization stability lab for PLL-synchronized converters.

Reduced-order simulation and analysis of a current-source converter plant
synchronized by an SRF-PLL to an MMC-formed offshore grid through an
impedance: staged short-circuit scenarios, loss-of-synchronization verdicts,
an energy-function stability index, equal-area clearing-time estimates, and
brute-force basin maps.
"""

from .errors import (
    AngleBeyondCritical,
    CertificationViolation,
    ConfigError,
    NoEquilibrium,
    NoPrefaultEquilibrium,
    NonPositiveBase,
    ParseError,
    SingularDenominator,
    TssLabError,
    ValidationError,
)
from .model import (
    CurrentInjection,
    EquilibriumPair,
    PllParams,
    PllState,
    StageParams,
    SwingCoefficients,
    equilibria,
    injection_boundary,
    pll_rhs,
    poc_voltage_magnitude,
    poc_voltage_q,
    swing_coefficients,
    voltage_offset,
)
from .network import (
    FaultSpec,
    FaultType,
    MmcSource,
    NetworkSegments,
    PhysicalNetwork,
    fault_stage,
    per_unit_network,
    postfault_stage,
    prefault_stage,
    reference_network,
)
from .simulate import (
    LvrtPolicy,
    Scenario,
    Trajectory,
    Verdict,
    VerdictKind,
    classify,
    lvrt_currents,
    run,
)
from .lyapunov import (
    LfMode,
    LyapunovParams,
    NormalizedState,
    index_series,
    lf_params,
    lf_value,
    stability_index,
)
from .eac import (
    ClearingAngle,
    ClearingAngleStatus,
    EacReport,
    accel_area,
    critical_clearing_angle,
    decel_area,
    eac_cct,
    eac_report,
)
from .analysis import (
    CaseSuiteResult,
    CctResult,
    CctStatus,
    ConservativenessReport,
    RoaGridSpec,
    RoaMap,
    case_suite,
    cct_bisection,
    conservativeness_audit,
    eac_comparison,
    roa_grid,
)
from .config import ScenarioConfig, bundled_scenarios, emit, load_bundled_config, parse_config

__version__ = "0.1.0"
