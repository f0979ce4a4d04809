"""Indoor 3-D visible-light positioning simulator.

Library layout:

  scene       room / luminaire / receiver geometry
  channel     Lambertian DC gains and their position gradients
  frontend    LED electro-optics, receiver noise budget, observation synthesis
  ofdm        grouped optical OFDM chain and clipping analytics
  estimators  AoA, weighted AoA and Gauss-Newton RSS locators
  simlab      Monte Carlo experiment harness and the ``vlcpos`` CLI
"""

from .scene import (
    LedTx,
    ReceiverPose,
    Scenario,
    ScenarioConfig,
    build_scenario,
    incidence_vector,
)
from .channel import (
    GainMatrix,
    channel_gain,
    electric_gain,
    gain_matrix,
    gain_vector,
    jacobian,
    jacobian_row,
    received_power,
    total_received_power,
)
from .frontend import (
    LedModel,
    NoiseModel,
    NoiseVariances,
    ObservationVector,
    led_conversion_factor,
    luminous_flux,
    noise_variances,
    normalized_noise_std,
    predistort,
    synthesize_observation,
)
from .ofdm import (
    OfdmConfig,
    OfdmFrame,
    RssCalibration,
    channel_capacity,
    clipping_noise_variance,
    clipping_noise_variance_symmetric,
    demodulate_rss,
    dft,
    effective_scaling,
    hard_clip,
    hermitian_extend,
    idft,
    modulate_vap,
    scaling_factor,
    solve_h,
)
from .estimators import (
    EstimateReport,
    OpCounter,
    aoa_estimate,
    hybrid_locate,
    op_count,
    rss_refine,
    select_strongest,
    waoa_estimate,
)
from .errors import ConfigError, DomainError, SingularSystemError

__version__ = "0.1.0"
