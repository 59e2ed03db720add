"""Movable-antenna array topologies for OAM structured-beam links."""

__version__ = "0.1.0"

from .channel import LinkConfig, Method, mode_channel_matrix, mode_set  # noqa: E402
from .errors import (ConfigError, ContractError, DomainError, GeometryError,  # noqa: E402
                     NumericError, OamTopoError, SingularMatrixError)
from .geometry import (ArrayTopology, Family, FucaSpec, Region, RingSpec,  # noqa: E402
                       build_auxiliary, build_cuca, build_fuca, build_uca, element_positions,
                       validate)
from .metrics import total_se  # noqa: E402
from .optimizer import OptimizerConfig, alternating_optimize  # noqa: E402
from .reconfig import switching_cost  # noqa: E402
