"""Cross sections, countable partitions and entropy bounds for singular flows.

The package builds, for flows with hyperbolic equilibria, the balanced
cross section through each singularity, its countable layer decomposition,
the refined cell partition whose elements control scaled tubular
neighborhoods, and the global partition; it then estimates empirical
invariant measures along integrated orbits and checks every lemma-level
inequality at desk scale.
"""

from .fields import FieldSpec, eval_field
from .integrate import (OrbitSegment, integrate_flow, integrate_frame,
                        integrate_tangent, orbit_segment,
                        states_at_integer_times)
from .poincare import (linear_poincare, scaled_linear_poincare,
                       scaled_poincare_norm, sup_scaled_norm)
from .singularity import (SingularityProfile, build_profile,
                          derive_time_constants, estimate_speed_lipschitz,
                          hyperbolic_splitting, locate_singularity,
                          profile_from_json, profile_to_json)
from .section import (CrossingEvent, LayerSample, chart_coords, cone_classify,
                      detect_section_crossings, exit_times, layer_index,
                      sample_layer, section_defect)
from .tube import (compute_N0, empirical_tube_constant, normal_disk_project,
                   partition_tube_test, poincare_hit, tube_contains_orbit)
from .partition import (GlobalPartition, Itinerary, RefinedPartition,
                        assemble_global, build_coarse, build_refined,
                        build_regular, in_O_region, max_separated_set,
                        truncate)
from .measures import (EmpiricalMeasure, birkhoff_measure, dirac_measure,
                       synthetic_itineraries, synthetic_tower_measure)
from .entropy import (block_entropy_rate, conditional_entropy,
                      entropy_bound_check, mane_bound,
                      shadowed_entropy_bound, shannon_entropy,
                      truncation_gap, verify_tower_sums)
from .config import build_experiment, load_config

__version__ = "0.1.0"
