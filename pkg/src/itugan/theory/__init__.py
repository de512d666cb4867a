"""1-D numerical verification of the optimal-discriminator results."""
from .density import (
    DiscreteDensity1D,
    Map1D,
    abs_map,
    arctan_map,
    bracketed_preimages,
    check_aligned,
    identity_map,
    scale_map,
    sigmoid_map,
    survey_map,
    tanh_map,
    warp_map,
)
from .discriminator import (
    EPS,
    DiscriminatorGrid,
    brute_force_optimal_D,
    golden_section_max,
    optimal_discriminator,
    pushed_density_formula,
    pushed_mass,
    value_functional,
)
from .verify import (
    LOG4,
    CheckResult,
    Conjecture1Report,
    Conjecture2Report,
    Pushforward,
    RefinementStudy,
    branch_densities,
    checks_passed,
    evaluate_conjecture1,
    evaluate_conjecture2,
    max_value,
    maximality_probe,
    perturbation_probe,
    pushforward_density,
    refinement_study,
    run_theory_checks,
    scaled_tolerance,
    swap_mirrored,
    swap_test,
    verify_theorem2,
)
