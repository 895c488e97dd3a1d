from .certificate import (CertificateInput, CertificateReport, PerturbationReport, dual_certificate_check,
                          orthogonal_corruption_example,
                          perturbation_inequality_check)
from .conditions import (RULES, ConditionResult, TheoremParams, check_theorem_conditions, incoherence_mu,
                         lambda_select)
from .sampling import (LEMMAS, LemmaReport, golfing_run, invertibility_bound, lemma_monte_carlo, random_tangent,
                       tangent_basis, tangent_sampling_gap)

__all__ = [
    "CertificateInput", "CertificateReport", "PerturbationReport", "dual_certificate_check",
    "perturbation_inequality_check", "orthogonal_corruption_example", "RULES", "ConditionResult", "TheoremParams", "check_theorem_conditions",
    "incoherence_mu", "lambda_select", "LEMMAS", "LemmaReport", "golfing_run", "invertibility_bound",
    "lemma_monte_carlo", "random_tangent", "tangent_basis", "tangent_sampling_gap",
]
