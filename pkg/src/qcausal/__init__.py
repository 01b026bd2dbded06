"""Classical and quantum causal models: separation, CI closure and simulation."""

from .cirel import CiRelation, CiSet, closure, compare_closures, format_relation, parse_relation
from .distributions import JointDistribution, all_ci, generate_ccm, is_ci, marginal
from .errors import InputError, ParseError, QCausalError, ResourceError, ValidationError
from .graph import (
    Dag,
    Kind,
    Role,
    ancestors,
    causal_input_list,
    descendants,
    parse_dag,
    quantum_input_list,
)
from .quantum import Qcm, QuantumModelParams, ccm_from_qcm, classical_limit, evaluate
from .separation import ci_set_d, ci_set_q, chain_connected, d_separated, detached, q_separated

__all__ = [
    "CiRelation", "CiSet", "closure", "compare_closures", "format_relation", "parse_relation",
    "JointDistribution", "all_ci", "generate_ccm", "is_ci", "marginal",
    "InputError", "ParseError", "QCausalError", "ResourceError", "ValidationError",
    "Dag", "Kind", "Role", "ancestors", "causal_input_list", "descendants", "parse_dag",
    "quantum_input_list",
    "Qcm", "QuantumModelParams", "ccm_from_qcm", "classical_limit", "evaluate",
    "ci_set_d", "ci_set_q", "chain_connected", "d_separated", "detached", "q_separated",
]
