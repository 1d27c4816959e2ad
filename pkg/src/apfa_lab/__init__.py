"""Acyclic probabilistic finite automata for categorical longitudinal data.

Build sample automata from data, fit and compare models by likelihood-ratio
tests, select models by greedy state merging, condition on a baseline
covariate, and relate automata to graphical models.
"""

from .automaton import Apfa, Edge, complete, maximal_apfa, minimal_apfa, simulate, validate
from .conditional import (
    conditional_local_lrt,
    conditional_merge_test,
    conditional_select,
    covariate_global_test,
    fit_grouped,
    fit_logistic_edges,
    logistic_merge_test,
)
from .dataset import Dataset, parse_dataset, read_dataset, write_dataset
from .equivalence import (
    Dag,
    UndirectedGraph,
    apfa_to_dag,
    dag_to_apfa,
    extract_statements,
    property_q,
    ug_to_apfa,
)
from .errors import ApfaError, DataError, ModelError, NotNestedError, SizeGuardError
from .estimation import dimension, fit_mle, information_criterion, log_likelihood, marginals
from .inference import (
    chi2_upper_tail,
    g2_independence,
    local_lrt,
    merge_test,
    nested_test,
    node_symbol_table,
)
from .ingest import count_data, sample_apfa, sample_tree
from .merging import check_nesting, merge, merge_list, submodel_partition
from .selection import SelectionConfig, select

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
