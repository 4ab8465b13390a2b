"""Distributional causal graphs: causal DAGs whose nodes are parametric
distributions with small neural parameter functions."""

from .classifier import FactorClassifier, load_classifier, save_classifier
from .counterfactuals import (
    CounterfactualExplainer,
    EffectEstimate,
    EffectQuery,
    Intervention,
    counterfactual_samples,
    effect_curve,
    intervened_samples,
)
from .graph import GraphSpec, NodeSpec, ValueDomain, load_graph, save_graph, validate_graph
from .model import DistributionalCausalGraph, load_model, read_dataset, save_model, write_dataset
from .reporting import fit_report

__all__ = [
    "CounterfactualExplainer", "DistributionalCausalGraph", "EffectEstimate", "EffectQuery",
    "FactorClassifier", "GraphSpec", "Intervention", "NodeSpec", "ValueDomain",
    "counterfactual_samples", "effect_curve", "fit_report", "intervened_samples",
    "load_classifier", "load_graph", "load_model", "read_dataset", "save_classifier",
    "save_graph", "save_model", "validate_graph", "write_dataset",
]
