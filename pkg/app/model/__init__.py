"""Decoding, exact forward inference, evaluation and canonical parameter forms."""

from app.model.baseline import OptimalParameters, enumerate_optimal_parameters
from app.model.canonical import canonicalize, permute_hidden, same_parameters
from app.model.evaluation import EvalReport, evaluate_model, write_confusion_csv, write_eval_report
from app.model.forward import ForwardTrace, forward, forward_trace, honest_assignment, loss_value
from app.model.params import DecodedParameters, decode, read_params, write_params

__all__ = [
    "DecodedParameters",
    "EvalReport",
    "ForwardTrace",
    "OptimalParameters",
    "canonicalize",
    "decode",
    "enumerate_optimal_parameters",
    "evaluate_model",
    "forward",
    "forward_trace",
    "honest_assignment",
    "loss_value",
    "permute_hidden",
    "read_params",
    "same_parameters",
    "write_confusion_csv",
    "write_eval_report",
    "write_params",
]
