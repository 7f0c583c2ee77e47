from .experiment import ExperimentResult, ExperimentSpec, load_spec, run_experiment
from .link import LinkBeamformers, run_link_trial
from .modulation import qpsk_demodulate, qpsk_modulate

__all__ = [
    "ExperimentResult",
    "ExperimentSpec",
    "LinkBeamformers",
    "load_spec",
    "qpsk_demodulate",
    "qpsk_modulate",
    "run_experiment",
    "run_link_trial",
]
