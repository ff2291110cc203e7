"""Age-of-information dissemination over superposed transmissions, with
multi-objective reinforcement learning front estimation."""

__version__ = "0.1.0"
