"""Distributed projected pseudo-gradient descent over directed graphs."""
from .core import NetworkState, init, simulate, step, step_stacked
from .graph import (DirectedGraph, WeightMatrices, augment, build_weights, is_strongly_connected,
                    pick_epsilon, spectral_analysis)
from .kernels import HAVE_COMPILED
from .oracle import DirectionSampler, LocalCost, pseudo_gradient
from .problems import make_problem
from .projection import ConstraintSet, project
from .schedules import SmoothingSchedule, StepSchedule

__version__ = "0.1.0"
