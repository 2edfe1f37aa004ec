"""Speculative gradient-descent calibration engine.

Trains linear classifiers (SVM hinge, logistic) with batch or
incremental gradient descent while evaluating many step sizes in one
shared data pass and halting passes early from sampling-based loss and
gradient estimates with confidence bounds.
"""

__version__ = "0.1.0"
