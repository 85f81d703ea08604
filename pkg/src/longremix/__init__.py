"""Noisy-label learning at desk scale.

Two co-trained MLP classifiers, a loss-GMM clean/noisy splitter with a
confidence window, core-set guided retraining with oversampled MixUp, and
a Monte-Carlo validator for the selection precision/recall model.
"""

__version__ = "0.1.0"
