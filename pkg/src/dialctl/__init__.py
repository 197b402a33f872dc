"""Trainable task-oriented dialog control.

A recurrent policy (LSTM, RNN, or DNN) maps dialog-history feature vectors
to a masked distribution over action templates.  The policy is trained by
supervised imitation of example dialogs and by policy-gradient reinforcement
learning against a simulated user, with a correction loop for on-line
teaching.
"""

__version__ = "0.1.0"
