"""Covert communication with a pinching-antenna transmitter and warden tracking.

Modules
-------
geometry     waveguide/LCX layout and near-field channel models
covertness   warden detection statistics and the KL covertness measure
tracking     EKF tracking of the warden's position and velocity
optimizer    null-space beamformer and artificial-noise design per CPI
nn, sac      numpy soft actor-critic for PA placement
baselines    1D search, greedy placement and a fixed MIMO array
harness      episodes, Monte-Carlo batches and metrics
"""

__version__ = "0.1.0"
