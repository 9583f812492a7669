"""Evolutionary gait training for a reduced-order quadruped.

A genetic algorithm self-improves a reference foot trajectory (rendered
into joint references by a radial-basis network driven by a central
pattern generator) while a maximum-entropy actor-critic learns residual
joint corrections; the two phases alternate with mutually locked
parameters and one shared replay buffer.
"""

__version__ = "0.1.0"
