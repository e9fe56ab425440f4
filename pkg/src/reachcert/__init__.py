"""Certified reach-avoid planning and tracking for a quadrotor.

Stages: control gains and Lyapunov tracking bounds, a safe-box tube from
an RRT, a piecewise Bezier reference found by LP feasibility, closed-loop
simulation and certification of the sampled traces.
"""
__version__ = "0.1.0"
