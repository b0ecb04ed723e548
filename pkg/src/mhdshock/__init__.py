"""Shock-fitting solver for steady, super-Alfvenic, aligned-field MHD
transonic shocks in almost-flat 2D nozzles.

The solver works in Lagrangian (stream-function) coordinates where the
nozzle is a unit-height rectangle.  A run proceeds in four stages:

1. ``background``  - piecewise-constant reference shock and all derived
   coefficients,
2. ``supersonic``  - hyperbolic march for the upstream flow on the whole
   rectangle,
3. ``shockfront`` / ``elliptic`` - admissible shock position and the
   linearized initial approximation behind the shock,
4. ``iteration``   - nonlinear fixed-point loop that updates fluctuation,
   shock slope and shock endpoint until the jump conditions hold.

``diagnostics`` verifies the computed solution independently and ``cli``
drives batch runs from a config file.
"""

__version__ = "0.1.0"
