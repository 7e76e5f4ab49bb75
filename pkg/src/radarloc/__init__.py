"""Self-localization of fixed roadside radar sensors.

The pipeline recovers the sensor's global pose in three steps: a coarse
registration of accumulated moving-object returns against the road cloud,
Gaussian-process extended object tracking of the observed vehicles, and a
semantic (behavior-labeled) ICP refinement of the trajectory cloud against
the curvature-labeled road cloud.
"""

__version__ = "0.1.0"
