"""Human activity recognition from multi-sensor IMU windows with a depthwise CNN."""

__version__ = "0.1.0"
