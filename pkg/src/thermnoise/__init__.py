"""Sensor thermal-noise robustness toolkit for sensor-fusion classifiers."""

__version__ = "0.1.0"
