"""Eye-region model fitting with a binocular vergence model of gaze."""

__version__ = "0.1.0"
