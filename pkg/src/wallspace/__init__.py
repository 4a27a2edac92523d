"""wallspace: interaction hub for a 360-degree immersive display wall."""

__version__ = "0.1.0"
