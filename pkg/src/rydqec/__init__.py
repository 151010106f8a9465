"""Native CCZ gates for dressed Rydberg ions and a measurement-free Bacon-Shor QEC cycle."""

__version__ = "0.1.0"
