# cascade-lab - complex branching random walk simulator and verification suite
__version__ = "1.0.0"
