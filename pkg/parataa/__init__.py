"""ParaTAA: parallel sampling of diffusion models with triangular Anderson acceleration"""
__version__ = "1.0.0"
