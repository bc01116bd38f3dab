"""Correlated Brownian motions through the common decomposition
``B = X_T + Y_S``, ``W = X_T - Y_S``: regime-switching correlation, path
simulation, Fourier pricing of two-colour rainbow options and calibration."""
from ._backend import COMPILED, NAME as BACKEND
from .ctmc import Generator, RegimeConfig
from .fourier import FourierGrid, MarketParams, BASE_MARKET, RainbowSpec, RainbowStyle
from .pricing import PriceResult, QuantoSpec

__all__ = ["BACKEND", "COMPILED", "FourierGrid", "Generator", "MarketParams", "BASE_MARKET",
           "PriceResult", "QuantoSpec", "RainbowSpec", "RainbowStyle", "RegimeConfig"]
__version__ = "0.1.0"
