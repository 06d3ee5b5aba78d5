from .spectral import *
