from .exponents import *
