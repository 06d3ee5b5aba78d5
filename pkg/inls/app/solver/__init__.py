from .solver import *
