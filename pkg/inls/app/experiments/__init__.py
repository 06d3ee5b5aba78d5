from .experiments import *
from .ensembles import *
