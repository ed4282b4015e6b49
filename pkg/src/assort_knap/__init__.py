"""Epoch-based re-solving for MNL dynamic assortment under knapsack constraints."""
from .core import Assortment, InputError, InventoryState, ModelInstance
from .kernels import BACKEND

__version__ = "0.1.0"
