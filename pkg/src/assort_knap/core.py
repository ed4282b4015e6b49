"""Problem instances and MNL choice-model arithmetic.

Product indices are 0-based in this module; external formats (instance
files are index-free, CSV/CLI output) present them 1-based.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

CLIP_TOL = 1e-12


class InputError(ValueError):
    """Invalid user-supplied data."""


INSTANCE_KEYS = (
    "n_products",
    "n_resources",
    "cardinality_cap",
    "horizon",
    "revenues",
    "preferences",
    "consumption",
    "initial_inventory",
)


def _as_vector(values, length, name):
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.shape != (length,):
        raise InputError(f"{name} must have length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class ModelInstance:
    """All parameters of one dynamic assortment problem.

    ``consumption`` is the N x M matrix of per-sale resource usage and
    ``initial_inventory`` the M starting stock levels.
    """

    n_products: int
    n_resources: int
    cardinality_cap: int
    horizon: int
    revenues: np.ndarray
    preferences: np.ndarray
    consumption: np.ndarray
    initial_inventory: np.ndarray

    def __post_init__(self):
        N, M, K, T = self.n_products, self.n_resources, self.cardinality_cap, self.horizon
        for name, val in (("n_products", N), ("n_resources", M),
                          ("cardinality_cap", K), ("horizon", T)):
            if int(val) != val or val < 1:
                raise InputError(f"{name} must be a positive integer, got {val!r}")
        if K > N:
            raise InputError(f"cardinality_cap {K} exceeds n_products {N}")
        r = _as_vector(self.revenues, N, "revenues")
        v = _as_vector(self.preferences, N, "preferences")
        C0 = _as_vector(self.initial_inventory, M, "initial_inventory")
        A = np.array(self.consumption, dtype=float)
        if A.size != N * M:
            raise InputError(f"consumption must be {N}x{M}")
        A = A.reshape(N, M)
        if not np.all(np.isfinite(A)):
            raise InputError("consumption contains non-finite entries")
        if np.any(r < 0) or np.any(r > 1):
            raise InputError("revenues must lie in [0, 1]")
        if np.any(v < 0):
            raise InputError("preferences must be nonnegative")
        if np.any(A < 0):
            raise InputError("consumption must be nonnegative")
        if np.any(C0 <= 0):
            raise InputError("initial_inventory must be strictly positive")
        for name, arr in (("revenues", r), ("preferences", v),
                          ("consumption", A), ("initial_inventory", C0)):
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("n_products", "n_resources", "cardinality_cap", "horizon"):
            object.__setattr__(self, name, int(getattr(self, name)))

    @property
    def gamma0(self) -> np.ndarray:
        """Initial inventory normalized by the horizon."""
        return self.initial_inventory / self.horizon

    @cached_property
    def max_consumption(self) -> float:
        return float(self.consumption.max())

    @cached_property
    def max_preference(self) -> float:
        return float(self.preferences.max())

    def with_horizon(self, horizon: int, initial_inventory=None) -> "ModelInstance":
        inv = self.initial_inventory if initial_inventory is None else initial_inventory
        return ModelInstance(self.n_products, self.n_resources, self.cardinality_cap,
                             horizon, self.revenues, self.preferences,
                             self.consumption, inv)

    def to_dict(self) -> dict:
        return {
            "n_products": self.n_products,
            "n_resources": self.n_resources,
            "cardinality_cap": self.cardinality_cap,
            "horizon": self.horizon,
            "revenues": self.revenues.tolist(),
            "preferences": self.preferences.tolist(),
            "consumption": self.consumption.reshape(-1).tolist(),
            "initial_inventory": self.initial_inventory.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelInstance":
        unknown = set(data) - set(INSTANCE_KEYS)
        if unknown:
            raise InputError(f"unknown instance keys: {sorted(unknown)}")
        missing = [k for k in INSTANCE_KEYS if k not in data]
        if missing:
            raise InputError(f"missing instance keys: {missing}")
        return cls(**{k: data[k] for k in INSTANCE_KEYS})


def load_instance(path) -> ModelInstance:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    return ModelInstance.from_dict(data)


def save_instance(instance: ModelInstance, path) -> None:
    Path(path).write_text(json.dumps(instance.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class Assortment:
    """Set of offered products, stored as sorted 0-based indices."""

    members: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(sorted(int(i) for i in set(self.members))))

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, i):
        return i in self.members

    def indicator(self, n_products: int) -> np.ndarray:
        x = np.zeros(n_products)
        x[list(self.members)] = 1.0
        return x

    def validate(self, instance: ModelInstance) -> None:
        if self.members and (self.members[0] < 0 or self.members[-1] >= instance.n_products):
            raise InputError(f"assortment {self.members} has indices outside [0, {instance.n_products})")
        if len(self.members) > instance.cardinality_cap:
            raise InputError(
                f"assortment of size {len(self.members)} exceeds cap {instance.cardinality_cap}")


@dataclass
class InventoryState:
    """Remaining stock and elapsed periods; owned by a single trajectory."""

    remaining: np.ndarray
    periods_elapsed: int = 0

    @classmethod
    def initial(cls, instance: ModelInstance) -> "InventoryState":
        return cls(instance.initial_inventory.copy(), 0)

    def periods_left(self, instance: ModelInstance) -> int:
        return instance.horizon - self.periods_elapsed

    def feasible_products(self, instance: ModelInstance) -> np.ndarray:
        """Boolean mask of products whose every resource requirement is in stock."""
        return (instance.consumption <= self.remaining).all(axis=1)


@dataclass(frozen=True)
class AssumptionReport:
    a0_bound: float
    b0_bound: float
    gamma_min: float
    passes_a1: bool
    passes_a2: bool
    notes: tuple = field(default=())


def clip_unit(x, n: int | None = None) -> np.ndarray:
    """Clip a fractional vector to [0, 1], rejecting entries beyond CLIP_TOL."""
    x = np.asarray(x, dtype=float)
    if n is not None and x.shape != (n,):
        raise InputError(f"expected vector of length {n}, got shape {x.shape}")
    if np.any(x < -CLIP_TOL) or np.any(x > 1 + CLIP_TOL) or not np.all(np.isfinite(x)):
        raise InputError("fractional vector has entries outside [0, 1]")
    return np.clip(x, 0.0, 1.0)


def choice_probabilities(instance: ModelInstance, assortment: Assortment) -> np.ndarray:
    """MNL purchase probabilities as a length N+1 vector.

    Entry 0 is no-purchase and entry i+1 is product i; products outside the
    assortment get probability 0.

    >>> inst = ModelInstance(2, 1, 2, 1, [1, 1], [0.5, 2.0], [[0], [0]], [1])
    >>> choice_probabilities(inst, Assortment((0, 1))) * 3.5
    array([1. , 0.5, 2. ])
    """
    assortment.validate(instance)
    v = instance.preferences
    members = list(assortment)
    probs = np.zeros(instance.n_products + 1)
    denom = 1.0 + v[members].sum()
    probs[0] = 1.0 / denom
    probs[[i + 1 for i in members]] = v[members] / denom
    return probs


def assortment_revenue(instance: ModelInstance, assortment: Assortment) -> float:
    assortment.validate(instance)
    r, v = instance.revenues, instance.preferences
    num = sum(r[i] * v[i] for i in assortment)
    den = 1.0 + sum(v[i] for i in assortment)
    return float(num / den)


def fractional_revenue(instance: ModelInstance, x) -> float:
    """Revenue rate of a fractional assortment x in [0, 1]^N."""
    x = clip_unit(x, instance.n_products)
    vx = instance.preferences * x
    return float(np.dot(instance.revenues, vx) / (1.0 + vx.sum()))


def consumption_rates(instance: ModelInstance, x) -> np.ndarray:
    """Expected per-period resource usage A^T nu(x) of a fractional assortment."""
    x = clip_unit(x, instance.n_products)
    vx = instance.preferences * x
    return instance.consumption.T @ vx / (1.0 + vx.sum())


def validate_assumptions(instance: ModelInstance) -> AssumptionReport:
    """Boundedness and inventory-scaling diagnostics.

    The non-degeneracy condition on binding sets is not checked.
    """
    a0 = instance.max_consumption
    b0 = instance.max_preference
    gamma_min = float(instance.gamma0.min())
    return AssumptionReport(
        a0_bound=a0,
        b0_bound=b0,
        gamma_min=gamma_min,
        passes_a1=bool(np.isfinite(a0) and np.isfinite(b0)),
        passes_a2=gamma_min > 0,
        notes=("binding-set stability not verified",),
    )
