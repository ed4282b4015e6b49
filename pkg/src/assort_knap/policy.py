"""Assortment policies: epoch-based re-solving and two sampling baselines.

All three share one interface. ``initialize`` builds the state and the
first offer, ``select_assortment`` returns what to show this period, and
``notify_outcome`` reacts to the customer's choice. Sampling happens only in
``initialize`` and ``notify_outcome`` so that a policy consumes its random
stream identically no matter how the simulator drives it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import Assortment, InputError, InventoryState, ModelInstance
from .fluid import FractionalSolution, solve_phi, solve_psi
from .sampler import BvnDecomposition, decompose, draw_support


class PolicyKind(str, Enum):
    RESOLVING = "resolving"
    SAMPLING_PER_PERIOD = "sampling_per_period"
    SAMPLING_PER_EPOCH = "sampling_per_epoch"

    @property
    def code(self) -> int:
        return _CODES[self]

    @property
    def cli_name(self) -> str:
        return _CLI_NAMES[self]

    @classmethod
    def parse(cls, text) -> "PolicyKind":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("-", "_")
        for kind in cls:
            if key in (kind.value, kind.cli_name.replace("-", "_")):
                return kind
        raise InputError(f"unknown policy {text!r}; expected resolving, per-period or per-epoch")


_CODES = {PolicyKind.RESOLVING: 0, PolicyKind.SAMPLING_PER_PERIOD: 1, PolicyKind.SAMPLING_PER_EPOCH: 2}
_CLI_NAMES = {PolicyKind.RESOLVING: "resolving", PolicyKind.SAMPLING_PER_PERIOD: "per-period",
              PolicyKind.SAMPLING_PER_EPOCH: "per-epoch"}


@dataclass(frozen=True)
class EpochPlan:
    """What the re-solving policy committed to at the start of an epoch."""

    tau: int
    t_tau: int
    gamma: np.ndarray
    s: float
    s_raw: float
    x: np.ndarray
    support: Assortment


@dataclass
class PolicyState:
    kind: PolicyKind
    initial_fluid: FractionalSolution
    tau0: int
    epoch_index: int
    current_support: Assortment = Assortment()
    current_resolve: FractionalSolution | None = None
    resolve_count: int = 0
    plan: EpochPlan | None = None
    epoch_serial: int = 0
    exhausted: bool = False
    fluid_decomposition: BvnDecomposition | None = field(default=None, repr=False)
    _fluid_cum: list | None = field(default=None, repr=False)


def fluid_epsilon(horizon: int) -> float:
    # 1/T, kept inside the open interval the bisection needs when T = 1
    return min(1.0 / horizon, 0.5)


def initial_epochs(horizon: int, denominator: float) -> int:
    return max(1, int(math.floor(horizon / denominator + 0.5)))


def _feasible_subset(members, inventory: InventoryState, instance: ModelInstance, ok=None) -> Assortment:
    if ok is None:
        ok = inventory.feasible_products(instance)
    return Assortment(tuple(i for i in members if ok[i]))


def _sample_fluid(state: PolicyState, inventory, instance, rng, ok=None) -> None:
    drawn = draw_support(state.fluid_decomposition, rng.random(), state._fluid_cum)
    state.current_support = _feasible_subset(drawn, inventory, instance, ok)
    state.epoch_serial += 1


def _start_epoch(state: PolicyState, inventory: InventoryState, instance: ModelInstance, rng,
                 ok=None) -> None:
    t_tau = inventory.periods_left(instance)
    tau = state.epoch_index
    gamma = np.maximum(inventory.remaining / t_tau, 0.0)
    s_raw = t_tau / tau
    s = max(s_raw, 1.0)
    sol = solve_psi(instance, gamma, s)
    drawn = draw_support(decompose(sol.x, instance.cardinality_cap), rng.random())
    support = _feasible_subset(drawn, inventory, instance, ok)
    state.current_resolve = sol
    state.current_support = support
    state.resolve_count += 1
    state.epoch_serial += 1
    state.plan = EpochPlan(tau, t_tau, gamma, s, s_raw, sol.x, support)


def initialize(instance: ModelInstance, kind, rng, inventory: InventoryState | None = None) -> PolicyState:
    """Solve the fluid problem at epsilon = 1/T and commit to the first offer."""
    kind = PolicyKind.parse(kind)
    inventory = InventoryState.initial(instance) if inventory is None else inventory
    xf = solve_phi(instance, instance.gamma0, fluid_epsilon(instance.horizon))
    tau0 = initial_epochs(instance.horizon, xf.denominator)
    state = PolicyState(kind=kind, initial_fluid=xf, tau0=tau0, epoch_index=tau0)
    if kind is PolicyKind.RESOLVING:
        _start_epoch(state, inventory, instance, rng)
    else:
        state.fluid_decomposition = decompose(xf.x, instance.cardinality_cap)
        state._fluid_cum = state.fluid_decomposition.cumulative()
        _sample_fluid(state, inventory, instance, rng)
    return state


def select_assortment(state: PolicyState, inventory: InventoryState, instance: ModelInstance,
                      rng=None) -> Assortment:
    """Current offer restricted to products that can still be sold."""
    if state.exhausted:
        return Assortment()
    return _feasible_subset(state.current_support, inventory, instance)


def epoch_ends(state: PolicyState, outcome, inventory: InventoryState, instance: ModelInstance) -> bool:
    """No-purchase, or (re-solving only) a member of the support ran out."""
    if outcome is None:
        return True
    if state.kind is PolicyKind.RESOLVING:
        ok = inventory.feasible_products(instance)
        return not all(ok[i] for i in state.current_support)
    return False


def notify_outcome(state: PolicyState, outcome, inventory: InventoryState, instance: ModelInstance,
                   rng) -> PolicyState:
    """Advance the policy after a period; ``outcome`` is a 0-based product or None.

    ``inventory`` must already reflect the period's sale. Nothing is re-solved
    or resampled once the horizon is reached. When an epoch ends with no
    product left in stock the state is marked exhausted instead.
    """
    if inventory.periods_left(instance) <= 0 or state.exhausted:
        return state
    return advance(state, epoch_ends(state, outcome, inventory, instance), inventory, instance, rng)


def advance(state: PolicyState, ended: bool, inventory: InventoryState, instance: ModelInstance,
            rng) -> PolicyState:
    """Transition shared by ``notify_outcome`` and the simulator's fast path."""
    if inventory.periods_left(instance) <= 0 or state.exhausted:
        return state
    resample = ended or state.kind is PolicyKind.SAMPLING_PER_PERIOD
    if not resample:
        return state
    ok = inventory.feasible_products(instance)
    if ended and not ok.any():
        state.exhausted = True
        state.current_support = Assortment()
        return state
    if state.kind is PolicyKind.RESOLVING:
        state.epoch_index = max(state.epoch_index - 1, 1)
        _start_epoch(state, inventory, instance, rng, ok)
    else:
        _sample_fluid(state, inventory, instance, rng, ok)
    return state
