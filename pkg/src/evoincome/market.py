"""Short-time-scale circuit of the representative good.

Business units sell ``K`` variants (products) of one good.  Each product
carries a price ``p``, a preference rate ``eta``, a reproduction
coefficient ``gamma`` (relative excess of supply over sales), an inventory
density ``z`` and a sales density ``y``.  Potential consumers ``psi`` appear
at the demand rate ``d(<p>)`` and disappear by purchasing.

One simulation step applies, in order: the replicator update of sales
(total sales held fixed), the inventory balance, and the consumer balance.
Money flows between agents are booked in :class:`AgentLedger` snapshots so
conservation can be checked afterwards.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCostError, DomainError, EmptyMarketError, SlowRelaxationWarning


@dataclass(frozen=True)
class CostCurve:
    """Total costs ``c0 + c1 s + c2 s**2`` of a business unit at output ``s``."""

    c0: float
    c1: float
    c2: float

    def __post_init__(self):
        for name in ("c0", "c1", "c2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")


@dataclass(frozen=True)
class Product:
    price: float
    preference: float
    reproduction: float
    inventory: float
    sales: float
    costs: CostCurve = CostCurve(0.0, 0.0, 0.0)
    stockout: bool = False

    def __post_init__(self):
        if not self.price > 0:
            raise ValueError("price must be > 0")
        if not self.preference > 0:
            raise ValueError("preference must be > 0")
        if self.inventory < 0 or self.sales < 0:
            raise ValueError("inventory and sales must be >= 0")

    @property
    def supply(self):
        return (1.0 + self.reproduction) * self.sales


@dataclass(frozen=True)
class MarketState:
    products: tuple
    psi: float
    demand_intercept: float
    demand_slope: float
    growth_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "products", tuple(self.products))
        if self.psi < 0:
            raise ValueError("psi must be >= 0")
        if not self.demand_slope > 0:
            raise ValueError("demand must decrease with price (demand_slope > 0)")

    def demand(self, mean_price):
        """Demand rate ``max(0, intercept - slope * <p>)``."""
        return max(0.0, self.demand_intercept - self.demand_slope * mean_price)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def column(self, name):
        return np.array([getattr(p, name) for p in self.products], dtype=float)


@dataclass(frozen=True)
class MarketAggregates:
    mean_price: float
    total_sales: float
    total_supply: float
    mean_reproduction: float
    net_income: float
    total_wage: float
    total_profit: float
    alpha: float
    mean_unit_cost: float
    mean_unit_profit: float
    mean_fitness: float = 0.0
    profit_approx_error: float = 0.0
    psi: float = 0.0
    demand: float = 0.0

    FIELDS = ("mean_price", "total_sales", "total_supply", "mean_reproduction", "net_income",
              "total_wage", "total_profit", "alpha", "mean_unit_cost", "mean_unit_profit",
              "mean_fitness", "profit_approx_error", "psi", "demand")

    def row(self):
        return [getattr(self, k) for k in self.FIELDS]


# static market

def capacity_limit(costs):
    """Output ``sqrt(c0/c2)`` at which the unit costs are minimal.

    With ``c0 = 0`` the unit cost is monotone in the output; the limit is
    then 0 and a warning is issued.
    """
    if costs.c2 == 0:
        raise DegenerateCostError("c2 = 0: unit costs have no interior minimum")
    if costs.c0 == 0:
        warnings.warn("c0 = 0: unit costs increase monotonically, capacity limit is 0",
                      RuntimeWarning, stacklevel=2)
    return math.sqrt(costs.c0 / costs.c2)


def unit_cost(costs, output):
    out = np.asarray(output, dtype=float)
    if np.any(~(out > 0)):
        raise DomainError("output must be > 0")
    c = costs.c0 / out + costs.c1 + costs.c2 * out
    return float(c) if c.ndim == 0 else c


def mean_price(products):
    """Sales-weighted mean price."""
    y = np.array([p.sales for p in products], dtype=float)
    total = y.sum()
    if not total > 0:
        raise EmptyMarketError("mean price undefined for zero total sales")
    return float(np.dot(y, [p.price for p in products]) / total)


def purchase_flow(product, psi):
    return product.preference * product.inventory * psi


def product_fitness(product, psi_at_price):
    return psi_at_price * product.preference * product.reproduction


def _fitness(state):
    return np.array([product_fitness(p, state.psi) for p in state.products])


def _unit_costs(state):
    """Unit cost of each product at its supply; zero where nothing is sold."""
    out = np.zeros(len(state.products))
    for k, p in enumerate(state.products):
        if p.supply > 0:
            out[k] = unit_cost(p.costs, p.supply)
    return out


def aggregates(state):
    y = state.column("sales")
    y_t = y.sum()
    if not y_t > 0:
        raise EmptyMarketError("aggregates undefined for zero total sales")
    p = state.column("price")
    g = state.column("reproduction")
    c = _unit_costs(state)
    s = (1.0 + g) * y
    f = _fitness(state)

    mp = float(np.dot(y, p) / y_t)
    mg = float(np.dot(y, g) / y_t)
    mc = float(np.dot(y, c) / y_t)
    mcg = float(np.dot(y, c * g) / y_t)
    e_t = float(np.dot(p, y))
    w_t = float(np.dot(c, s))
    g_t = e_t - w_t
    return MarketAggregates(
        mean_price=mp, total_sales=float(y_t), total_supply=float(s.sum()),
        mean_reproduction=mg, net_income=e_t, total_wage=w_t, total_profit=g_t,
        alpha=w_t / e_t, mean_unit_cost=mc, mean_unit_profit=mp - mc,
        mean_fitness=float(np.dot(y, f) / y_t),
        profit_approx_error=(mc * mg - mcg) * float(y_t),
        psi=state.psi, demand=state.demand(mp))


def cobb_douglas_ratio(agg):
    """Wage share ``alpha = w_t / e_t`` of the net income."""
    if not agg.net_income > 0:
        raise DomainError("Cobb-Douglas ratio needs a positive net income")
    return agg.total_wage / agg.net_income


# dynamics

def replicator_step(state, dt):
    """Selection among products at fixed total sales.

    ``y_k <- y_k exp((f_k - <f>) dt)`` followed by rescaling to the previous
    total; ``growth_offset`` records ``<f>``.
    """
    y = state.column("sales")
    y_t = y.sum()
    if not y_t > 0:
        raise EmptyMarketError("replicator step needs positive total sales")
    f = _fitness(state)
    mean_f = float(np.dot(y, f) / y_t)
    new = y * np.exp((f - mean_f) * dt)
    new *= y_t / new.sum()
    products = tuple(dataclasses.replace(p, sales=float(v)) for p, v in zip(state.products, new))
    return state.replace(products=products, growth_offset=mean_f)


def inventory_step(state, dt):
    """``z_k <- z_k + gamma_k y_k dt``, clamped at zero with a stockout flag."""
    products = []
    for p in state.products:
        z = p.inventory + (p.supply - p.sales) * dt
        products.append(dataclasses.replace(p, inventory=max(z, 0.0), stockout=z < 0))
    return state.replace(products=tuple(products))


def consumer_balance_step(state, dt):
    y_t = sum(p.sales for p in state.products)
    d = state.demand(mean_price(state.products)) if y_t > 0 else state.demand_intercept
    return state.replace(psi=max(0.0, state.psi + (d - y_t) * dt))


def market_step(state, dt):
    return consumer_balance_step(inventory_step(replicator_step(state, dt), dt), dt)


# money ledgers

@dataclass(frozen=True)
class AgentLedger:
    """Money holdings and flows of all agents at one instant.

    ``inflow`` and ``outflow`` are rates that apply until the next
    snapshot; ``taxes_net`` is the net tax paid (positive) or received.
    """

    money: np.ndarray
    inflow: np.ndarray
    outflow: np.ndarray
    taxes_net: np.ndarray
    kinds: tuple = ()

    def __post_init__(self):
        n = np.shape(self.money)[0]
        for name in ("inflow", "outflow", "taxes_net"):
            if np.shape(getattr(self, name)) != (n,):
                raise ValueError(f"{name} must have one entry per agent")

    @property
    def total_money(self):
        return math.fsum(self.money)

    def inject(self, agent, amount):
        """Copy with money added to one agent outside any flow (for tests)."""
        m = self.money.copy()
        m[agent] += amount
        return dataclasses.replace(self, money=m)


@dataclass(frozen=True)
class Economy:
    """Agent layout of the money circuit: one firm per product, plus households."""

    n_employees: int = 10
    n_unemployed: int = 2
    tax_rate: float = 0.1

    def __post_init__(self):
        if self.n_employees < 1 or self.n_unemployed < 0:
            raise ValueError("need at least one employee and n_unemployed >= 0")
        if not 0 <= self.tax_rate < 1:
            raise ValueError("tax_rate must lie in [0, 1)")

    def kinds(self, n_firms):
        return ("firm",) * n_firms + ("employee",) * self.n_employees + \
            ("unemployed",) * self.n_unemployed


def ledger_flows(state, money, economy):
    """Flow rates for the current state and holdings.

    Agents spend the net income ``e_t`` in proportion to their money.  Firms
    receive their product revenue and pay their costs as wages, split evenly
    across employees.  Wages and positive profits are taxed and the taxes
    are shared evenly among the unemployed (with no unemployed, no tax).
    """
    n_f = len(state.products)
    n = money.size
    y = state.column("sales")
    revenue = state.column("price") * y
    cost = _unit_costs(state) * (1.0 + state.column("reproduction")) * y
    e_t = revenue.sum()
    total = money.sum()

    inflow = np.zeros(n)
    outflow = e_t * money / total
    inflow[:n_f] += revenue
    outflow[:n_f] += cost
    emp = slice(n_f, n_f + economy.n_employees)
    inflow[emp] += cost.sum() / economy.n_employees

    taxes = np.zeros(n)
    if economy.n_unemployed and economy.tax_rate:
        rate = economy.tax_rate
        taxes[:n_f] = rate * np.maximum(revenue - cost, 0.0)
        taxes[emp] = rate * cost.sum() / economy.n_employees
        taxes[n_f + economy.n_employees:] = -taxes.sum() / economy.n_unemployed
    inflow += np.maximum(-taxes, 0.0)
    outflow += np.maximum(taxes, 0.0)
    return inflow, outflow, taxes


def initial_ledger(state, economy, money_per_agent=100.0):
    n = len(state.products) + economy.n_employees + economy.n_unemployed
    money = np.full(n, float(money_per_agent))
    inflow, outflow, taxes = ledger_flows(state, money, economy)
    return AgentLedger(money, inflow, outflow, taxes, economy.kinds(len(state.products)))


def ledger_step(ledger, state, economy, dt):
    """Book one step of flows and evaluate the flows of ``state``."""
    money = ledger.money + (ledger.inflow - ledger.outflow) * dt
    inflow, outflow, taxes = ledger_flows(state, money, economy)
    return AgentLedger(money, inflow, outflow, taxes, ledger.kinds)


@dataclass
class ConservationReport:
    passed: bool
    max_violation: float
    max_relative_violation: float
    max_tax_imbalance: float
    offenders: list = field(default_factory=list)
    n_steps: int = 0

    def to_dict(self):
        return dataclasses.asdict(self)


def conservation_check(ledgers, dt, rtol=1e-9):
    """Check money conservation along a ledger history.

    For every step and agent, ``m(t+dt) - m(t) - (inflow - outflow) dt``
    must vanish, as must the change of total money; taxes must net to zero
    at every snapshot.  Tolerances are ``rtol`` times the total money.
    Offenders are listed as ``(step, agent, residual)``; ``agent`` is
    ``None`` for a violation of the total.
    """
    ledgers = list(ledgers)
    offenders = []
    max_abs = max_rel = max_tax = 0.0
    for step, (a, b) in enumerate(zip(ledgers, ledgers[1:])):
        scale = max(a.total_money, np.finfo(float).tiny)
        tol = rtol * scale
        resid = b.money - a.money - (a.inflow - a.outflow) * dt
        bad = np.flatnonzero(np.abs(resid) > tol)
        offenders += [(step, int(j), float(resid[j])) for j in bad]
        total = b.total_money - a.total_money
        if abs(total) > tol:
            offenders.append((step, None, float(total)))
        worst = max(float(np.max(np.abs(resid))), abs(total))
        max_abs = max(max_abs, worst)
        max_rel = max(max_rel, worst / scale)
    for step, a in enumerate(ledgers):
        imbalance = abs(math.fsum(a.taxes_net))
        max_tax = max(max_tax, imbalance)
        if imbalance > rtol * max(a.total_money, np.finfo(float).tiny):
            offenders.append((step, "taxes", imbalance))
    return ConservationReport(not offenders, max_abs, max_rel, max_tax, offenders,
                              max(0, len(ledgers) - 1))


# driver

@dataclass
class MarketRun:
    aggregates: list
    shares: np.ndarray
    state: MarketState
    ledgers: list
    stockout_steps: int = 0

    def series(self, name):
        return np.array([getattr(a, name) for a in self.aggregates])


def run_market(state, dt, n_steps, economy=None, money_per_agent=100.0, keep_ledgers=True):
    """Iterate :func:`market_step` and book the money circuit.

    Returns the aggregates and sales shares at every step (including the
    initial state) and, if ``economy`` is given, the ledger history.
    """
    aggs = [aggregates(state)]
    shares = [state.column("sales") / aggs[0].total_sales]
    ledgers = []
    ledger = None
    if economy is not None:
        ledger = initial_ledger(state, economy, money_per_agent)
        ledgers.append(ledger)
    stockouts = 0
    for _ in range(n_steps):
        state = market_step(state, dt)
        stockouts += any(p.stockout for p in state.products)
        agg = aggregates(state)
        aggs.append(agg)
        shares.append(state.column("sales") / agg.total_sales)
        if economy is not None:
            ledger = ledger_step(ledger, state, economy, dt)
            if keep_ledgers:
                ledgers.append(ledger)
    if economy is not None and not keep_ledgers:
        ledgers.append(ledger)
    return MarketRun(aggs, np.array(shares), state, ledgers, stockouts)


def equilibrium_psi(products):
    """Consumer density at which every product sells ``eta z psi``."""
    rate = sum(p.preference * p.inventory for p in products)
    if not rate > 0:
        raise DomainError("no available units: equilibrium consumer density undefined")
    return sum(p.sales for p in products) / rate


def quasi_equilibrium_state(products, demand_slope=1.0):
    """State with demand equal to total sales at the current mean price."""
    products = tuple(products)
    mp = mean_price(products)
    y_t = sum(p.sales for p in products)
    return MarketState(products, equilibrium_psi(products), y_t + demand_slope * mp, demand_slope)


# stability of the equilibrium

@dataclass
class StabilityProbe:
    rate: float
    expected_rate: float
    times: np.ndarray
    delta_psi: np.ndarray


def stability_probe(state, delta_psi0, dt, n_steps):
    """Relaxation rate of a consumer-density perturbation.

    Sales follow the available units, ``y_t = psi * sum(eta_k z_k)``, while
    demand stays at its equilibrium value ``psi_s * sum(eta_k z_k)``; the
    perturbation ``psi - psi_s`` is integrated with the consumer balance and
    its decay rate fitted on a log scale.  The expected rate is
    ``<eta>_z z_t = sum(eta_k z_k)``.
    """
    eta = state.column("preference")
    z = state.column("inventory")
    z_t = z.sum()
    rate = float(np.dot(eta, z))
    window = n_steps * dt
    if z_t <= 0 or rate * window < 1.0:
        warnings.warn("few available units: relaxation toward market equilibrium is slow",
                      SlowRelaxationWarning, stacklevel=2)
    psi_s = state.psi
    demand = psi_s * rate
    psi = max(0.0, psi_s + delta_psi0)
    dpsi = np.empty(n_steps + 1)
    dpsi[0] = psi - psi_s
    for i in range(1, n_steps + 1):
        psi = max(0.0, psi + (demand - psi * rate) * dt)
        dpsi[i] = psi - psi_s
    times = dt * np.arange(n_steps + 1)
    if delta_psi0 == 0 or rate == 0:
        return StabilityProbe(math.nan if delta_psi0 == 0 else 0.0, rate, times, dpsi)
    # past ~1e-12 of psi the deviation is rounding noise, not relaxation
    floor = 1e4 * np.finfo(float).eps * max(abs(psi_s), abs(delta_psi0))
    keep = (np.abs(dpsi) > floor) & (np.sign(dpsi) == np.sign(dpsi[0]))
    if keep.sum() < 2:
        raise ValueError("perturbation decays below rounding within one step; reduce dt")
    slope = np.polyfit(times[keep], np.log(np.abs(dpsi[keep])), 1)[0]
    return StabilityProbe(float(-slope), rate, times, dpsi)
