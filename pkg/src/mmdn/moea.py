"""NSGA-II: warm-start generator and stand-alone baseline.

Operators follow the usual defaults: simulated binary crossover (p=0.9,
eta=15), polynomial mutation (p=1/n, eta=20), binary tournament on
(rank, crowding) and (mu + mu) elitist survival.

Random stream order per run (numpy PCG64 seeded with ``cfg.seed``): initial
population, then per generation tournament draws, crossover draws, mutation
draws.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class MoeaConfig:
    pop_size: int = 40
    crossover_prob: float = 0.9
    crossover_eta: float = 15.0
    mutation_prob: Optional[float] = None  # None: 1/n
    mutation_eta: float = 20.0
    seed: int = 0

    def __post_init__(self):
        if self.pop_size < 2:
            raise ValueError("pop_size must be at least 2")
        for p in (self.crossover_prob, self.mutation_prob):
            if p is not None and not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
        if self.crossover_eta < 1 or self.mutation_eta < 1:
            raise ValueError("distribution indices must be >= 1")


@dataclass
class Population:
    X: np.ndarray
    F: np.ndarray
    rank: np.ndarray
    crowding: np.ndarray
    generation: int = 0
    eval_count: int = 0

    def __len__(self):
        return len(self.X)

    def copy(self) -> "Population":
        return replace(self, X=self.X.copy(), F=self.F.copy(), rank=self.rank.copy(), crowding=self.crowding.copy())

    def nondominated(self) -> np.ndarray:
        return np.flatnonzero(self.rank == 0)

    def to_csv(self, path) -> None:
        n, k = self.X.shape[1], self.F.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(n)] + [f"f{j}" for j in range(k)] + ["rank", "crowding"])
            for x, f, r, c in zip(self.X, self.F, self.rank, self.crowding):
                w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in f] + [int(r), repr(float(c))])


# ---------------------------------------------------------------------------
# sorting


def dominates(a, b) -> bool:
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_sort(F) -> list:
    """Fronts as sorted index arrays, first front nondominated."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    N = len(F)
    if N == 0:
        raise ValueError("nondominated_sort needs at least one point")
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    count = dom.sum(axis=0)
    fronts = []
    remaining = np.ones(N, dtype=bool)
    current = np.flatnonzero(count == 0)
    while len(current):
        fronts.append(current)
        remaining[current] = False
        count = count - dom[current].sum(axis=0)
        current = np.flatnonzero(remaining & (count == 0))
    return fronts


def crowding_distance(F) -> np.ndarray:
    F = np.atleast_2d(np.asarray(F, dtype=float))
    N, k = F.shape
    d = np.zeros(N)
    if N <= 2:
        return np.full(N, np.inf)
    for j in range(k):
        order = np.argsort(F[:, j], kind="stable")
        fj = F[order, j]
        span = fj[-1] - fj[0]
        d[order[0]] = d[order[-1]] = np.inf
        if span > 0:
            d[order[1:-1]] += (fj[2:] - fj[:-2]) / span
    return d


def rank_and_crowding(F):
    rank = np.empty(len(F), dtype=int)
    crowd = np.empty(len(F))
    fronts = nondominated_sort(F)
    for r, idx in enumerate(fronts):
        rank[idx] = r
        crowd[idx] = crowding_distance(F[idx])
    return rank, crowd, fronts


# ---------------------------------------------------------------------------
# operators


def sbx(P1, P2, lower, upper, eta, prob, rng):
    """Bounded simulated binary crossover on paired parents (rows of P1, P2)."""
    m, n = P1.shape
    C1, C2 = P1.copy(), P2.copy()
    do_pair = rng.random(m) < prob
    do_var = rng.random((m, n)) < 0.5
    u = rng.random((m, n))
    swap = rng.random((m, n)) < 0.5
    mask = do_pair[:, None] & do_var & (np.abs(P1 - P2) > 1e-14)
    y1, y2 = np.minimum(P1, P2), np.maximum(P1, P2)
    diff = np.where(mask, y2 - y1, 1.0)
    span_lo = np.broadcast_to(lower, (m, n))
    span_hi = np.broadcast_to(upper, (m, n))

    def betaq(beta):
        alpha = 2.0 - beta ** -(eta + 1.0)
        return np.where(u <= 1.0 / alpha,
                        (u * alpha) ** (1.0 / (eta + 1.0)),
                        (1.0 / np.maximum(2.0 - u * alpha, 1e-300)) ** (1.0 / (eta + 1.0)))

    c1 = 0.5 * (y1 + y2 - betaq(1.0 + 2.0 * (y1 - span_lo) / diff) * diff)
    c2 = 0.5 * (y1 + y2 + betaq(1.0 + 2.0 * (span_hi - y2) / diff) * diff)
    c1, c2 = np.clip(c1, lower, upper), np.clip(c2, lower, upper)
    a, b = np.where(swap, c2, c1), np.where(swap, c1, c2)
    C1[mask], C2[mask] = a[mask], b[mask]
    return C1, C2


def polynomial_mutation(X, lower, upper, eta, prob, rng):
    m, n = X.shape
    do = rng.random((m, n)) < prob
    u = rng.random((m, n))
    span = upper - lower
    d1, d2 = (X - lower) / span, (upper - X) / span
    p = 1.0 / (eta + 1.0)
    lo = u < 0.5
    val_lo = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)
    val_hi = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)
    dq = np.where(lo, np.maximum(val_lo, 0.0) ** p - 1.0, 1.0 - np.maximum(val_hi, 0.0) ** p)
    return np.clip(np.where(do, X + dq * span, X), lower, upper)


def binary_tournament(rank, crowd, count, rng) -> np.ndarray:
    a = rng.integers(len(rank), size=count)
    b = rng.integers(len(rank), size=count)
    a_wins = (rank[a] < rank[b]) | ((rank[a] == rank[b]) & (crowd[a] > crowd[b])) | (
        (rank[a] == rank[b]) & (crowd[a] == crowd[b]) & (a <= b))
    return np.where(a_wins, a, b)


def survival(F, mu: int):
    """Indices of the mu survivors (rank first, then crowding, ties to lower index)."""
    rank, crowd, fronts = rank_and_crowding(F)
    chosen = []
    for idx in fronts:
        if len(chosen) + len(idx) <= mu:
            chosen.extend(idx.tolist())
            if len(chosen) == mu:
                break
            continue
        c = crowding_distance(F[idx])
        order = np.lexsort((idx, -c))  # descending crowding, then index
        chosen.extend(idx[order[: mu - len(chosen)]].tolist())
        break
    return np.array(chosen)


# ---------------------------------------------------------------------------


class NSGA2:
    """Stateful NSGA-II run; ``step`` advances one generation."""

    def __init__(self, problem, cfg: MoeaConfig):
        self.problem = problem
        self.cfg = cfg
        self.rng = np.random.Generator(np.random.PCG64(cfg.seed))
        self.pm = 1.0 / problem.n if cfg.mutation_prob is None else cfg.mutation_prob
        lo, hi = problem.lower, problem.upper
        X = lo + (hi - lo) * self.rng.random((cfg.pop_size, problem.n))
        F = problem.evaluate(X)
        rank, crowd, _ = rank_and_crowding(F)
        self.pop = Population(X, F, rank, crowd, 0, cfg.pop_size)

    def step(self) -> Population:
        mu, pop, rng = self.cfg.pop_size, self.pop, self.rng
        lo, hi = self.problem.lower, self.problem.upper
        n_pairs = (mu + 1) // 2
        parents = binary_tournament(pop.rank, pop.crowding, 2 * n_pairs, rng)
        P1, P2 = pop.X[parents[0::2]], pop.X[parents[1::2]]
        C1, C2 = sbx(P1, P2, lo, hi, self.cfg.crossover_eta, self.cfg.crossover_prob, rng)
        children = np.empty((2 * n_pairs, self.problem.n))
        children[0::2], children[1::2] = C1, C2
        children = polynomial_mutation(children[:mu], lo, hi, self.cfg.mutation_eta, self.pm, rng)
        Fc = self.problem.evaluate(children)
        X = np.vstack([pop.X, children])
        F = np.vstack([pop.F, Fc])
        keep = survival(F, mu)
        X, F = X[keep], F[keep]
        rank, crowd, _ = rank_and_crowding(F)
        self.pop = Population(X, F, rank, crowd, pop.generation + 1, pop.eval_count + mu)
        return self.pop

    def run(self, generations: int) -> Population:
        for _ in range(generations):
            self.step()
        return self.pop


def nsga2_run(problem, cfg: MoeaConfig, generations: int) -> Population:
    if generations < 0:
        raise ValueError("generations must be nonnegative")
    return NSGA2(problem, cfg).run(generations).copy()
