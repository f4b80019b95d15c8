"""Permutation genetic search over frozen queue snapshots.

The genome is the cascade of every resource queue's waiting order, tier-major
("one virtual queue").  Genes never cross tier boundaries, and in-service
jobs are pinned in the snapshot rather than encoded, so every operator maps
valid chromosomes to valid chromosomes by construction.  Moving a gene within
its segment reorders a queue; moving it to another segment of the same tier
migrates the job to a sibling resource.

Two search variants share the same machinery: the virtualized variant evolves
the whole cascade at once (reorder + migrate), the segmented variant evolves
each queue's permutation independently (reorder only).
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from itertools import accumulate

import numpy as np

from .model import Schedule, Snapshot
from .penalty import AllowanceMode, ScheduleEvaluator


class QueueVariant:
    VIRTUALIZED = "virtualized"
    SEGMENTED = "segmented"


@dataclass(frozen=True)
class GAConfig:
    """Search parameters.

    Operator counts default to one tenth of the population, rounded; with the
    default population of 10 that is one crossover pair and one insert
    mutation per generation, the rest of the next population being elitism
    plus roulette-selected copies.
    """

    population: int = 10
    generations: int = 1000
    crossovers: int | None = None
    mutations: int | None = None
    elite: int = 1
    variant: str = QueueVariant.VIRTUALIZED
    mode: AllowanceMode = AllowanceMode.TOTAL
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ValueError("population must hold at least two chromosomes")
        if self.generations < 1:
            raise ValueError("need at least one generation")
        if self.elite < 0 or (self.crossovers or 0) < 0 or (self.mutations or 0) < 0:
            raise ValueError("counts must be nonnegative")
        if self.variant not in (QueueVariant.VIRTUALIZED, QueueVariant.SEGMENTED):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.elite + 2 * self.crossover_count + self.mutation_count > self.population:
            raise ValueError("elite + operator offspring exceed the population")

    @property
    def crossover_count(self) -> int:
        if self.crossovers is not None:
            return self.crossovers
        return round(0.1 * self.population)

    @property
    def mutation_count(self) -> int:
        if self.mutations is not None:
            return self.mutations
        return round(0.1 * self.population)


@dataclass(frozen=True)
class Chromosome:
    """Waiting-job orders of every queue, tier-major.

    ``segment_tier[s]`` is the tier owning segment ``s``; segments of one
    tier are contiguous.  In-service jobs are not genes.
    """

    segments: tuple[tuple[int, ...], ...]
    segment_tier: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments",
                           tuple(tuple(s) for s in self.segments))
        object.__setattr__(self, "segment_tier", tuple(self.segment_tier))
        if len(self.segments) != len(self.segment_tier):
            raise ValueError("one owning tier per segment required")

    @property
    def num_genes(self) -> int:
        return sum(len(s) for s in self.segments)

    def genes_in_tier(self, tier: int) -> list[int]:
        out: list[int] = []
        for seg, t in zip(self.segments, self.segment_tier):
            if t == tier:
                out.extend(seg)
        return out


def encode(snapshot: Snapshot) -> Chromosome:
    """Chromosome of the snapshot's current schedule."""
    return Chromosome(
        segments=snapshot.schedule.flat_waiting(),
        segment_tier=tuple(t for t, _ in snapshot.env.iter_queues()))


def decode(chromosome: Chromosome, snapshot: Snapshot) -> Schedule:
    """Schedule realizing a chromosome over the snapshot's pinned heads."""
    return snapshot.schedule.with_waiting(chromosome.segments)


def chromosome_valid(chromosome: Chromosome, snapshot: Snapshot) -> bool:
    """True when per-tier gene multisets match the snapshot's waiting jobs."""
    env = snapshot.env
    if chromosome.segment_tier != tuple(t for t, _ in env.iter_queues()):
        return False
    for tier in range(env.num_tiers):
        genes = chromosome.genes_in_tier(tier)
        if len(set(genes)) != len(genes):
            return False
        if sorted(genes) != snapshot.waiting_ids(tier):
            return False
    return True


def fitness(chromosome: Chromosome, snapshot: Snapshot,
            mode: AllowanceMode) -> float:
    """Signed violation total of the decoded schedule (lower is better)."""
    return ScheduleEvaluator(snapshot, mode).fitness(chromosome.segments)


@dataclass(frozen=True)
class FitnessValue:
    """Raw score plus its normalized share of the selection wheel."""

    raw: float
    normalized: float


def fitness_values(raws) -> list[FitnessValue]:
    """Roulette weights from raw scores.

    Raw scores measure violation, so selection inverts them: weight grows as
    the score falls below the generation's worst.  A tiny epsilon keeps
    degenerate (all-equal) populations on a uniform wheel.
    """
    raws = list(raws)
    worst = max(raws)
    eps = 1e-12 * max(1.0, max(abs(r) for r in raws))
    weights = [(worst - r) + eps for r in raws]
    total = sum(weights)
    return [FitnessValue(raw=r, normalized=w / total)
            for r, w in zip(raws, weights)]


def select(population, raws, rng: np.random.Generator, count: int = 1) -> list:
    """Roulette-wheel draw of ``count`` members (with replacement)."""
    values = fitness_values(raws)
    wheel = list(accumulate(v.normalized for v in values))
    wheel[-1] = 1.0
    return [population[bisect_right(wheel, rng.random())]
            for _ in range(count)]


def _tier_order(chromosome: Chromosome) -> dict[int, list[int]]:
    order: dict[int, list[int]] = {}
    for seg, tier in zip(chromosome.segments, chromosome.segment_tier):
        order.setdefault(tier, []).extend(seg)
    return order


def crossover(parent_a: Chromosome, parent_b: Chromosome,
              rng: np.random.Generator) -> tuple[Chromosome, Chromosome]:
    """Single-point crossover with order-preserving repair, per tier.

    One cut point is drawn over the gene positions.  A child keeps its
    template parent's segment sizes, copies that parent's genes before the
    cut, and fills the rest in the other parent's relative order, skipping
    ids already placed.  Because both parents hold the same per-tier gene
    multisets, the repair never moves a gene across tiers.
    """
    total = parent_a.num_genes
    if total == 0:
        return parent_a, parent_b
    cut = int(rng.integers(total))
    return (_crossover_child(parent_a, parent_b, cut),
            _crossover_child(parent_b, parent_a, cut))


def _crossover_child(template: Chromosome, donor: Chromosome,
                     cut: int) -> Chromosome:
    donor_order = _tier_order(donor)
    segments: list[tuple[int, ...]] = []
    offset = 0
    tier_fill: dict[int, list[int]] = {}
    # First pass: per tier, the child's flat gene order.
    tier_sizes: dict[int, int] = {}
    for seg, tier in zip(template.segments, template.segment_tier):
        tier_sizes[tier] = tier_sizes.get(tier, 0) + len(seg)
    for tier in sorted(tier_sizes):
        span = tier_sizes[tier]
        local_cut = min(max(cut - offset, 0), span)
        own = template.genes_in_tier(tier)
        head = own[:local_cut]
        kept = set(head)
        tier_fill[tier] = head + [g for g in donor_order.get(tier, [])
                                  if g not in kept]
        offset += span
    # Second pass: re-split each tier's order into the template's sizes.
    consumed: dict[int, int] = {t: 0 for t in tier_fill}
    for seg, tier in zip(template.segments, template.segment_tier):
        start = consumed[tier]
        segments.append(tuple(tier_fill[tier][start:start + len(seg)]))
        consumed[tier] = start + len(seg)
    return Chromosome(segments=tuple(segments),
                      segment_tier=template.segment_tier)


def mutate(chromosome: Chromosome, rng: np.random.Generator) -> Chromosome:
    """Insert mutation: pull one gene and reinsert it within its tier.

    Reinsertion into the same segment reorders that queue; reinsertion into a
    sibling segment migrates the job to another resource of the tier.
    """
    total = chromosome.num_genes
    if total == 0:
        return chromosome
    gene_idx = int(rng.integers(total))
    segments = [list(s) for s in chromosome.segments]
    seg_idx = 0
    while gene_idx >= len(segments[seg_idx]):
        gene_idx -= len(segments[seg_idx])
        seg_idx += 1
    gene = segments[seg_idx].pop(gene_idx)
    tier = chromosome.segment_tier[seg_idx]

    tier_segs = [i for i, t in enumerate(chromosome.segment_tier) if t == tier]
    slots = sum(len(segments[i]) + 1 for i in tier_segs)
    slot = int(rng.integers(slots))
    for i in tier_segs:
        if slot <= len(segments[i]):
            segments[i].insert(slot, gene)
            break
        slot -= len(segments[i]) + 1
    return Chromosome(segments=tuple(tuple(s) for s in segments),
                      segment_tier=chromosome.segment_tier)


def random_chromosome(snapshot: Snapshot, rng: np.random.Generator) -> Chromosome:
    """Uniformly random valid chromosome: per tier, a random permutation of
    the waiting jobs dealt to uniformly random queues."""
    env = snapshot.env
    per_queue: dict[tuple[int, int], list[int]] = {
        (t, k): [] for t, k in env.iter_queues()}
    for tier in range(env.num_tiers):
        ids = snapshot.waiting_ids(tier)
        if not ids:
            continue
        order = [ids[int(i)] for i in rng.permutation(len(ids))]
        picks = rng.integers(env.resources_per_tier[tier], size=len(order))
        for jid, k in zip(order, picks):
            per_queue[(tier, int(k))].append(jid)
    return Chromosome(
        segments=tuple(tuple(per_queue[(t, k)]) for t, k in env.iter_queues()),
        segment_tier=tuple(t for t, _ in env.iter_queues()))


@dataclass(frozen=True)
class GenerationStats:
    """History record: best-so-far and population mean of one generation."""

    generation: int
    best: float
    mean: float


@dataclass(frozen=True)
class EvolveResult:
    """Outcome of one genetic run."""

    best_schedule: Schedule
    best_fitness: float
    best_chromosome: Chromosome
    initial_fitness: float
    history: tuple[GenerationStats, ...]
    evaluations: int


def _run_ga(seeded: Chromosome, sample_random, score, config: GAConfig,
            rng: np.random.Generator):
    """Shared evolution loop; returns (best, best_score, history, evals).

    Every population member is scored in every generation, so the evaluation
    budget is exactly population x generations.  The best-ever chromosome is
    carried unmodified into each next generation (elitism), which makes the
    best-so-far history nonincreasing.
    """
    n = config.population
    population = [seeded] + [sample_random(rng) for _ in range(n - 1)]
    best_c = None
    best_f = float("inf")
    history: list[GenerationStats] = []
    evaluations = 0
    for gen in range(config.generations):
        fits = [score(c) for c in population]
        evaluations += n
        for c, f in zip(population, fits):
            if f < best_f:
                best_c, best_f = c, f
        history.append(GenerationStats(
            generation=gen, best=best_f, mean=sum(fits) / n))
        if gen == config.generations - 1:
            break
        nxt = [best_c]
        for _ in range(config.crossover_count):
            pa, pb = select(population, fits, rng, 2)
            ca, cb = crossover(pa, pb, rng)
            nxt.extend((ca, cb))
        for _ in range(config.mutation_count):
            nxt.append(mutate(select(population, fits, rng, 1)[0], rng))
        while len(nxt) < n:
            nxt.extend(select(population, fits, rng, 1))
        population = nxt[:n]
    return best_c, best_f, history, evaluations


def evolve(snapshot: Snapshot, config: GAConfig | None = None) -> EvolveResult:
    """Run the genetic search on a frozen snapshot.

    Dispatches on ``config.variant``; the initial population always contains
    the snapshot's own schedule, so the result can never be worse than the
    incumbent.  Deterministic for a fixed seed.
    """
    config = config or GAConfig()
    if config.variant == QueueVariant.SEGMENTED:
        return evolve_segmented(snapshot, config)
    evaluator = ScheduleEvaluator(snapshot, config.mode)
    rng = np.random.default_rng(config.seed)
    seeded = encode(snapshot)
    initial = evaluator.fitness(seeded.segments)
    best_c, best_f, history, evaluations = _run_ga(
        seeded=seeded,
        sample_random=lambda r: random_chromosome(snapshot, r),
        score=lambda c: evaluator.fitness(c.segments),
        config=config,
        rng=rng,
    )
    return EvolveResult(
        best_schedule=decode(best_c, snapshot),
        best_fitness=best_f,
        best_chromosome=best_c,
        initial_fitness=initial,
        history=tuple(history),
        evaluations=evaluations,
    )


def evolve_segmented(snapshot: Snapshot,
                     config: GAConfig | None = None) -> EvolveResult:
    """Independent genetic search per resource queue (reorder only).

    Each queue with at least two waiting jobs gets its own full run over the
    permutations of that queue; queues with fewer stay as they are.  Queue
    scores are independent, so the concatenation of per-queue winners is the
    variant's best schedule and the per-generation histories add up.
    """
    config = config or GAConfig()
    evaluator = ScheduleEvaluator(snapshot, config.mode)
    env = snapshot.env
    queue_tiers = [t for t, _ in env.iter_queues()]
    initial_orders = snapshot.schedule.flat_waiting()
    initial = evaluator.fitness(initial_orders)

    best_orders: list[tuple[int, ...]] = []
    fixed_total = evaluator._pinned_total
    histories: list[list[GenerationStats]] = []
    evaluations = 0
    for qi, order in enumerate(initial_orders):
        if len(order) < 2:
            best_orders.append(order)
            fixed_total += evaluator.queue_score(qi, order)
            continue
        tier = queue_tiers[qi]
        seeded = Chromosome(segments=(order,), segment_tier=(tier,))

        def sample(r: np.random.Generator, order=order, tier=tier) -> Chromosome:
            perm = tuple(order[int(i)] for i in r.permutation(len(order)))
            return Chromosome(segments=(perm,), segment_tier=(tier,))

        rng = np.random.default_rng((config.seed, qi))
        best_c, best_f, history, evals = _run_ga(
            seeded=seeded,
            sample_random=sample,
            score=lambda c, qi=qi: evaluator.queue_score(qi, c.segments[0]),
            config=config,
            rng=rng,
        )
        best_orders.append(best_c.segments[0])
        histories.append(history)
        evaluations += evals

    generations = config.generations
    combined: list[GenerationStats] = []
    for gen in range(generations):
        best = fixed_total + sum(h[gen].best for h in histories)
        mean = fixed_total + sum(h[gen].mean for h in histories)
        combined.append(GenerationStats(generation=gen, best=best, mean=mean))

    best_schedule = snapshot.schedule.with_waiting(best_orders)
    best_chromosome = Chromosome(segments=tuple(best_orders),
                                 segment_tier=tuple(queue_tiers))
    return EvolveResult(
        best_schedule=best_schedule,
        best_fitness=evaluator.fitness(best_orders),
        best_chromosome=best_chromosome,
        initial_fitness=initial,
        history=tuple(combined),
        evaluations=evaluations,
    )
