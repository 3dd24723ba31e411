"""Evolutionary trainer: tournament selection, crossover, mutation, elitism.

Populations of quantized networks are scored on data batches and bred
generation by generation.  Every operator draws from an explicit
numpy Generator, and all derived streams are seeded from
(master seed, purpose, epoch) tuples, so training is reproducible and
independent of worker scheduling; fitness evaluation itself uses no
randomness at all.

Crossover aligns parents by neuron id: for every neuron id (and every
synapse endpoint pair) a fair coin picks the donating parent, and the
child inherits whatever that parent holds at the locus.  Ids owned by
both parents are therefore always inherited (donor random); ids owned by
one parent are inherited with probability one half.  Input and output
neurons exist in both parents by the interface precondition, so the
child always keeps them.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import metrics as M
from .encoding import EncoderSpec, encode_run
from .inference import ClassifierConfig, Run, classify_run
from .network import (DELAY_MAX, HIDDEN, INPUT, MAX_NEURONS, MAX_SYNAPSES,
                      OUTPUT, THRESHOLD_MAX, WEIGHT_MAX, WEIGHT_MIN, Network,
                      Neuron, Synapse)
from .simulator import compile_network

_MUTATION_RETRIES = 8
_EDGE_SAMPLE_TRIES = 16


@dataclass
class EonsParams:
    """Hyperparameters of the evolutionary loop (defaults are the tuned set)."""

    starting_nodes: int = 50
    starting_edges: int = 50
    population_size: int = 100
    crossover_rate: float = 0.5
    mutation_rate: float = 0.9
    tournament_size_factor: float = 0.1
    tournament_best_net_factor: float = 0.9
    random_factor: float = 0.05
    num_mutations: int = 4
    num_best: int = 3
    add_node_rate: float = 0.5
    delete_node_rate: float = 0.25
    add_edge_rate: float = 0.75
    delete_edge_rate: float = 0.25
    node_params_rate: float = 2.5
    edge_params_rate: float = 2.5
    node_param_weights: dict = field(
        default_factory=lambda: {"threshold": 1.0})
    edge_param_weights: dict = field(
        default_factory=lambda: {"weight": 0.7, "delay": 0.3})
    merge_rate: float = 0.0
    multi_edges: bool = False

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        for name in ("crossover_rate", "mutation_rate", "random_factor",
                     "tournament_size_factor", "tournament_best_net_factor",
                     "add_node_rate", "delete_node_rate", "add_edge_rate",
                     "delete_edge_rate", "node_params_rate",
                     "edge_params_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.multi_edges:
            raise ValueError("multi_edges is not supported by the core")


@dataclass
class TrainConfig:
    epochs: int
    tau: int = 16
    fitness: str = M.FITNESS_MCC
    seed: int = 0
    batch_fraction: float = 0.01
    snr_gamma0: float = 3.0
    snr_ramp_fraction: float = 0.5
    mode: str = M.SAMPLE

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.fitness == "f1_plus_tpr0sq":
            self.fitness = M.FITNESS_RAD
        if self.fitness not in M.FITNESS_NAMES:
            raise ValueError(f"unknown fitness {self.fitness!r}")
        if not 0.0 < self.batch_fraction <= 1.0:
            raise ValueError("batch_fraction must be in (0, 1]")
        if self.snr_gamma0 < 0:
            raise ValueError("snr_gamma0 must be >= 0")
        if not 0.0 < self.snr_ramp_fraction <= 1.0:
            raise ValueError("snr_ramp_fraction must be in (0, 1]")
        M.check_mode(self.mode)


@dataclass
class ScoredNetwork:
    network: Network
    fitness: float
    metrics: dict = field(default_factory=dict)


@dataclass
class EpochStats:
    epoch: int
    best_fitness: float
    mean_fitness: float
    best_neurons: int
    best_synapses: int


@dataclass
class TrainResult:
    population: list[ScoredNetwork]
    best: ScoredNetwork
    history: list[EpochStats]
    encoder: EncoderSpec
    config: TrainConfig
    params: EonsParams


def _random_network(params: EonsParams, n_inputs: int,
                    rng: np.random.Generator) -> Network:
    """A fresh random genome: input relays, one output, random hidden/edges."""
    total = max(params.starting_nodes, n_inputs + 1)
    neurons = [Neuron(i, 0, 0, INPUT) for i in range(n_inputs)]
    neurons.append(Neuron(n_inputs, int(rng.integers(0, THRESHOLD_MAX + 1)),
                          int(rng.integers(0, DELAY_MAX + 1)), OUTPUT))
    for i in range(n_inputs + 1, total):
        neurons.append(Neuron(i, int(rng.integers(0, THRESHOLD_MAX + 1)),
                              int(rng.integers(0, DELAY_MAX + 1)), HIDDEN))
    n_edges = min(params.starting_edges, total * total, MAX_SYNAPSES)
    pairs = rng.choice(total * total, size=n_edges, replace=False)
    weights = rng.integers(WEIGHT_MIN, WEIGHT_MAX + 1, size=n_edges)
    synapses = [Synapse(int(p // total), int(p % total), int(w))
                for p, w in zip(pairs, weights)]
    return Network(neurons=neurons, synapses=synapses,
                   input_order=list(range(n_inputs)), output=n_inputs)


def init_population(params: EonsParams, n_inputs: int, seed) -> list[Network]:
    """population_size random networks sharing one input/output interface."""
    rng = np.random.default_rng(seed)
    return [_random_network(params, n_inputs, rng)
            for _ in range(params.population_size)]


def tournament_select(scored: list[ScoredNetwork], params: EonsParams,
                      rng: np.random.Generator) -> ScoredNetwork:
    """Pick k distinct entrants; usually return the fittest, sometimes any."""
    n = len(scored)
    k = max(2, round(params.tournament_size_factor * n))
    k = min(k, n)
    entrants = rng.choice(n, size=k, replace=False)
    if rng.random() < params.tournament_best_net_factor:
        fits = [scored[i].fitness for i in entrants]
        pick = entrants[int(np.argmax(fits))]
    else:
        pick = entrants[int(rng.integers(k))]
    return scored[int(pick)]


def crossover(p1: Network, p2: Network,
              rng: np.random.Generator) -> Network:
    """Node-aligned uniform crossover; see the module docstring."""
    if p1.input_order != p2.input_order or p1.output != p2.output:
        raise ValueError("parents have different input/output interfaces")
    interface = set(p1.input_order) | {p1.output}

    chosen: dict[int, Neuron] = {}
    for nid in sorted({n.id for n in p1.neurons} | {n.id for n in p2.neurons}):
        donor = p1 if rng.random() < 0.5 else p2
        if nid in interface or donor.has_neuron(nid):
            chosen[nid] = donor.neuron(nid)

    removable = [nid for nid in chosen if nid not in interface]
    while len(chosen) > MAX_NEURONS:
        victim = removable.pop(int(rng.integers(len(removable))))
        del chosen[victim]

    w1 = {(s.pre, s.post): s.weight for s in p1.synapses}
    w2 = {(s.pre, s.post): s.weight for s in p2.synapses}
    synapses = []
    for pair in sorted(set(w1) | set(w2)):
        donor = w1 if rng.random() < 0.5 else w2
        if pair in donor and pair[0] in chosen and pair[1] in chosen:
            synapses.append(Synapse(pair[0], pair[1], donor[pair]))
    while len(synapses) > MAX_SYNAPSES:
        synapses.pop(int(rng.integers(len(synapses))))

    return Network(neurons=list(chosen.values()), synapses=synapses,
                   input_order=list(p1.input_order), output=p1.output)


_CATEGORIES = ("add_node", "delete_node", "add_edge", "delete_edge",
               "node_params", "edge_params")


def _category_probs(params: EonsParams) -> np.ndarray | None:
    w = np.array([params.add_node_rate, params.delete_node_rate,
                  params.add_edge_rate, params.delete_edge_rate,
                  params.node_params_rate, params.edge_params_rate], float)
    total = w.sum()
    return w / total if total > 0 else None


def _weighted_key(weights: dict, rng: np.random.Generator) -> str | None:
    keys = sorted(k for k, v in weights.items() if v > 0)
    if not keys:
        return None
    p = np.array([weights[k] for k in keys], float)
    return keys[int(rng.choice(len(keys), p=p / p.sum()))]


def mutate(net: Network, params: EonsParams,
           rng: np.random.Generator) -> Network:
    """Apply num_mutations random structural/parameter edits.

    Each attempt draws a category from the normalized *_rate weights;
    draws that cannot apply (delete from an empty hidden set, add past a
    cap, no free synapse slot) are redrawn a bounded number of times and
    then skipped.  Parameter edits resample uniformly within the hardware
    range.  The result is always a valid network.
    """
    neurons: dict[int, Neuron] = {n.id: n for n in net.neurons}
    weights: dict[tuple[int, int], int] = {
        (s.pre, s.post): s.weight for s in net.synapses}
    probs = _category_probs(params)

    def rand_threshold():
        return int(rng.integers(0, THRESHOLD_MAX + 1))

    def rand_delay():
        return int(rng.integers(0, DELAY_MAX + 1))

    def rand_weight():
        return int(rng.integers(WEIGHT_MIN, WEIGHT_MAX + 1))

    def try_once(cat: str) -> bool:
        if cat == "add_node":
            if len(neurons) >= MAX_NEURONS:
                return False
            nid = next(i for i in range(MAX_NEURONS) if i not in neurons)
            neurons[nid] = Neuron(nid, rand_threshold(), rand_delay(), HIDDEN)
            return True
        if cat == "delete_node":
            hidden = sorted(nid for nid, n in neurons.items()
                            if n.kind == HIDDEN)
            if not hidden:
                return False
            victim = hidden[int(rng.integers(len(hidden)))]
            del neurons[victim]
            for pair in [p for p in weights if victim in p]:
                del weights[pair]
            return True
        if cat == "add_edge":
            ids = sorted(neurons)
            if len(weights) >= min(MAX_SYNAPSES, len(ids) * len(ids)):
                return False
            for _ in range(_EDGE_SAMPLE_TRIES):
                pair = (ids[int(rng.integers(len(ids)))],
                        ids[int(rng.integers(len(ids)))])
                if pair not in weights:
                    weights[pair] = rand_weight()
                    return True
            return False
        if cat == "delete_edge":
            if not weights:
                return False
            pairs = sorted(weights)
            del weights[pairs[int(rng.integers(len(pairs)))]]
            return True
        if cat == "node_params":
            candidates = sorted(nid for nid, n in neurons.items()
                                if n.kind != INPUT)
            fld = _weighted_key(params.node_param_weights, rng)
            if not candidates or fld is None:
                return False
            nid = candidates[int(rng.integers(len(candidates)))]
            n = neurons[nid]
            if fld == "threshold":
                neurons[nid] = Neuron(nid, rand_threshold(), n.axon_delay, n.kind)
            elif fld == "delay":
                neurons[nid] = Neuron(nid, n.threshold, rand_delay(), n.kind)
            else:
                return False
            return True
        if cat == "edge_params":
            if not weights:
                return False
            fld = _weighted_key(params.edge_param_weights, rng)
            if fld is None:
                return False
            pairs = sorted(weights)
            pair = pairs[int(rng.integers(len(pairs)))]
            if fld == "weight":
                weights[pair] = rand_weight()
            elif fld == "delay":
                # synapse timing lives on the presynaptic neuron's axon
                pre = neurons[pair[0]]
                neurons[pair[0]] = Neuron(pre.id, pre.threshold, rand_delay(),
                                          pre.kind)
            else:
                return False
            return True
        return False

    if probs is not None:
        for _ in range(params.num_mutations):
            for _ in range(_MUTATION_RETRIES):
                cat = _CATEGORIES[int(rng.choice(len(_CATEGORIES), p=probs))]
                if try_once(cat):
                    break

    return Network(neurons=list(neurons.values()),
                   synapses=[Synapse(a, b, w)
                             for (a, b), w in weights.items()],
                   input_order=list(net.input_order), output=net.output)


def next_generation(scored: list[ScoredNetwork], params: EonsParams,
                    rng: np.random.Generator) -> list[Network]:
    """Elites + fresh randoms + tournament-bred children; size is preserved."""
    if not scored:
        raise ValueError("cannot breed from an empty population")
    pop_size = len(scored)
    order = sorted(range(pop_size),
                   key=lambda i: (-scored[i].fitness, i))
    out = [scored[i].network for i in order[:params.num_best]]

    n_inputs = len(scored[0].network.input_order)
    for _ in range(int(params.random_factor * pop_size)):
        out.append(_random_network(params, n_inputs, rng))

    while len(out) < pop_size:
        parent = tournament_select(scored, params, rng)
        if rng.random() < params.crossover_rate:
            mate = tournament_select(scored, params, rng)
            child = crossover(parent.network, mate.network, rng)
        else:
            child = parent.network
        if rng.random() < params.mutation_rate:
            child = mutate(child, params, rng)
        out.append(child)
    return out[:pop_size]


def sample_batch(dataset, epoch: int, total_epochs: int, cfg: TrainConfig,
                 rng: np.random.Generator) -> list[Run]:
    """Draw the epoch's batch, biased toward high-SNR runs early on.

    Source runs are weighted by (snr / max snr) ** gamma(epoch) with
    gamma decaying linearly to 0 at snr_ramp_fraction of the epochs;
    background runs carry the mean source weight.  gamma = 0 means
    uniform sampling.
    """
    runs = list(dataset.runs) if hasattr(dataset, "runs") else list(dataset)
    if not runs:
        raise ValueError("dataset is empty")
    k = math.ceil(cfg.batch_fraction * len(runs))
    src_snrs = [r.snr for r in runs if r.snr is not None]
    weights = np.ones(len(runs))
    if src_snrs and max(src_snrs) > 0:
        ramp = cfg.snr_ramp_fraction * total_epochs
        gamma = cfg.snr_gamma0 * max(0.0, 1.0 - epoch / ramp) if ramp > 0 else 0.0
        max_snr = max(src_snrs)
        src_weights = []
        for i, run in enumerate(runs):
            if run.snr is not None:
                weights[i] = (run.snr / max_snr) ** gamma
                src_weights.append(weights[i])
        mean_w = float(np.mean(src_weights))
        for i, run in enumerate(runs):
            if run.snr is None:
                weights[i] = mean_w
    idx = rng.choice(len(runs), size=k, replace=False, p=weights / weights.sum())
    return [runs[int(i)] for i in idx]


_TRAIN_CFG = ClassifierConfig(theta=0, window=0)


def _score_one(net: Network, batch, labels, encoder: EncoderSpec,
               cfg: TrainConfig, encoded, bg_hours: float) -> ScoredNetwork:
    compiled = compile_network(net)
    traces = [classify_run(compiled, encoder, run, _TRAIN_CFG, encoded=enc)
              for run, enc in zip(batch, encoded)]
    cm = M.confusion(traces, labels, cfg.mode)
    if cfg.fitness == M.FITNESS_MCC:
        fit = M.mcc(cm)
        mets = {"mcc": fit}
    else:
        f1v = M.f1(cm)
        tpr0 = 0.0
        if bg_hours > 0:
            roc = M.roc_sweep(traces, labels, cfg.mode, bg_hours, window=0)
            tpr0 = M.tpr_at_far(roc, 0.0)
        fit = f1v + tpr0 * tpr0
        mets = {"f1": f1v, "tpr_at_far0": tpr0}
    return ScoredNetwork(network=net, fitness=fit, metrics=mets)


def evaluate_population(population: list[Network], batch, encoder: EncoderSpec,
                        cfg: TrainConfig, cache: dict | None = None,
                        jobs: int = 1) -> list[ScoredNetwork]:
    """Score every network on the batch; deterministic and RNG-free."""
    cache = cache if cache is not None else {}
    encoded = []
    for run in batch:
        key = id(run)
        if key not in cache:
            cache[key] = encode_run(run.observations, encoder)
        encoded.append(cache[key])
    labels = [run.labels for run in batch]
    bg_hours = M.background_hours(batch)
    if jobs > 1 and len(population) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(
                lambda net: _score_one(net, batch, labels, encoder, cfg,
                                       encoded, bg_hours), population))
    return [_score_one(net, batch, labels, encoder, cfg, encoded, bg_hours)
            for net in population]


def train(dataset, params: EonsParams, cfg: TrainConfig,
          encoder: EncoderSpec | None = None, jobs: int = 1,
          on_epoch=None) -> TrainResult:
    """Run the full generational loop and return the scored final population.

    Fitness during training uses theta = 0 and no rolling window.  The
    optional on_epoch(epoch, scored, stats) callback observes each epoch
    (checkpointing hooks in here); returning a truthy value stops
    training after that epoch.  Deterministic for a given seed.
    """
    runs = list(dataset.runs) if hasattr(dataset, "runs") else list(dataset)
    if not runs:
        raise ValueError("dataset is empty")
    seen = {int(v) for run in runs for v in np.unique(run.labels)}
    if seen != {0, 1}:
        raise ValueError("training data must contain both classes")
    if encoder is None:
        ranges = dataset.ranges if hasattr(dataset, "ranges") else None
        if ranges is None:
            raise ValueError("an EncoderSpec is required when the dataset "
                             "carries no variable ranges")
        encoder = EncoderSpec(scheme="rate", tau=cfg.tau, ranges=ranges)
    if encoder.tau != cfg.tau:
        raise ValueError(f"encoder tau {encoder.tau} != config tau {cfg.tau}")

    population = init_population(params, encoder.n_inputs, cfg.seed)
    cache: dict = {}
    history: list[EpochStats] = []
    scored: list[ScoredNetwork] = []
    for epoch in range(cfg.epochs):
        batch_rng = np.random.default_rng((cfg.seed, 1, epoch))
        batch = sample_batch(runs, epoch, cfg.epochs, cfg, batch_rng)
        scored = evaluate_population(population, batch, encoder, cfg,
                                     cache=cache, jobs=jobs)
        best = max(scored, key=lambda s: s.fitness)
        stats = EpochStats(
            epoch=epoch,
            best_fitness=best.fitness,
            mean_fitness=float(np.mean([s.fitness for s in scored])),
            best_neurons=best.network.n_neurons,
            best_synapses=best.network.n_synapses)
        history.append(stats)
        if on_epoch is not None and on_epoch(epoch, scored, stats):
            break
        if epoch < cfg.epochs - 1:
            breed_rng = np.random.default_rng((cfg.seed, 2, epoch))
            population = next_generation(scored, params, breed_rng)

    best = max(scored, key=lambda s: s.fitness)
    return TrainResult(population=scored, best=best, history=history,
                       encoder=encoder, config=cfg, params=params)
