"""Shared helpers: randomized engine setups used across test modules."""

from __future__ import annotations

import random
from dataclasses import dataclass

from maskdiff import (
    BlockLayout,
    DeterministicRng,
    MarginalPredictor,
    SchedulerConfig,
    TimeSchedule,
    Vocabulary,
    make_ngram_predictor,
    make_table_predictor,
    make_uniform_schedule,
)

SIGMA_GRID = (0.0, 0.25, 0.5, 0.8, 1.0)


@dataclass
class EngineSetup:
    predictor: MarginalPredictor
    cfg: SchedulerConfig
    schedule: TimeSchedule
    vocab: Vocabulary
    length: int
    rng: DeterministicRng
    label: str

    def fresh_predictor(self) -> MarginalPredictor:
        """New predictor instance with clean NFE counters and caches."""
        return self._factory()


def sample_setup(
    rnd: random.Random,
    max_length: int = 32,
    max_steps: int | None = None,
    kinds: tuple[str, ...] = ("table", "ngram"),
) -> EngineSetup:
    """Draw one randomized decode setup from the acceptance config space."""
    kind = rnd.choice(kinds)
    length = rnd.randint(2, max_length)
    vocab_size = rnd.randint(2, 17)
    vocab = Vocabulary.simple(vocab_size)
    seed = rnd.randrange(2**32)

    if kind == "table":
        sigma = rnd.choice(SIGMA_GRID)
        target = [rnd.randrange(vocab_size) for _ in range(length)]
        factory = lambda: make_table_predictor(target, vocab, sensitivity=sigma, seed=seed)
        label = f"table(sigma={sigma})"
    else:
        corpus = [
            [rnd.randrange(vocab_size) for _ in range(rnd.randint(4, 40))]
            for _ in range(rnd.randint(1, 4))
        ]
        factory = lambda: make_ngram_predictor(corpus, vocab)
        label = "ngram"

    if max_steps is not None:
        num_steps = rnd.randint(1, min(length, max_steps))
    elif rnd.random() < 0.25:
        num_steps = rnd.randint(1, length)
    else:
        num_steps = length
    schedule = make_uniform_schedule(length, num_steps)

    block_size = rnd.choice([1, 4, length])
    sampling = rnd.choice(["argmax", "stochastic"])
    temperature = rnd.choice([1.0, 1.0, 0.7, 1.3])
    cfg = SchedulerConfig(
        kind="greedy",
        layout=BlockLayout(block_size=block_size),
        sampling=sampling,
        temperature=temperature,
    )
    setup = EngineSetup(
        predictor=factory(),
        cfg=cfg,
        schedule=schedule,
        vocab=vocab,
        length=length,
        rng=DeterministicRng(seed),
        label=f"{label} L={length} N={num_steps} B={block_size} {sampling}",
    )
    setup._factory = factory
    return setup
