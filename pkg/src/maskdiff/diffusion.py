"""Forward corruption and reverse transitions of the absorbing-state process.

These are the raw probabilistic transitions the scheduler-driven decoders
replace: independent per-position masking on the way forward, and the
ancestral per-position unmask/stay split on the way back. They exist for
validation of the diffusion math, not as a production decoding path.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import AlphaSchedule, DeterministicRng, SequenceState
from .errors import ConfigError, ContractViolation
from .predictor import MarginalEstimate, categorical_draw

__all__ = [
    "ReverseTransition",
    "reverse_transition",
    "forward_corrupt",
    "ancestral_sample_step",
]

_LINEAR = AlphaSchedule("linear")


@dataclass(frozen=True)
class ReverseTransition:
    """Per-position split when stepping a masked token from time t back to s.

    ``unmask_prob`` is the mass moved onto the estimated clean-token
    distribution, ``stay_mask_prob`` the mass left on the mask sentinel;
    they sum to 1 by construction.
    """

    stay_mask_prob: float
    unmask_prob: float


def reverse_transition(t: float, s: float, alpha: AlphaSchedule = _LINEAR) -> ReverseTransition:
    """Transition coefficients for a jump t -> s with 0 <= s < t <= 1."""
    if not 0.0 <= s < t <= 1.0:
        raise ContractViolation(f"reverse jump needs 0 <= s < t <= 1, got t={t}, s={s}")
    a_t = alpha(t)
    a_s = alpha(s)
    if a_t >= 1.0:
        raise ConfigError(f"degenerate schedule: alpha({t}) = 1 leaves nothing masked")
    return ReverseTransition(
        stay_mask_prob=(1.0 - a_s) / (1.0 - a_t),
        unmask_prob=(a_s - a_t) / (1.0 - a_t),
    )


def forward_corrupt(
    x0: SequenceState,
    t: float,
    rng: DeterministicRng,
    alpha: AlphaSchedule = _LINEAR,
) -> SequenceState:
    """Corrupt a clean sequence to time t: each position kept w.p. alpha_t.

    Draws are keyed by position only, so for t2 > t1 the masked set at t2 is
    a superset of the masked set at t1 under the same rng: absorption.
    """
    if not x0.is_complete():
        raise ContractViolation("forward corruption requires a fully unmasked input")
    keep = alpha(t)
    tokens = tuple(
        tok if rng.uniform("forward", p) < keep else x0.mask_id
        for p, tok in enumerate(x0.tokens)
    )
    return SequenceState(tokens=tokens, step_index=x0.step_index, mask_id=x0.mask_id)


def ancestral_sample_step(
    state: SequenceState,
    estimate: MarginalEstimate,
    t: float,
    s: float,
    rng: DeterministicRng,
    alpha: AlphaSchedule = _LINEAR,
) -> SequenceState:
    """One raw reverse step: unmasked positions copied, masked ones resampled.

    Each masked position independently unmasks with the reverse-transition
    probability; when it does, its token is drawn from the estimated row by
    inverse CDF. All draws are keyed by absolute position.
    """
    masked = state.masked_positions()
    if not estimate.covers(masked):
        raise ContractViolation("estimate does not cover the masked positions of the state")
    transition = reverse_transition(t, s, alpha)
    tokens = list(state.tokens)
    for p in masked:
        if rng.uniform("unmask", p) < transition.unmask_prob:
            tokens[p] = categorical_draw(estimate.row(p), rng.uniform("token", p))
    return SequenceState(
        tokens=tuple(tokens), step_index=state.step_index + 1, mask_id=state.mask_id
    )
