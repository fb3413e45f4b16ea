"""Outer optimization loop: local gradient steps glued together by the
quantized consensus subroutine, plus the zoom policies that re-parameterize
the quantizer between steps.

One iteration is: every node takes a gradient step on its private cost,
the half-step values go through ``run_consensus`` (so all nodes land on a
common grid point), and then the shared quantizer is updated according to
the active zoom policy.  The adaptive policy zooms out (coarser, recentered)
when the common value sits in a saturated outer cell and zooms in (finer,
recentered) when it repeats inside the range; the two baseline policies
either only refine the step size on repeats or never touch it.

All estimate arithmetic is exact (``fractions.Fraction``); floats appear
only in the logged error column.
"""

from dataclasses import dataclass, field, replace
from fractions import Fraction

from .consensus import run_consensus
from .metrics import error_metric
from .quantizer import QuantizerState, saturation_half_range, zoom_in, zoom_out

_FIXED_LEVEL_WIDTHS = {
    Fraction(1, 10): 7,
    Fraction(1, 100): 10,
    Fraction(1, 1000): 14,
}


@dataclass(frozen=True)
class AdaptiveZoom:
    """Zoom-in/zoom-out policy driven by the saturating quantizer.

    ``b_pm`` is the message width charged per mass transmission in the
    idealized accounting mode; it defaults to the quantizer width (a w-bit
    quantizer has 2**w cells, and the consensus payloads are modeled as
    w-bit symbols in that mode).
    """

    quantizer_width: int = 3
    b_pm: int | None = None

    def message_width(self, k, delta):
        return self.quantizer_width if self.b_pm is None else self.b_pm


@dataclass(frozen=True)
class RefineOnly:
    """Baseline: on every repeated estimate, divide the step by c_refine.

    The basis never moves and the quantizer is unsaturated.  Accounting
    uses a step-indexed width schedule: entries are (first_k_not_covered,
    width), with ``None`` meaning "every remaining step".
    """

    c_refine: Fraction = Fraction(10)
    width_schedule: tuple = ((3, 7), (9, 10), (None, 14))

    def message_width(self, k, delta):
        for end, width in self.width_schedule:
            if end is None or k < end:
                return width
        raise ValueError("width schedule ended before step %d" % k)


@dataclass(frozen=True)
class FixedLevel:
    """Baseline: the quantizer is never re-parameterized.

    ``b_pm`` may be given explicitly; otherwise it is looked up from the
    standard level table (7/10/14 bits for steps 0.1/0.01/0.001).
    """

    b_pm: int | None = None

    def message_width(self, k, delta):
        if self.b_pm is not None:
            return self.b_pm
        try:
            return _FIXED_LEVEL_WIDTHS[delta]
        except KeyError:
            raise ValueError(
                "no standard message width for fixed level %s; set b_pm" % delta
            ) from None


@dataclass(frozen=True)
class RunRecord:
    """One row of the per-step log.

    ``delta`` and ``b_q`` are the quantizer parameters that were in force
    during this step's consensus (i.e. before any zoom event recorded in
    the same row).
    """

    k: int
    x_value: Fraction
    error: float
    delta: Fraction
    b_q: Fraction
    zoom_event: str  # none | zoom_in | zoom_out | refine
    consensus_rounds: int
    mass_transmissions: int
    bits_paper_mode: int
    bits_measured_mode: int


@dataclass
class OptimizerState:
    x: list  # per-node Fraction estimates
    q: QuantizerState
    k: int = 0
    history: list = field(default_factory=list)


def initial_state(x_init, q):
    return OptimizerState(x=list(x_init), q=q, k=0, history=[])


def gradient_step(x, s, alpha):
    """Per-node local update x_i - alpha * grad f_i(x_i), exact."""
    return [xi - alpha * c.grad(xi) for xi, c in zip(x, s.costs)]


def zoom_decide(q, x_new, x_old, policy):
    """Quantizer update after a consensus step.

    Fires only on an exact repeat (x_new == x_old).  The adaptive policy
    then recenters on x_new and either coarsens (when x_new sits at or
    beyond the saturation range that was in force) or refines; the refine
    baseline shrinks the step in place; the fixed baseline does nothing.
    Returns (updated quantizer, event string).
    """
    if x_new != x_old:
        return q, "none"
    if isinstance(policy, AdaptiveZoom):
        half = saturation_half_range(q)
        if x_new >= q.b_q + half or x_new < q.b_q - half:
            q2, event = zoom_out(q, x_new), "zoom_out"
        else:
            q2, event = zoom_in(q, x_new), "zoom_in"
        return replace(q2, nu_total=q.nu_total + 1), event
    if isinstance(policy, RefineOnly):
        return replace(q, delta=q.delta / policy.c_refine), "refine"
    if isinstance(policy, FixedLevel):
        return q, "none"
    raise TypeError("unknown zoom policy %r" % (policy,))


def step(state, g, s, alpha, policy, rng, error_fn=None):
    """Advance one full iteration in place and append its RunRecord.

    ``error_fn`` maps the post-step per-node estimates to the logged error
    (NaN when absent, e.g. in unit tests that only exercise dynamics).
    """
    pre_q = state.q
    x_half = gradient_step(state.x, s, alpha)
    # The averaging subroutine exchanges integer offsets on the (b_q, delta)
    # grid without clamping them to the quantizer's dynamic range.  Clamping
    # would collapse every out-of-range half-step to a +/- extreme, and near
    # the optimum (where individual gradient pulls stay O(1) while delta
    # shrinks) those extremes cancel into a sign vote that pins the iterate
    # wherever the votes balance — the range limit instead governs the zoom
    # decision below and the idealized per-message bit price.
    result, stats = run_consensus(x_half, replace(pre_q, width=None), g, rng)
    x_new = result[0]

    # The zoom test is a per-node comparison against each node's own
    # previous estimate; with distinct estimates (only possible before the
    # first consensus) no node-consistent repeat exists, so comparing
    # against any differing value disables the event for everyone alike.
    x_old = next((xi for xi in state.x if xi != x_new), x_new)
    new_q, event = zoom_decide(pre_q, x_new, x_old, policy)

    state.x = list(result)
    state.q = new_q
    state.k += 1

    width = policy.message_width(state.k - 1, pre_q.delta)
    n_symbols = len(stats.measured_alphabet)
    measured_width = (n_symbols - 1).bit_length() if n_symbols else 0
    error = float("nan") if error_fn is None else error_fn(state.x)
    rec = RunRecord(
        k=state.k,
        x_value=x_new,
        error=error,
        delta=pre_q.delta,
        b_q=pre_q.b_q,
        zoom_event=event,
        consensus_rounds=stats.rounds,
        mass_transmissions=stats.mass_transmissions,
        bits_paper_mode=width * stats.mass_transmissions,
        bits_measured_mode=measured_width * stats.mass_transmissions,
    )
    state.history.append(rec)
    return state, rec


def run_until(state, g, s, alpha, policy, stop, rng):
    """Iterate ``step`` until an error target or a step budget is hit.

    ``stop`` carries ``max_steps`` and/or ``target_error``; at least one
    must be set (a non-finite target_error counts as unset).  The error is
    measured against the closed-form optimum with the entry-time estimates
    as the reference spread, so this expects a fresh state (k = 0).
    """
    max_steps = stop.get("max_steps")
    target = stop.get("target_error")
    if target is not None and target != target:  # NaN guard
        target = None
    if target is not None and not (float("-inf") < target < float("inf")):
        target = None
    if max_steps is None and target is None:
        raise ValueError("stop needs max_steps or a finite target_error")

    x_init = list(state.x)
    x_star = s.global_optimum

    def error_fn(xs):
        return error_metric(xs, x_init, x_star)

    while max_steps is None or state.k < max_steps:
        _, rec = step(state, g, s, alpha, policy, rng, error_fn=error_fn)
        if target is not None and rec.error <= target:
            break
    return state.history
