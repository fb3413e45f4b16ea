"""Run configuration: defaults, validation, exact-rational parsing, and a
JSON round-trip so a run can be replayed from its config file alone.

Rationals are written as strings ("3/25", "0.12", "2") and parsed exactly;
raw JSON floats are accepted but go through their shortest decimal repr, so
"0.1" means 1/10, never 0x1.999...p-4.
"""

import json
from dataclasses import dataclass, field, asdict
from fractions import Fraction


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name, message):
        self.field = field_name
        super().__init__("%s: %s" % (field_name, message))


def parse_rational(value, field_name="value"):
    """Exact rational from "num/den", decimal string, int, or float."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ConfigError(field_name, "expected a rational, got a bool")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        value = repr(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(field_name, "not a rational: %r (%s)" % (value, exc))
    raise ConfigError(field_name, "cannot parse %r as a rational" % (value,))


def _rat_str(fr):
    return str(Fraction(fr))


DEFAULT_POLICY = {"variant": "adaptive_zoom"}
DEFAULT_COSTS = {"kind": "random", "value_set": [1, 2, 3, 4, 5], "shared_x0": False}
DEFAULT_STOP = {"max_steps": 200, "target_error": 1e-5}
DEFAULT_ACCOUNTING = {"mode": "paper_faithful", "b_pm": 3}

_POLICY_VARIANTS = ("adaptive_zoom", "refine_only", "fixed_level")


@dataclass
class RunConfig:
    n: int = 20
    edge_prob: Fraction = Fraction(1, 2)
    seed: int = 1
    alpha: Fraction = Fraction(3, 25)
    delta0: Fraction = Fraction(1, 2)
    c_in: Fraction = Fraction(4, 3)
    c_out: Fraction = Fraction(2)
    b_q0: Fraction = Fraction(0)
    policy: dict = field(default_factory=lambda: dict(DEFAULT_POLICY))
    x_init_range: tuple = (Fraction(1), Fraction(5))
    x_init_grid: Fraction = Fraction(1, 100)
    cost_spec: dict = field(default_factory=lambda: dict(DEFAULT_COSTS))
    stop: dict = field(default_factory=lambda: dict(DEFAULT_STOP))
    accounting: dict = field(default_factory=lambda: dict(DEFAULT_ACCOUNTING))
    out_dir: str = ""

    def validate(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise ConfigError("n", "need an integer node count >= 2")
        if not 0 <= self.edge_prob <= 1:
            raise ConfigError("edge_prob", "must lie in [0, 1]")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed", "need a nonnegative integer")
        if self.alpha <= 0:
            raise ConfigError("alpha", "step size must be positive")
        if self.delta0 <= 0:
            raise ConfigError("delta0", "initial quantizer step must be positive")
        if self.c_in <= 1:
            raise ConfigError("c_in", "zoom-in factor must exceed 1")
        if self.c_out <= 1:
            raise ConfigError("c_out", "zoom-out factor must exceed 1")
        lo, hi = self.x_init_range
        if lo > hi:
            raise ConfigError("x_init_range", "lower bound exceeds upper bound")
        if self.x_init_grid <= 0:
            raise ConfigError("x_init_grid", "grid resolution must be positive")
        variant = self.policy.get("variant")
        if variant not in _POLICY_VARIANTS:
            raise ConfigError(
                "policy.variant", "expected one of %s, got %r" % (_POLICY_VARIANTS, variant)
            )
        if variant == "refine_only" and parse_rational(
            self.policy.get("c_refine", 10), "policy.c_refine"
        ) <= 1:
            raise ConfigError("policy.c_refine", "refine factor must exceed 1")
        kind = self.cost_spec.get("kind")
        if kind == "random":
            vs = self.cost_spec.get("value_set", [1, 2, 3, 4, 5])
            if not vs or any((not isinstance(v, int)) or v <= 0 for v in vs):
                raise ConfigError("cost_spec.value_set", "need positive integers")
        elif kind == "explicit":
            costs = self.cost_spec.get("costs")
            if not costs or len(costs) != self.n:
                raise ConfigError("cost_spec.costs", "need one (beta, x0) pair per node")
            for i, pair in enumerate(costs):
                beta = parse_rational(pair[0], "cost_spec.costs[%d].beta" % i)
                if beta <= 0:
                    raise ConfigError("cost_spec.costs[%d].beta" % i, "must be positive")
                parse_rational(pair[1], "cost_spec.costs[%d].x0" % i)
        else:
            raise ConfigError("cost_spec.kind", "expected random or explicit, got %r" % kind)
        max_steps = self.stop.get("max_steps")
        target = self.stop.get("target_error")
        if max_steps is None and target is None:
            raise ConfigError("stop", "need max_steps and/or target_error")
        if max_steps is not None and (not isinstance(max_steps, int) or max_steps < 0):
            raise ConfigError("stop.max_steps", "need a nonnegative integer")
        if target is not None and not target > 0:
            raise ConfigError("stop.target_error", "need a positive error target")
        mode = self.accounting.get("mode")
        if mode == "paper_faithful":
            b_pm = self.accounting.get("b_pm", 3)
            if not isinstance(b_pm, int) or b_pm < 1:
                raise ConfigError("accounting.b_pm", "need a positive integer width")
        elif mode != "measured":
            raise ConfigError(
                "accounting.mode", "expected paper_faithful or measured, got %r" % mode
            )
        return self

    def to_dict(self):
        d = asdict(self)
        for key in ("edge_prob", "alpha", "delta0", "c_in", "c_out", "b_q0", "x_init_grid"):
            d[key] = _rat_str(getattr(self, key))
        d["x_init_range"] = [_rat_str(v) for v in self.x_init_range]
        d["policy"] = dict(self.policy)
        if "c_refine" in d["policy"]:
            d["policy"]["c_refine"] = _rat_str(
                parse_rational(d["policy"]["c_refine"], "policy.c_refine")
            )
        d["cost_spec"] = dict(self.cost_spec)
        if "value_set" in d["cost_spec"]:
            d["cost_spec"]["value_set"] = list(d["cost_spec"]["value_set"])
        if d["cost_spec"].get("kind") == "explicit":
            d["cost_spec"]["costs"] = [
                [_rat_str(parse_rational(b, "beta")), _rat_str(parse_rational(x, "x0"))]
                for b, x in self.cost_spec["costs"]
            ]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration key")
        kwargs = {}
        for key in ("n", "seed", "out_dir"):
            if key in d:
                kwargs[key] = d[key]
        for key in ("edge_prob", "alpha", "delta0", "c_in", "c_out", "b_q0", "x_init_grid"):
            if key in d:
                kwargs[key] = parse_rational(d[key], key)
        if "x_init_range" in d:
            rng = d["x_init_range"]
            if not isinstance(rng, (list, tuple)) or len(rng) != 2:
                raise ConfigError("x_init_range", "expected [lo, hi]")
            kwargs["x_init_range"] = (
                parse_rational(rng[0], "x_init_range[0]"),
                parse_rational(rng[1], "x_init_range[1]"),
            )
        for key in ("policy", "cost_spec", "stop", "accounting"):
            if key in d:
                if not isinstance(d[key], dict):
                    raise ConfigError(key, "expected an object")
                kwargs[key] = dict(d[key])
        return cls(**kwargs).validate()

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", "not valid JSON: %s" % exc)
        if not isinstance(d, dict):
            raise ConfigError("<file>", "top level must be an object")
        return cls.from_dict(d)
