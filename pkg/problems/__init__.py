"""Experiment definitions, selectable by name."""
from typing import Callable, Dict

from errors import ConfigurationError
from problems.base import ProblemSpec
from problems.manufactured import Example1Case, example1, example2, linear_heat
from problems.pme import PmeTest, pme_spec

PROBLEMS: Dict[str, Callable[..., ProblemSpec]] = {
    "example1-const-half": lambda **_: example1(Example1Case.CONST_HALF),
    "example1-quadratic": lambda **_: example1(Example1Case.QUADRATIC),
    "example1-sine-squared": lambda **_: example1(Example1Case.SINE_SQUARED),
    "example2": lambda b=10.0, order=3, **_: example2(b, order),
    "heat": lambda a=0.5, **_: linear_heat(a),
    "barenblatt": lambda m=2.0, **_: pme_spec(PmeTest.BARENBLATT, m),
    "two-box-equal": lambda **_: pme_spec(PmeTest.TWO_BOX_EQUAL),
    "two-box-unequal": lambda **_: pme_spec(PmeTest.TWO_BOX_UNEQUAL),
    "waiting-time": lambda **_: pme_spec(PmeTest.WAITING_TIME),
}


def get_problem(name: str, **params) -> ProblemSpec:
    """Build a problem by name; unknown names raise ConfigurationError."""
    try:
        factory = PROBLEMS[name]
    except KeyError:
        known = ", ".join(sorted(PROBLEMS))
        raise ConfigurationError(f"unknown problem {name!r} (known: {known})") from None
    return factory(**params)
