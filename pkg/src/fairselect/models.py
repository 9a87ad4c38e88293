"""Shipped synthetic models realizing the catalog mechanisms.

Each builder returns a :class:`~fairselect.datagen.DiscreteScm` whose
variable names match the corresponding scenario graph, so graph verdicts
and sampled data line up.  The fig3iv model is deliberately adversarial:
the unrecorded variable U pushes both the outcome and the decision hard
enough that the complete-case estimate of P(Y|X,Z) sits well away from
the truth no matter the sample size.
"""

from __future__ import annotations

from .datagen import DiscreteScm, ScmVariable, scm_variable

_CARDS = {"Z": 2, "U": 2, "X": 2, "Y": 2, "D": 2, "X1": 2, "X2": 2}


def _root(name: str, p1: float) -> ScmVariable:
    return scm_variable(name, (), _CARDS, lambda: p1)


def scm_fig3i() -> DiscreteScm:
    """Fully automated decision from X and Z; P(Y|X,Z) survives censoring."""
    return DiscreteScm.build(
        [
            _root("Z", 0.5),
            scm_variable("X", ("Z",), _CARDS, lambda z: 0.3 + 0.4 * z),
            scm_variable("Y", ("X",), _CARDS, lambda x: 0.2 + 0.6 * x),
            scm_variable("D", ("X", "Z"), _CARDS, lambda x, z: 0.15 + 0.4 * x + 0.25 * z),
        ]
    )


def scm_fig3iv() -> DiscreteScm:
    """Human decision driven by a strong unrecorded factor U.

    U raises P(Y=1) by 0.5 and P(D=1) by 0.5, so conditioning on the
    selected rows tilts the U mixture: the complete-case P(Y|X,Z) is
    biased upward by more than 0.05 on every cell (exact joint summation).
    """
    return DiscreteScm.build(
        [
            _root("Z", 0.5),
            _root("U", 0.5),
            scm_variable("X", ("Z",), _CARDS, lambda z: 0.4 + 0.2 * z),
            scm_variable("Y", ("X", "U"), _CARDS, lambda x, u: 0.15 + 0.2 * x + 0.5 * u),
            scm_variable(
                "D",
                ("X", "Z", "U"),
                _CARDS,
                lambda x, z, u: 0.1 + 0.25 * x + 0.1 * z + 0.5 * u,
            ),
        ]
    )


def scm_gap() -> DiscreteScm:
    """Population for the train/test fairness-gap experiment.

    Feature rates differ strongly by group, so score-based deletion of the
    training data is group-correlated: the lowest-scoring feature cell is
    dominated by group 0.
    """
    return DiscreteScm.build(
        [
            _root("Z", 0.5),
            scm_variable("X1", ("Z",), _CARDS, lambda z: 0.25 + 0.5 * z),
            scm_variable("X2", ("Z",), _CARDS, lambda z: 0.3 + 0.4 * z),
            scm_variable(
                "Y",
                ("X1", "X2"),
                _CARDS,
                lambda x1, x2: 0.15 + 0.35 * x1 + 0.35 * x2,
            ),
        ]
    )


_BUILDERS = {
    "fig3i": scm_fig3i,
    "fig3iv": scm_fig3iv,
    "gap": scm_gap,
}


def shipped_scm(name: str) -> DiscreteScm:
    """SCM shipped for a scenario or experiment name."""
    try:
        return _BUILDERS[name]()
    except KeyError:
        known = ", ".join(sorted(_BUILDERS))
        raise KeyError(f"no shipped model for {name!r} (known: {known})") from None


SHIPPED_MODEL_NAMES = tuple(sorted(_BUILDERS))
