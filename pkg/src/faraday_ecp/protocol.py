"""Entanglement concentration with one auxiliary photon and one cavity atom.

Alice holds photon ``a1`` of a partially entangled GHZ-form state
``alpha|L R..R> + beta|R L..L>`` over ``a1, b1 .. b(N-1)``. Each round she
sends ``a1`` and an auxiliary photon ``a2`` off the atom-cavity system
``c``, applies Hadamards to ``a2`` and ``c`` and measures both. Two of the
four outcomes leave a maximally entangled GHZ state; the other two leave a
new partially entangled state with coefficients ``(alpha^2, beta^2)``
(normalized), which feeds the next round.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

from .cavity import IDEAL_GATE
from .errors import BadCoefficients, ConsistencyError, MalformedInput
from .state import (
    PureState,
    SlotLayout,
    Slot,
    apply_joint_phase_gate,
    fidelity,
    hadamard,
    largest_schmidt_coefficient,
    make_state,
    measure,
    phase_flip,
    tensor,
)

COEFF_TOL = 1e-12
CERTIFY_TOL = 1e-10
INV_SQRT2 = 1 / math.sqrt(2)

SUCCESS_PLUS = "SuccessPlus"
SUCCESS_MINUS = "SuccessMinus"
FAIL_PLUS = "FailPlus"
FAIL_MINUS = "FailMinus"
LABELS = (SUCCESS_PLUS, SUCCESS_MINUS, FAIL_PLUS, FAIL_MINUS)


class DetectionModel(str, enum.Enum):
    """How detector efficiency enters a multi-round success.

    ``FINAL`` charges one factor eta_a*eta_p per successful path, as in the
    closed-form total. ``PER_ROUND`` requires both detectors to fire in every
    round reached, i.e. (eta_a*eta_p)**k for success in round k.
    """

    FINAL = "final"
    PER_ROUND = "per-round"

    def efficiency(self, k: int, eta_a: float, eta_p: float) -> float:
        eta = eta_a * eta_p
        return eta if self is DetectionModel.FINAL else eta ** k


def _check_coefficients(alpha: complex, beta: complex) -> None:
    if alpha == 0 or beta == 0:
        raise BadCoefficients("alpha and beta must both be nonzero (otherwise the input is a product state)")
    total = abs(alpha) ** 2 + abs(beta) ** 2
    if abs(total - 1) > COEFF_TOL:
        raise BadCoefficients(f"|alpha|^2 + |beta|^2 = {total!r}, expected 1")


@dataclass(frozen=True)
class ProtocolConfig:
    alpha: complex
    beta: complex
    n_photons: int = 2
    max_rounds: int = 5
    eta_a: float = 0.8
    eta_p: float = 0.8

    def __post_init__(self):
        _check_coefficients(self.alpha, self.beta)
        if int(self.n_photons) != self.n_photons or self.n_photons < 2:
            raise BadCoefficients(f"n_photons must be an integer >= 2, got {self.n_photons}")
        if int(self.max_rounds) != self.max_rounds or self.max_rounds < 1:
            raise BadCoefficients(f"max_rounds must be an integer >= 1, got {self.max_rounds}")
        for name in ("eta_a", "eta_p"):
            eta = getattr(self, name)
            if not 0 <= eta <= 1:
                raise BadCoefficients(f"{name} must lie in [0, 1], got {eta}")

    @classmethod
    def from_alpha2(cls, alpha2: float, **kwargs) -> "ProtocolConfig":
        """Real coefficients with alpha**2 = alpha2 and beta = sqrt(1 - alpha2)."""
        if not 0 < alpha2 < 1:
            raise BadCoefficients(f"alpha2 must lie strictly between 0 and 1, got {alpha2}")
        return cls(alpha=math.sqrt(alpha2), beta=math.sqrt(1 - alpha2), **kwargs)

    @property
    def coefficients(self) -> "RoundCoefficients":
        return RoundCoefficients(self.alpha, self.beta, 1)


@dataclass(frozen=True)
class RoundCoefficients:
    alpha_k: complex
    beta_k: complex
    round_index: int = 1

    def __post_init__(self):
        total = abs(self.alpha_k) ** 2 + abs(self.beta_k) ** 2
        if abs(total - 1) > COEFF_TOL:
            raise BadCoefficients(f"|alpha_k|^2 + |beta_k|^2 = {total!r}, expected 1")
        if self.round_index < 1:
            raise BadCoefficients(f"round_index must be >= 1, got {self.round_index}")

    @property
    def success_probability(self) -> float:
        """Conditional probability that this round heralds success."""
        return 2 * abs(self.alpha_k * self.beta_k) ** 2


def coefficient_recurrence(c: RoundCoefficients) -> RoundCoefficients:
    """Coefficients of the state left behind by a failed round."""
    a2, b2 = c.alpha_k ** 2, c.beta_k ** 2
    norm = math.sqrt(abs(a2) ** 2 + abs(b2) ** 2)
    return RoundCoefficients(a2 / norm, b2 / norm, c.round_index + 1)


def coefficients_for_round(k: int, alpha: complex, beta: complex) -> RoundCoefficients:
    """Normalized (alpha^(2^(k-1)), beta^(2^(k-1))), computed without underflow."""
    if k < 1:
        raise BadCoefficients(f"round index must be >= 1, got {k}")
    norm = math.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
    c = RoundCoefficients(alpha / norm, beta / norm, 1)
    for _ in range(k - 1):
        c = coefficient_recurrence(c)
    return c


def entangled_layout(n_photons: int) -> SlotLayout:
    return SlotLayout(tuple(Slot(n, "photon", "circular") for n in ["a1"] + [f"b{i}" for i in range(1, n_photons)]))


def build_initial_state(alpha: complex, beta: complex, n_photons: int = 2) -> PureState:
    """``alpha|L>_a1|R..R>_b + beta|R>_a1|L..L>_b``."""
    _check_coefficients(alpha, beta)
    if n_photons < 2:
        raise BadCoefficients(f"n_photons must be >= 2, got {n_photons}")
    rest = n_photons - 1
    return make_state(
        entangled_layout(n_photons),
        [(("L",) + ("R",) * rest, alpha), (("R",) + ("L",) * rest, beta)],
    )


def ghz_state(n_photons: int, sign: int = 1) -> PureState:
    return build_initial_state(INV_SQRT2, sign * INV_SQRT2, n_photons)


def build_auxiliary_photon(k: int, alpha: complex, beta: complex) -> PureState:
    """Round-k auxiliary photon ``a2``, proportional to alpha^(2^(k-1))|L> + beta^(2^(k-1))|R>."""
    c = coefficients_for_round(k, alpha, beta)
    return make_state([Slot("a2", "photon", "circular")], [(("L",), c.alpha_k), (("R",), c.beta_k)])


def _ghz_coefficients(state: PureState) -> tuple[complex, complex]:
    """(amp of |L R..R>, amp of |R L..L>) of a GHZ-form state, else MalformedInput."""
    layout = state.layout
    if not layout.names or layout.names[0] != "a1":
        raise MalformedInput(f"entangled state must start with Alice's slot 'a1', got {layout.names}")
    if any(s.role != "photon" or s.basis != "circular" for s in layout):
        raise MalformedInput("entangled state must hold circularly polarized photons only")
    rest = len(layout) - 1
    up = ("L",) + ("R",) * rest
    down = ("R",) + ("L",) * rest
    if rest < 1 or set(state.terms) != {up, down}:
        raise MalformedInput(f"expected exactly the two GHZ-form terms {up} and {down}, got {sorted(state.terms)}")
    return state.terms[up], state.terms[down]


def atom_state() -> PureState:
    return make_state([Slot("c", "atom")], [(("gL",), 1), (("gR",), 1)])


def evolve_round(entangled: PureState, aux: PureState, gate=IDEAL_GATE) -> PureState:
    """Pre-measurement state: a1 then a2 reflected off the cavity, then H on c and a2."""
    full = tensor(entangled, aux, atom_state())
    full = apply_joint_phase_gate(full, ["a1", "c"], gate)
    full = apply_joint_phase_gate(full, ["a2", "c"], gate)
    full = hadamard(full, "c")
    return hadamard(full, "a2")


def _targets(c: RoundCoefficients, n_photons: int) -> dict[str, PureState]:
    nxt = coefficient_recurrence(c)
    return {
        SUCCESS_PLUS: ghz_state(n_photons, +1),
        SUCCESS_MINUS: ghz_state(n_photons, -1),
        FAIL_PLUS: build_initial_state(nxt.alpha_k, nxt.beta_k, n_photons),
        FAIL_MINUS: build_initial_state(nxt.alpha_k, -nxt.beta_k, n_photons),
    }


@lru_cache(maxsize=None)
def detector_labels() -> dict[tuple[str, str], str]:
    """Map (a2 outcome, atom outcome) to the branch label.

    Learned once by running a round on a generic, strongly unbalanced input
    where all four candidate post-states are distinct, and classifying each
    branch by fidelity. At alpha = beta the success and failure post-states
    coincide, so the label cannot be read off the state alone there.
    """
    probe = RoundCoefficients(math.cos(0.3), math.sin(0.3), 1)
    entangled = build_initial_state(probe.alpha_k, probe.beta_k, 2)
    aux = build_auxiliary_photon(1, probe.alpha_k, probe.beta_k)
    targets = _targets(probe, 2)
    mapping = {}
    for branch in measure(evolve_round(entangled, aux), ["a2", "c"]):
        scores = {label: fidelity(branch.collapsed, t) for label, t in targets.items()}
        best = max(scores, key=scores.get)
        if scores[best] < 1 - CERTIFY_TOL:
            raise ConsistencyError(f"outcome {branch.outcome} matches no expected post-state: {scores}")
        mapping[branch.outcome] = best
    if sorted(mapping.values()) != sorted(LABELS):
        raise ConsistencyError(f"detector outcomes do not map one-to-one onto branch labels: {mapping}")
    return mapping


@dataclass(frozen=True)
class RoundOutcome:
    label: str
    detector_outcome: tuple[str, str]
    probability: float
    post_state: PureState
    corrected: bool

    @property
    def success(self) -> bool:
        return self.label in (SUCCESS_PLUS, SUCCESS_MINUS)


def run_round(
    entangled: PureState,
    aux: PureState,
    coeffs: RoundCoefficients | None = None,
) -> list[RoundOutcome]:
    """Simulate one concentration round exactly.

    Returns the outcomes in label order (``LABELS``) with probabilities
    conditional on reaching the round. '-' branches are phase-flipped on
    ``a1`` so every returned post-state is the '+' form. Outcomes whose
    amplitude fell below the pruning threshold are omitted.
    """
    alpha_k, beta_k = _ghz_coefficients(entangled)
    if coeffs is None:
        coeffs = RoundCoefficients(alpha_k, beta_k, 1)
    n = len(entangled.layout)
    if fidelity(entangled, build_initial_state(coeffs.alpha_k, coeffs.beta_k, n)) < 1 - CERTIFY_TOL:
        raise MalformedInput("entangled state does not match the supplied round coefficients")
    if aux.layout.names != ("a2",):
        raise MalformedInput(f"auxiliary photon must occupy the single slot 'a2', got {aux.layout.names}")
    expected_aux = make_state(aux.layout, [(("L",), coeffs.alpha_k), (("R",), coeffs.beta_k)])
    if aux.layout.basis_of("a2") != "circular" or fidelity(aux, expected_aux) < 1 - CERTIFY_TOL:
        raise MalformedInput("auxiliary photon must be alpha_k|L> + beta_k|R> for this round's coefficients")

    labels = detector_labels()
    targets = _targets(coeffs, n)
    outcomes = []
    for branch in measure(evolve_round(entangled, aux), ["a2", "c"]):
        label = labels[branch.outcome]
        post = branch.collapsed
        corrected = label in (SUCCESS_MINUS, FAIL_MINUS)
        if corrected:
            post = phase_flip(post, "a1")
        plus = SUCCESS_PLUS if label in (SUCCESS_PLUS, SUCCESS_MINUS) else FAIL_PLUS
        if fidelity(post, targets[plus]) < 1 - CERTIFY_TOL:
            raise ConsistencyError(f"{label} branch post-state does not match its target form")
        outcomes.append(RoundOutcome(label, branch.outcome, branch.probability, post, corrected))
    outcomes.sort(key=lambda o: LABELS.index(o.label))
    return outcomes


def analytic_round_probability(k: int, alpha: complex, beta: complex) -> float:
    """Unconditional probability that the first success happens in round k (ideal detectors).

    P_1 = 2|ab|^2 and P_k = 2|ab|^(2^k) / prod_{j=2..k} (|a|^(2^j) + |b|^(2^j)).

    Raising |ab|^2 to the 2^(k-1) directly amplifies rounding in the inputs by
    the same factor, so the product is evaluated through the equivalent
    normalized weights w_j = |a|^(2^j) / (|a|^(2^j) + |b|^(2^j)):
    P_k = 2 w_k (1 - w_k) * prod_{j<k} (w_j^2 + (1 - w_j)^2).
    """
    if k < 1:
        raise BadCoefficients(f"round index must be >= 1, got {k}")
    a2, b2 = abs(alpha) ** 2, abs(beta) ** 2
    total = a2 + b2
    w, v = a2 / total, b2 / total
    p = 1.0
    for _ in range(k - 1):
        d = w * w + v * v
        p *= d
        w, v = w * w / d, v * v / d
    return p * 2 * w * v


def peng_success_probability(alpha: complex, beta: complex, n_photons: int, eta_a: float, eta_p: float) -> float:
    """Success probability of the two-copy rival protocol: every one of the N
    photons and the atom must be detected."""
    if n_photons < 2:
        raise BadCoefficients(f"n_photons must be >= 2, got {n_photons}")
    return eta_p ** n_photons * eta_a * 2 * abs(alpha * beta) ** 2


@dataclass(frozen=True)
class RoundSummary:
    k: int
    p_unconditional: float
    p_conditional: float
    coefficients: RoundCoefficients
    p_detected: float

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "p": self.p_unconditional,
            "p_conditional": self.p_conditional,
            "p_detected": self.p_detected,
            "alpha_k": _complex_json(self.coefficients.alpha_k),
            "beta_k": _complex_json(self.coefficients.beta_k),
        }


def _complex_json(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


@dataclass(frozen=True)
class ProtocolReport:
    per_round: list[RoundSummary]
    total_success: float
    rival_success: float
    detection_model: DetectionModel
    config: ProtocolConfig = field(repr=False)

    def to_dict(self) -> dict:
        c = self.config
        return {
            "schema_version": 1,
            "kind": "protocol_report",
            "config": {
                "alpha": _complex_json(c.alpha),
                "beta": _complex_json(c.beta),
                "n_photons": c.n_photons,
                "max_rounds": c.max_rounds,
                "eta_a": c.eta_a,
                "eta_p": c.eta_p,
            },
            "detection_model": self.detection_model.value,
            "per_round": [r.to_dict() for r in self.per_round],
            "total_success": self.total_success,
            "rival_success": self.rival_success,
        }


def _report(config: ProtocolConfig, model: DetectionModel, rows: list[tuple[int, float, float, RoundCoefficients]]) -> ProtocolReport:
    per_round = []
    for k, p, cond, coeffs in rows:
        per_round.append(RoundSummary(k, p, cond, coeffs, p * model.efficiency(k, config.eta_a, config.eta_p)))
    total = min(1.0, sum(r.p_detected for r in per_round))
    rival = peng_success_probability(config.alpha, config.beta, config.n_photons, config.eta_a, config.eta_p)
    return ProtocolReport(per_round, total, rival, model, config)


def total_success_probability(config: ProtocolConfig, detection_model: DetectionModel | str = DetectionModel.FINAL) -> ProtocolReport:
    """Closed-form report over rounds 1..K."""
    model = DetectionModel(detection_model)
    rows = []
    for k in range(1, config.max_rounds + 1):
        coeffs = coefficients_for_round(k, config.alpha, config.beta)
        rows.append((k, analytic_round_probability(k, config.alpha, config.beta), coeffs.success_probability, coeffs))
    return _report(config, model, rows)


@dataclass(frozen=True)
class ExactRun:
    report: ProtocolReport
    rounds: list[list[RoundOutcome]]
    # the state carried into each round; rounds[k-1] was run on inputs[k-1]
    inputs: list[PureState]


def run_protocol_exact(
    config: ProtocolConfig,
    detection_model: DetectionModel | str = DetectionModel.FINAL,
    check: bool = True,
) -> ExactRun:
    """Chain exact rounds along the failure branch.

    With ``check`` (default) each round's unconditional success probability
    is cross-checked against :func:`analytic_round_probability` to 1e-10 and
    every success post-state is certified maximally entangled; a mismatch
    raises :class:`ConsistencyError`.
    """
    model = DetectionModel(detection_model)
    state = build_initial_state(config.alpha, config.beta, config.n_photons)
    coeffs = config.coefficients
    reach = 1.0
    rows, rounds, inputs = [], [], []
    for k in range(1, config.max_rounds + 1):
        if len(state.terms) < 2:
            # failure branch has decayed into a product state below the pruning floor
            rows.append((k, 0.0, 0.0, coeffs))
            continue
        aux = build_auxiliary_photon(k, config.alpha, config.beta)
        outcomes = run_round(state, aux, coeffs)
        inputs.append(state)
        rounds.append(outcomes)
        cond = sum(o.probability for o in outcomes if o.success)
        p_k = reach * cond
        rows.append((k, p_k, cond, coeffs))
        if check:
            expected = analytic_round_probability(k, config.alpha, config.beta)
            if abs(p_k - expected) > CERTIFY_TOL:
                raise ConsistencyError(f"round {k}: simulated P_k = {p_k!r}, closed form {expected!r}")
            for o in outcomes:
                if o.success:
                    s = largest_schmidt_coefficient(o.post_state, {"a1"})
                    if abs(s - INV_SQRT2) > CERTIFY_TOL:
                        raise ConsistencyError(f"round {k} {o.label}: largest Schmidt coefficient {s!r}")
        reach *= sum(o.probability for o in outcomes if not o.success)
        fail = next(o for o in outcomes if o.label in (FAIL_PLUS, FAIL_MINUS))
        state = fail.post_state
        coeffs = coefficient_recurrence(coeffs)
    return ExactRun(_report(config, model, rows), rounds, inputs)


def rival_crossover(config: ProtocolConfig, alphas=None, n_max: int = 200) -> int | None:
    """Smallest N such that this protocol (at config.max_rounds) beats the rival
    for every alpha in ``alphas`` and every photon count from N up to ``n_max``.

    The rival decays monotonically in N while ours is N-independent, so the
    first N that wins at all alphas wins for all larger N too.
    """
    if alphas is None:
        alphas = [i / 100 for i in range(11, 90)]
    ours = []
    for a in alphas:
        cfg = ProtocolConfig.from_alpha2(a * a, n_photons=2, max_rounds=config.max_rounds,
                                         eta_a=config.eta_a, eta_p=config.eta_p)
        ours.append((cfg, total_success_probability(cfg).total_success))
    for n in range(2, n_max + 1):
        if all(p > peng_success_probability(c.alpha, c.beta, n, c.eta_a, c.eta_p) for c, p in ours):
            return n
    return None
