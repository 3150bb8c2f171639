"""Policy store and update governance.

Cells change their security configuration only through signed
``UpdatePackage`` objects, sequence-numbered per origin.  The store
applies them exactly once and in order: stale sequence numbers are
duplicates, gaps are buffered until the missing package arrives.

Before a rule change lands it is assessed against the cell's pinned
regression cases.  A package that would flip a protected case is
rejected outright; its sequence number is still consumed so the origin
stream keeps moving.

``detect_conflicts`` is the static companion check: given finite value
domains it decides, exactly, whether two opposite-effect rules can fire
on the same request, and produces a concrete witness request when so.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

from .errors import BadSignature, MalformedUpdate, UnknownAttributeDomain
from .policy import (
    AttributePair,
    Decision,
    DecisionRequest,
    Effect,
    PolicyRule,
    RegressionCase,
    canonical_json,
    evaluate_request,
    sign_payload,
)

log = logging.getLogger(__name__)

PENDING_CAP = 64


class UpdateKind(str, Enum):
    RULE_ADD = "RuleAdd"
    RULE_REMOVE = "RuleRemove"
    BLOCKLIST_ADD = "BlocklistAdd"
    CONFIG_SET = "ConfigSet"


@dataclass(frozen=True)
class ConfigSetting:
    key: str
    value: Any

    def to_wire(self) -> dict[str, Any]:
        return {"key": self.key, "value": self.value}


Payload = Union[PolicyRule, ConfigSetting, str]


def _payload_to_wire(kind: UpdateKind, payload: Payload) -> Any:
    if kind is UpdateKind.RULE_ADD:
        return payload.to_wire()
    if kind is UpdateKind.CONFIG_SET:
        return payload.to_wire()
    return payload


def payload_from_wire(kind: UpdateKind, data: Any) -> Payload:
    try:
        if kind is UpdateKind.RULE_ADD:
            return PolicyRule.from_wire(data)
        if kind is UpdateKind.CONFIG_SET:
            return ConfigSetting(key=data["key"], value=data["value"])
        if not isinstance(data, str):
            raise TypeError(f"expected string, got {type(data).__name__}")
        return data
    except (KeyError, TypeError, AttributeError) as exc:
        raise MalformedUpdate(f"bad {kind.value} payload: {exc}") from None


@dataclass(frozen=True)
class UpdatePackage:
    origin: str
    seq: int
    kind: UpdateKind
    payload: Payload
    contexts: frozenset[str]
    issued_tick: int
    signature: str

    def __post_init__(self) -> None:
        if self.seq < 0:
            raise MalformedUpdate(f"negative seq {self.seq} from {self.origin!r}")
        if not self.contexts:
            raise MalformedUpdate(f"update {self.origin}/{self.seq} has no contexts")
        if self.kind is UpdateKind.RULE_ADD and not isinstance(self.payload, PolicyRule):
            raise MalformedUpdate("RuleAdd payload must be a rule")
        if self.kind is UpdateKind.CONFIG_SET and not isinstance(self.payload, ConfigSetting):
            raise MalformedUpdate("ConfigSet payload must be a setting")
        if self.kind in (UpdateKind.RULE_REMOVE, UpdateKind.BLOCKLIST_ADD) and not isinstance(
            self.payload, str
        ):
            raise MalformedUpdate(f"{self.kind.value} payload must be a string")

    def body(self) -> dict[str, Any]:
        return {
            "origin": self.origin,
            "seq": self.seq,
            "kind": self.kind.value,
            "payload": _payload_to_wire(self.kind, self.payload),
            "contexts": sorted(self.contexts),
            "issuedTick": self.issued_tick,
        }

    def to_wire(self) -> dict[str, Any]:
        wire = self.body()
        wire["sig"] = self.signature
        return wire

    @classmethod
    def from_wire(cls, data: Mapping[str, Any]) -> "UpdatePackage":
        kind = UpdateKind(data["kind"])
        return cls(
            origin=data["origin"],
            seq=data["seq"],
            kind=kind,
            payload=payload_from_wire(kind, data["payload"]),
            contexts=frozenset(data["contexts"]),
            issued_tick=data["issuedTick"],
            signature=data["sig"],
        )


def make_update(
    origin: str,
    seq: int,
    kind: UpdateKind,
    payload: Payload,
    contexts: Iterable[str],
    issued_tick: int,
) -> UpdatePackage:
    """Build and sign a package; the origin id keys the signature."""
    unsigned = UpdatePackage(
        origin=origin,
        seq=seq,
        kind=kind,
        payload=payload,
        contexts=frozenset(contexts),
        issued_tick=issued_tick,
        signature="",
    )
    return replace(unsigned, signature=sign_payload(origin, unsigned.body()))


class AssessmentVerdict(str, Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"


@dataclass(frozen=True)
class ImpactAssessment:
    verdict: AssessmentVerdict
    flipped: tuple[RegressionCase, ...] = ()
    blocking: Optional[RegressionCase] = None


def _rules_after(
    rules: Mapping[str, PolicyRule], package: UpdatePackage
) -> dict[str, PolicyRule]:
    after = dict(rules)
    if package.kind is UpdateKind.RULE_ADD:
        assert isinstance(package.payload, PolicyRule)
        after[package.payload.id] = package.payload
    elif package.kind is UpdateKind.RULE_REMOVE:
        after.pop(package.payload, None)
    return after


def assess_update_impact(
    rules: Mapping[str, PolicyRule],
    package: UpdatePackage,
    regression: Sequence[RegressionCase],
) -> ImpactAssessment:
    """Replay pinned cases against the hypothetical post-update rule set.

    Only rule changes can move a decision; blocklist and config packages
    are accepted without replay.  A flip on a protected case blocks the
    package; unprotected flips are reported but do not block.
    """
    if package.kind in (UpdateKind.BLOCKLIST_ADD, UpdateKind.CONFIG_SET):
        return ImpactAssessment(AssessmentVerdict.ACCEPT)
    after = list(_rules_after(rules, package).values())
    before = list(rules.values())
    flipped: list[RegressionCase] = []
    blocking: Optional[RegressionCase] = None
    for case in regression:
        old = evaluate_request(before, case.request).verdict
        new = evaluate_request(after, case.request).verdict
        if old != new:
            flipped.append(case)
            if case.protected and blocking is None:
                blocking = case
    verdict = AssessmentVerdict.REJECT if blocking else AssessmentVerdict.ACCEPT
    return ImpactAssessment(verdict, tuple(flipped), blocking)


class ApplyStatus(str, Enum):
    APPLIED = "applied"
    DUPLICATE = "duplicate"
    BUFFERED = "buffered"
    REJECTED = "rejected"


@dataclass(frozen=True)
class ApplyReport:
    """Outcome of one ``apply_update`` call.

    ``applied``/``rejected`` list every package consumed during the call,
    including any drained from the gap buffer; ``status`` describes the
    package that was handed in.
    """

    status: ApplyStatus
    applied: tuple[UpdatePackage, ...] = ()
    rejected: tuple[UpdatePackage, ...] = ()
    detail: str = ""


class PolicyStore:
    """Versioned security state of one cell.

    ``version`` counts applied packages; duplicates, buffered packages
    and rejections leave it unchanged.  Every consumed package, rejected
    ones included, is archived so the cell can serve gap-fill requests.
    """

    def __init__(
        self,
        rules: Iterable[PolicyRule] = (),
        regression: Sequence[RegressionCase] = (),
    ):
        self.rules: dict[str, PolicyRule] = {}
        for rule in rules:
            if rule.id in self.rules:
                raise MalformedUpdate(f"duplicate seed rule id {rule.id!r}")
            self.rules[rule.id] = rule
        self.blocklist: set[tuple[str, str]] = set()
        self.config: dict[str, Any] = {}
        self.version = 0
        self.regression: tuple[RegressionCase, ...] = tuple(regression)
        self.applied_seq: dict[str, int] = {}
        self._pending: dict[str, dict[int, UpdatePackage]] = {}
        self.archive: dict[str, dict[int, UpdatePackage]] = {}

    # ingestion

    def apply_update(self, package: UpdatePackage) -> ApplyReport:
        if package.signature != sign_payload(package.origin, package.body()):
            raise BadSignature(f"bad signature on {package.origin}/{package.seq}")
        last = self.applied_seq.get(package.origin, -1)
        if package.seq <= last:
            return ApplyReport(ApplyStatus.DUPLICATE)
        if package.seq > last + 1:
            self._buffer(package)
            return ApplyReport(ApplyStatus.BUFFERED)
        applied: list[UpdatePackage] = []
        rejected: list[UpdatePackage] = []
        detail = self._consume(package, applied, rejected)
        self._drain(package.origin, applied, rejected)
        status = ApplyStatus.APPLIED if package in applied else ApplyStatus.REJECTED
        return ApplyReport(status, tuple(applied), tuple(rejected), detail)

    def _buffer(self, package: UpdatePackage) -> None:
        slot = self._pending.setdefault(package.origin, {})
        slot[package.seq] = package
        if len(slot) > PENDING_CAP:
            oldest = next(iter(slot))
            log.warning(
                "pending buffer for %s full, dropping seq %d", package.origin, oldest
            )
            del slot[oldest]

    def _consume(
        self,
        package: UpdatePackage,
        applied: list[UpdatePackage],
        rejected: list[UpdatePackage],
    ) -> str:
        """Assess and apply (or reject) the next-in-order package."""
        assessment = assess_update_impact(self.rules, package, self.regression)
        self.applied_seq[package.origin] = package.seq
        self.archive.setdefault(package.origin, {})[package.seq] = package
        if assessment.verdict is AssessmentVerdict.REJECT:
            rejected.append(package)
            case = assessment.blocking
            assert case is not None
            return (
                f"would flip protected case "
                f"{case.request.action}/{case.request.resource_id}@{case.request.context}"
            )
        self._mutate(package)
        self.version += 1
        applied.append(package)
        return ""

    def _mutate(self, package: UpdatePackage) -> None:
        if package.kind is UpdateKind.RULE_ADD:
            assert isinstance(package.payload, PolicyRule)
            self.rules[package.payload.id] = package.payload
        elif package.kind is UpdateKind.RULE_REMOVE:
            self.rules.pop(package.payload, None)
        elif package.kind is UpdateKind.BLOCKLIST_ADD:
            for context in package.contexts:
                self.blocklist.add((context, package.payload))
        elif package.kind is UpdateKind.CONFIG_SET:
            assert isinstance(package.payload, ConfigSetting)
            self.config[package.payload.key] = package.payload.value

    def _drain(
        self,
        origin: str,
        applied: list[UpdatePackage],
        rejected: list[UpdatePackage],
    ) -> None:
        slot = self._pending.get(origin)
        if not slot:
            return
        while True:
            want = self.applied_seq.get(origin, -1) + 1
            nxt = slot.pop(want, None)
            if nxt is None:
                break
            self._consume(nxt, applied, rejected)
        if not slot:
            self._pending.pop(origin, None)

    # queries

    def pending_count(self, origin: Optional[str] = None) -> int:
        if origin is not None:
            return len(self._pending.get(origin, {}))
        return sum(len(slot) for slot in self._pending.values())

    def pending_packages(self) -> list[UpdatePackage]:
        out = [p for slot in self._pending.values() for p in slot.values()]
        out.sort(key=lambda p: (p.origin, p.seq))
        return out

    def archived(self, origin: str, seq: int) -> Optional[UpdatePackage]:
        return self.archive.get(origin, {}).get(seq)

    def digest(self) -> dict[str, int]:
        """Per-origin high-water marks, the anti-entropy summary."""
        return dict(sorted(self.applied_seq.items()))

    def content_digest(self) -> str:
        """Hash of the effective security content (rules, blocklist, config).

        Sequence bookkeeping is deliberately excluded: a rejected package
        consumes its seq but must leave this digest untouched.
        """
        snapshot = {
            "rules": [self.rules[rid].to_wire() for rid in sorted(self.rules)],
            "blocklist": sorted(list(pair) for pair in self.blocklist),
            "config": self.config,
        }
        return hashlib.sha256(canonical_json(snapshot).encode("utf-8")).hexdigest()

    def context_rules(self, context: str) -> tuple[PolicyRule, ...]:
        return tuple(r for r in self.rules.values() if context in r.contexts)

    def evaluate(self, request: DecisionRequest) -> Decision:
        return evaluate_request(self.context_rules(request.context), request)

    # persistence

    def to_wire(self) -> dict[str, Any]:
        return {
            "rules": [self.rules[rid].to_wire() for rid in sorted(self.rules)],
            "blocklist": sorted(list(pair) for pair in self.blocklist),
            "config": dict(sorted(self.config.items())),
            "version": self.version,
            "regression": [c.to_wire() for c in self.regression],
            "appliedSeq": dict(sorted(self.applied_seq.items())),
            "pending": [p.to_wire() for p in self.pending_packages()],
            "archive": [
                self.archive[origin][seq].to_wire()
                for origin in sorted(self.archive)
                for seq in sorted(self.archive[origin])
            ],
        }

    @classmethod
    def from_wire(cls, data: Mapping[str, Any]) -> "PolicyStore":
        store = cls(
            rules=(PolicyRule.from_wire(r) for r in data.get("rules", [])),
            regression=tuple(
                RegressionCase.from_wire(c) for c in data.get("regression", [])
            ),
        )
        store.blocklist = {(c, e) for c, e in data.get("blocklist", [])}
        store.config = dict(data.get("config", {}))
        store.version = data.get("version", 0)
        store.applied_seq = {o: int(s) for o, s in data.get("appliedSeq", {}).items()}
        for wire in data.get("pending", []):
            pkg = UpdatePackage.from_wire(wire)
            store._pending.setdefault(pkg.origin, {})[pkg.seq] = pkg
        for wire in data.get("archive", []):
            pkg = UpdatePackage.from_wire(wire)
            store.archive.setdefault(pkg.origin, {})[pkg.seq] = pkg
        return store


# static conflict analysis


@dataclass(frozen=True)
class ConflictReport:
    permit_rule_id: str
    deny_rule_id: str
    witness: DecisionRequest

    def to_wire(self) -> dict[str, Any]:
        return {
            "permitRuleId": self.permit_rule_id,
            "denyRuleId": self.deny_rule_id,
            "witness": self.witness.to_wire(),
        }


@dataclass(frozen=True)
class DomainSpec:
    """Finite universes making conflict detection decidable."""

    domains: Mapping[str, tuple[str, ...]]
    actions: tuple[str, ...]
    resources: tuple[str, ...]
    contexts: tuple[str, ...]

    @classmethod
    def from_wire(cls, data: Mapping[str, Any]) -> "DomainSpec":
        return cls(
            domains={k: tuple(v) for k, v in data.get("domains", {}).items()},
            actions=tuple(data.get("actions", [])),
            resources=tuple(data.get("resources", [])),
            contexts=tuple(data.get("contexts", [])),
        )


def _condition_overlap(
    a: PolicyRule, b: PolicyRule, spec: DomainSpec
) -> Optional[dict[str, str]]:
    """Smallest per-attribute witness values, or None if unsatisfiable."""
    constrained = dict(a.subject.atoms)
    witness: dict[str, str] = {}
    for name, values_b in b.subject.atoms:
        allowed = values_b & constrained.pop(name) if name in constrained else values_b
        feasible = sorted(allowed & set(spec.domains[name]))
        if not feasible:
            return None
        witness[name] = feasible[0]
    for name, values_a in constrained.items():
        feasible = sorted(values_a & set(spec.domains[name]))
        if not feasible:
            return None
        witness[name] = feasible[0]
    return witness


def detect_conflicts(rules: Sequence[PolicyRule], spec: DomainSpec) -> list[ConflictReport]:
    """Exact pairwise conflict check over the declared finite universes.

    A Permit rule and a Deny rule conflict when some request within the
    universes matches both.  Matching is per-component, so satisfiability
    factors: shared context, shared action, shared resource, and a
    feasible value for every constrained attribute, independently.
    """
    for rule in rules:
        for name, _ in rule.subject.atoms:
            if name not in spec.domains:
                raise UnknownAttributeDomain(
                    f"rule {rule.id!r} constrains {name!r}, not in declared domains"
                )
    reports: list[ConflictReport] = []
    ordered = sorted(rules, key=lambda r: r.id)
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if a.effect == b.effect:
                continue
            contexts = sorted(a.contexts & b.contexts & set(spec.contexts))
            if not contexts:
                continue
            actions = [
                act for act in sorted(spec.actions)
                if a.action_matches(act) and b.action_matches(act)
            ]
            if not actions:
                continue
            resources = [
                res for res in sorted(spec.resources)
                if a.resource_matches(res) and b.resource_matches(res)
            ]
            if not resources:
                continue
            values = _condition_overlap(a, b, spec)
            if values is None:
                continue
            witness = DecisionRequest(
                subject_attrs=frozenset(
                    AttributePair(n, v) for n, v in values.items()
                ),
                action=actions[0],
                resource_id=resources[0],
                context=contexts[0],
                tick=0,
            )
            permit, deny = (a, b) if a.effect is Effect.PERMIT else (b, a)
            reports.append(ConflictReport(permit.id, deny.id, witness))
    return reports
