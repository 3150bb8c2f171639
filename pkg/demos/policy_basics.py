#!/usr/bin/env python3
"""Walk through the policy engine: rules, verdicts, delegation, tokens,
and static conflict detection.

Run: python3 demos/policy_basics.py
"""

from smsc import (
    AttributePair,
    Condition,
    DecisionRequest,
    DelegationAssertion,
    DomainSpec,
    Effect,
    PolicyRule,
    RootGrant,
    detect_conflicts,
    evaluate_request,
    expand_delegations,
    issue_token,
    verify_token,
)


def show(title):
    print(f"\n=== {title} ===")


RULES = [
    PolicyRule(
        id="deliver-any",
        effect=Effect.PERMIT,
        subject=Condition.from_mapping({}),
        action="deliver",
        resource="email-filter",
        contexts=frozenset({"personal"}),
    ),
    PolicyRule(
        id="block-bulk",
        effect=Effect.DENY,
        subject=Condition.from_mapping({"sender-class": ["bulk"]}),
        action="deliver",
        resource="email-filter",
        contexts=frozenset({"personal"}),
    ),
    PolicyRule(
        id="admin-anything",
        effect=Effect.PERMIT,
        subject=Condition.from_mapping({"role": ["admin"]}),
        action="*",
        resource="*",
        contexts=frozenset({"personal", "corporate"}),
    ),
]


def request(attrs, action="deliver", resource="email-filter", context="personal"):
    return DecisionRequest(
        subject_attrs=frozenset(AttributePair(n, v) for n, v in attrs),
        action=action,
        resource_id=resource,
        context=context,
        tick=0,
    )


show("deny overrides")
for attrs in ([], [("sender-class", "bulk")], [("sender-class", "bulk"), ("role", "admin")]):
    decision = evaluate_request(RULES, request(attrs))
    print(f"  attrs={attrs or '{}'}: {decision.verdict.value}"
          f" (rules: {', '.join(decision.matched_rule_ids) or 'none'})")

show("context scoping")
decision = evaluate_request(RULES, request([], context="corporate"))
print(f"  same request in 'corporate': {decision.verdict.value}")
print("  no personal-context rule even gets considered there")

show("delegation with depth budgets")
admin = AttributePair("role", "admin")
roots = [RootGrant("alice", admin, depth=2)]
assertions = [
    DelegationAssertion("alice", "bob", admin, depth=5, contexts=frozenset({"personal"})),
    DelegationAssertion("bob", "carol", admin, depth=5, contexts=frozenset({"personal"})),
    DelegationAssertion("carol", "dave", admin, depth=5, contexts=frozenset({"personal"})),
]
for person in ("alice", "bob", "carol", "dave"):
    held = expand_delegations(person, frozenset(), assertions, roots, "personal")
    print(f"  {person}: {'holds role=admin' if admin in held else 'nothing'}")
print("  alice's grant has depth 2, so the chain dies at dave")

show("tokens")
token = issue_token("carol", [AttributePair("dept", "eng")], "home-idp", expiry_tick=50)
claims = verify_token(token, trusted_issuers={"home-idp"}, now=10)
print(f"  verified claims at tick 10: {sorted((c.name, c.value) for c in claims)}")
try:
    verify_token(token, trusted_issuers={"home-idp"}, now=50)
except Exception as exc:  # expiry is strict: expiry_tick must exceed now
    print(f"  at tick 50: {type(exc).__name__}: {exc}")

show("static conflict detection")
spec = DomainSpec(
    domains={"sender-class": ("bulk", "direct"), "role": ("admin", "user")},
    actions=("deliver", "flag"),
    resources=("email-filter",),
    contexts=("personal", "corporate"),
)
for report in detect_conflicts(RULES, spec):
    witness = report.witness
    print(f"  {report.permit_rule_id} vs {report.deny_rule_id}")
    print(f"    witness: attrs={sorted((p.name, p.value) for p in witness.subject_attrs)}"
          f" action={witness.action} resource={witness.resource_id}"
          f" context={witness.context}")
print("  (the witness is a concrete request both rules fire on)")
