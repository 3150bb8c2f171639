"""Bundled scenario corpus.

Each entry is a small federation story: a handful of cells, a topology,
a script of outside stimuli, and the assertions that make the story
checkable.  ``write_corpus`` materialises them as JSON files so they can
be run from the command line; ``build_scenario`` parses them in-process.

The spam-filter pair of cells is the canonical story: a user flags a
nuisance sender on their mail filter, the resulting blocklist update
travels to the phone filter, and the same sender's call is refused.  The
negative variants shut off one precondition each (no network path, no
shared context) and assert the block does not travel.
"""

from __future__ import annotations

import json
import os
from typing import Any

from .policy import PolicyDocument
from .sim import ScenarioSpec, parse_scenario

OWNER_TOKEN = {
    "subject": "alice",
    "claims": {"role": ["owner"]},
    "issuer": "home-idp",
    "expiryTick": 100,
}

_OWNER_RULE = {
    "id": "owner-mgmt",
    "effect": "Permit",
    "subject": {"role": ["owner"]},
    "action": "mgmt:flag-spam",
    "resource": "*",
}


def _policy_email_personal() -> dict[str, Any]:
    return {
        "rules": [
            {"id": "deliver-any", "effect": "Permit", "subject": {},
             "action": "deliver", "resource": "email-filter",
             "contexts": ["personal"]},
            {"id": "owner-flag", "effect": "Permit",
             "subject": {"role": ["owner"]}, "action": "flag",
             "resource": "email-filter", "contexts": ["personal"]},
            dict(_OWNER_RULE, contexts=["personal"]),
        ],
        "delegations": [],
        "roots": [],
        "trustedIssuers": ["home-idp"],
        "regression": [
            {"request": {"subjectAttrs": {}, "action": "deliver",
                         "resourceId": "email-filter", "context": "personal",
                         "tick": 0},
             "expected": "Permit", "protected": True},
        ],
    }


def _policy_call(context: str) -> dict[str, Any]:
    return {
        "rules": [
            {"id": "ring-any", "effect": "Permit", "subject": {},
             "action": "ring", "resource": "call-filter", "contexts": [context]},
            {"id": "text-any", "effect": "Permit", "subject": {},
             "action": "text", "resource": "call-filter", "contexts": [context]},
        ],
        "delegations": [],
        "roots": [],
        "trustedIssuers": [],
        "regression": [
            {"request": {"subjectAttrs": {}, "action": "ring",
                         "resourceId": "call-filter", "context": context,
                         "tick": 0},
             "expected": "Permit", "protected": True},
        ],
    }


def _policy_phone_dual() -> dict[str, Any]:
    return {
        "rules": [
            {"id": "ring-any", "effect": "Permit", "subject": {},
             "action": "ring", "resource": "call-filter",
             "contexts": ["corporate", "personal"]},
            {"id": "text-personal", "effect": "Permit", "subject": {},
             "action": "text", "resource": "call-filter",
             "contexts": ["personal"]},
            {"id": "text-corporate", "effect": "Permit", "subject": {},
             "action": "text", "resource": "call-filter",
             "contexts": ["corporate"]},
            dict(_OWNER_RULE, contexts=["personal"]),
        ],
        "delegations": [],
        "roots": [],
        "trustedIssuers": ["home-idp"],
        "regression": [
            {"request": {"subjectAttrs": {}, "action": "text",
                         "resourceId": "call-filter", "context": "personal",
                         "tick": 0},
             "expected": "Permit", "protected": True},
            # corporate texting is expected to tighten over time, so this
            # pin may flip; it is deliberately unprotected
            {"request": {"subjectAttrs": {}, "action": "text",
                         "resourceId": "call-filter", "context": "corporate",
                         "tick": 0},
             "expected": "Permit", "protected": False},
        ],
    }


def _policy_registry() -> dict[str, Any]:
    return {
        "rules": [
            {"id": "lookup-any", "effect": "Permit", "subject": {},
             "action": "lookup", "resource": "registry", "contexts": ["site"]},
        ],
        "delegations": [],
        "roots": [],
        "trustedIssuers": [],
        "regression": [],
    }


POLICY_FILES: dict[str, dict[str, Any]] = {
    "policies/email-personal.json": _policy_email_personal(),
    "policies/call-personal.json": _policy_call("personal"),
    "policies/call-work.json": _policy_call("work"),
    "policies/phone-dual.json": _policy_phone_dual(),
    "policies/registry-site.json": _policy_registry(),
}


def _spamfilter_cells() -> list[dict[str, Any]]:
    return [
        {"cellId": "email-cell",
         "profile": {"contexts": ["personal"]},
         "resourceKind": "email-filter",
         "policyFile": "policies/email-personal.json"},
        {"cellId": "call-cell",
         "profile": {"contexts": ["personal"]},
         "resourceKind": "call-filter",
         "policyFile": "policies/call-personal.json"},
    ]


def _scenario_spamfilter_reuse() -> dict[str, Any]:
    return {
        "name": "spamfilter-reuse",
        "seed": 1,
        "maxTicks": 10,
        "cells": _spamfilter_cells(),
        "topology": {"links": [{"a": "email-cell", "b": "call-cell"}]},
        "script": [
            {"tick": 1, "op": "register", "cell": "email-cell",
             "with": "call-cell", "wantReply": True},
            {"tick": 4, "op": "send-mgmt", "to": "email-cell",
             "command": "flag-spam", "payload": {"entry": "mallory"},
             "context": "personal", "tokens": [OWNER_TOKEN]},
            {"tick": 7, "op": "send-op", "to": "call-cell", "action": "ring",
             "args": {"from": "carol"}, "context": "personal", "tokens": []},
            {"tick": 8, "op": "send-op", "to": "call-cell", "action": "ring",
             "args": {"from": "mallory"}, "context": "personal", "tokens": []},
        ],
        "assertions": [
            {"id": "flag-travelled", "atTick": 6, "check": "blocklist-contains",
             "cell": "call-cell", "context": "personal", "entry": "mallory"},
            {"id": "carol-rings", "atTick": 7, "check": "decision-equals",
             "cell": "call-cell", "action": "ring", "expected": "Permit"},
            {"id": "mallory-blocked", "atTick": 8, "check": "decision-equals",
             "cell": "call-cell", "action": "ring", "expected": "Deny"},
            {"id": "both-applied-one", "atEnd": True, "check": "converged"},
        ],
    }


def _scenario_spamfilter_no_link() -> dict[str, Any]:
    return {
        "name": "spamfilter-no-link",
        "seed": 1,
        "maxTicks": 10,
        "cells": _spamfilter_cells(),
        "topology": {"links": []},
        "script": [
            {"tick": 1, "op": "register", "cell": "email-cell",
             "with": "call-cell", "wantReply": True},
            {"tick": 4, "op": "send-mgmt", "to": "email-cell",
             "command": "flag-spam", "payload": {"entry": "mallory"},
             "context": "personal", "tokens": [OWNER_TOKEN]},
            {"tick": 8, "op": "send-op", "to": "call-cell", "action": "ring",
             "args": {"from": "mallory"}, "context": "personal", "tokens": []},
        ],
        "assertions": [
            {"id": "flag-local-only", "atEnd": True, "check": "blocklist-contains",
             "cell": "email-cell", "context": "personal", "entry": "mallory"},
            {"id": "flag-did-not-travel", "atEnd": True,
             "check": "blocklist-contains", "cell": "call-cell",
             "context": "personal", "entry": "mallory", "expected": False},
            {"id": "mallory-still-rings", "atTick": 8, "check": "decision-equals",
             "cell": "call-cell", "action": "ring", "expected": "Permit"},
            {"id": "call-store-untouched", "atEnd": True,
             "check": "store-version", "cell": "call-cell", "expected": 0},
        ],
    }


def _scenario_spamfilter_disjoint() -> dict[str, Any]:
    return {
        "name": "spamfilter-disjoint-contexts",
        "seed": 1,
        "maxTicks": 10,
        "cells": [
            {"cellId": "email-cell",
             "profile": {"contexts": ["personal"]},
             "resourceKind": "email-filter",
             "policyFile": "policies/email-personal.json"},
            {"cellId": "call-cell",
             "profile": {"contexts": ["work"]},
             "resourceKind": "call-filter",
             "policyFile": "policies/call-work.json"},
        ],
        "topology": {"links": [{"a": "email-cell", "b": "call-cell"}]},
        "script": [
            {"tick": 4, "op": "send-mgmt", "to": "email-cell",
             "command": "flag-spam", "payload": {"entry": "mallory"},
             "context": "personal", "tokens": [OWNER_TOKEN]},
            {"tick": 8, "op": "send-op", "to": "call-cell", "action": "ring",
             "args": {"from": "mallory"}, "context": "work", "tokens": []},
        ],
        "assertions": [
            {"id": "flag-local-only", "atEnd": True, "check": "blocklist-contains",
             "cell": "email-cell", "context": "personal", "entry": "mallory"},
            {"id": "no-shared-context", "atEnd": True,
             "check": "blocklist-contains", "cell": "call-cell",
             "context": "work", "entry": "mallory", "expected": False},
            {"id": "mallory-still-rings", "atTick": 8, "check": "decision-equals",
             "cell": "call-cell", "action": "ring", "expected": "Permit"},
        ],
    }


def _scenario_corporate_and_personal() -> dict[str, Any]:
    corp_rule = {"id": "corp-no-text", "effect": "Deny", "subject": {},
                 "action": "text", "resource": "call-filter",
                 "contexts": ["corporate"]}
    return {
        "name": "corporate-and-personal",
        "seed": 1,
        "maxTicks": 13,
        "cells": [
            {"cellId": "phone-cell",
             "profile": {"contexts": ["corporate", "personal"]},
             "resourceKind": "call-filter",
             "policyFile": "policies/phone-dual.json",
             "trustPolicy": {"corporate": [], "personal": []}},
            {"cellId": "corp-admin",
             "profile": {"contexts": ["corporate"]},
             "resourceKind": "echo",
             "trustPolicy": {"corporate": []}},
        ],
        "topology": {"links": [{"a": "phone-cell", "b": "corp-admin"}]},
        "script": [
            {"tick": 2, "op": "emit-update", "cell": "corp-admin",
             "kind": "RuleAdd", "payload": corp_rule, "contexts": ["corporate"]},
            {"tick": 5, "op": "send-op", "to": "phone-cell", "action": "text",
             "args": {"from": "eve", "body": "win a prize"},
             "context": "corporate", "tokens": []},
            {"tick": 6, "op": "send-op", "to": "phone-cell", "action": "text",
             "args": {"from": "eve", "body": "win a prize"},
             "context": "personal", "tokens": []},
            {"tick": 7, "op": "send-mgmt", "to": "phone-cell",
             "command": "flag-spam", "payload": {"entry": "robo-caller"},
             "context": "personal", "tokens": [OWNER_TOKEN]},
        ],
        "assertions": [
            {"id": "corporate-text-denied", "atTick": 5,
             "check": "decision-equals", "cell": "phone-cell", "action": "text",
             "context": "corporate", "expected": "Deny"},
            {"id": "personal-text-still-fine", "atTick": 6,
             "check": "decision-equals", "cell": "phone-cell", "action": "text",
             "context": "personal", "expected": "Permit"},
            {"id": "personal-flag-stays-local", "atEnd": True,
             "check": "blocklist-contains", "cell": "corp-admin",
             "context": "personal", "entry": "robo-caller", "expected": False},
            {"id": "phone-has-flag", "atEnd": True,
             "check": "blocklist-contains", "cell": "phone-cell",
             "context": "personal", "entry": "robo-caller"},
            {"id": "corp-version", "atEnd": True, "check": "store-version",
             "cell": "corp-admin", "expected": 1},
            {"id": "phone-version", "atEnd": True, "check": "store-version",
             "cell": "phone-cell", "expected": 2},
        ],
    }


def _scenario_registry_discovery() -> dict[str, Any]:
    return {
        "name": "registry-discovery",
        "seed": 1,
        "maxTicks": 6,
        "cells": [
            {"cellId": "registry-cell",
             "profile": {"contexts": ["site"]},
             "resourceKind": "registry",
             "policyFile": "policies/registry-site.json"},
            {"cellId": "cell-a",
             "profile": {"contexts": ["site"]},
             "resourceKind": "echo"},
            {"cellId": "cell-b",
             "profile": {"contexts": ["site"]},
             "resourceKind": "call-filter"},
        ],
        "topology": {"links": [
            {"a": "cell-a", "b": "registry-cell"},
            {"a": "cell-b", "b": "registry-cell"},
        ]},
        "script": [
            {"tick": 1, "op": "register", "cell": "cell-a",
             "with": "registry-cell", "wantReply": True},
            {"tick": 1, "op": "register", "cell": "cell-b",
             "with": "registry-cell", "wantReply": False},
            {"tick": 3, "op": "send-op", "from": "cell-a", "to": "registry-cell",
             "action": "lookup",
             "args": {"context": "site", "capability": "ring"},
             "context": "site", "tokens": []},
        ],
        "assertions": [
            {"id": "not-yet-known", "atTick": 4, "check": "catalogue-contains",
             "cell": "cell-a", "peer": "cell-b", "expected": False},
            {"id": "lookup-permitted", "atTick": 4, "check": "decision-equals",
             "cell": "registry-cell", "action": "lookup", "expected": "Permit"},
            {"id": "learned-via-registry", "atTick": 5,
             "check": "catalogue-contains", "cell": "cell-a", "peer": "cell-b"},
            {"id": "b-never-sees-a", "atEnd": True, "check": "catalogue-contains",
             "cell": "cell-b", "peer": "cell-a", "expected": False},
        ],
    }


def _scenario_partition_heal() -> dict[str, Any]:
    return {
        "name": "partition-heal",
        "seed": 1,
        "maxTicks": 10,
        "cells": [
            {"cellId": "n1", "profile": {"contexts": ["ops"]},
             "resourceKind": "echo"},
            {"cellId": "n2", "profile": {"contexts": ["ops"]},
             "resourceKind": "echo"},
        ],
        "topology": {"links": [{"a": "n1", "b": "n2"}]},
        "script": [
            {"tick": 2, "op": "partition", "a": ["n1"], "b": ["n2"]},
            {"tick": 3, "op": "emit-update", "cell": "n1",
             "kind": "BlocklistAdd", "payload": "bad-host",
             "contexts": ["ops"]},
            {"tick": 6, "op": "heal"},
        ],
        "assertions": [
            {"id": "push-was-lost", "atTick": 5, "check": "store-version",
             "cell": "n2", "expected": 0},
            {"id": "backfilled", "atEnd": True, "check": "blocklist-contains",
             "cell": "n2", "context": "ops", "entry": "bad-host"},
            {"id": "stores-converged", "atEnd": True, "check": "converged"},
        ],
    }


def _scenario_ring_flood() -> dict[str, Any]:
    n = 8
    cells = [
        {"cellId": f"c{i}", "profile": {"contexts": ["mesh"]},
         "resourceKind": "echo"}
        for i in range(n)
    ]
    links = [{"a": f"c{i}", "b": f"c{(i + 1) % n}"} for i in range(n)]
    return {
        "name": "ring-flood",
        "seed": 1,
        "maxTicks": 12,
        "cells": cells,
        "topology": {"links": links},
        "script": [
            {"tick": 0, "op": "emit-update", "cell": "c0",
             "kind": "BlocklistAdd", "payload": "worm-host",
             "contexts": ["mesh"]},
        ],
        "assertions": [
            {"id": "ring-converged", "atTick": 12, "check": "converged"},
            {"id": "far-side-has-it", "atEnd": True,
             "check": "blocklist-contains", "cell": "c4",
             "context": "mesh", "entry": "worm-host"},
        ],
    }


def _scenario_lossy_convergence() -> dict[str, Any]:
    n = 16
    cells = [
        {"cellId": f"m{i:02d}", "profile": {"contexts": ["mesh"]},
         "resourceKind": "echo",
         "intervals": {"advertise": 5, "antiEntropy": 5}}
        for i in range(n)
    ]
    links = []
    for i in range(n):
        links.append({"a": f"m{i:02d}", "b": f"m{(i + 1) % n:02d}",
                      "drop": 0.3})
    for i in range(n):
        links.append({"a": f"m{i:02d}", "b": f"m{(i + 3) % n:02d}",
                      "drop": 0.3})
    return {
        "name": "lossy-convergence",
        "seed": 1,
        "maxTicks": 200,
        "cells": cells,
        "topology": {"links": links},
        "script": [
            {"tick": 0, "op": "emit-update", "cell": "m00",
             "kind": "BlocklistAdd", "payload": "worm-host",
             "contexts": ["mesh"]},
            {"tick": 2, "op": "emit-update", "cell": "m07",
             "kind": "BlocklistAdd", "payload": "phish-host",
             "contexts": ["mesh"]},
        ],
        "assertions": [
            {"id": "mesh-converged", "atEnd": True, "check": "converged"},
            {"id": "worm-host-spread", "atEnd": True,
             "check": "blocklist-contains", "cell": "m12",
             "context": "mesh", "entry": "worm-host"},
            {"id": "phish-host-spread", "atEnd": True,
             "check": "blocklist-contains", "cell": "m03",
             "context": "mesh", "entry": "phish-host"},
        ],
    }


_BUILDERS = {
    "spamfilter-reuse": _scenario_spamfilter_reuse,
    "spamfilter-no-link": _scenario_spamfilter_no_link,
    "spamfilter-disjoint-contexts": _scenario_spamfilter_disjoint,
    "corporate-and-personal": _scenario_corporate_and_personal,
    "registry-discovery": _scenario_registry_discovery,
    "partition-heal": _scenario_partition_heal,
    "ring-flood": _scenario_ring_flood,
    "lossy-convergence": _scenario_lossy_convergence,
}

CORPUS = tuple(_BUILDERS)


def scenario_wire(name: str) -> dict[str, Any]:
    return _BUILDERS[name]()


def _resolve_policy(name: str) -> PolicyDocument:
    return PolicyDocument.from_wire(POLICY_FILES[name])


def build_scenario(name: str, seed: int | None = None) -> ScenarioSpec:
    wire = scenario_wire(name)
    if seed is not None:
        wire["seed"] = seed
    return parse_scenario(wire, _resolve_policy)


def scenario_spamfilter_reuse() -> ScenarioSpec:
    return build_scenario("spamfilter-reuse")


def scenario_corporate_and_personal() -> ScenarioSpec:
    return build_scenario("corporate-and-personal")


def write_corpus(root: str) -> list[str]:
    """Write every scenario and policy file under ``root``; returns paths."""
    os.makedirs(os.path.join(root, "policies"), exist_ok=True)
    written = []
    for rel, doc in sorted(POLICY_FILES.items()):
        path = os.path.join(root, rel)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    for name in CORPUS:
        path = os.path.join(root, f"{name}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(scenario_wire(name), fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    return written
