"""Peer discovery: broadcast adverts and directed registration.

Adverts carry a per-sender monotonic nonce so a receiver can discard
replays and reordered copies.  Registration is the directed handshake
used when a cell wants a specific peer (often a registry cell) to know
about it; the receiver may return its own profile in reply.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping, Optional

from .catalogue import Catalogue, CellProfile
from .errors import SelfRegistration


@dataclass(frozen=True)
class Advertisement:
    profile: CellProfile
    nonce: int

    def to_wire(self) -> dict[str, Any]:
        return {"profile": self.profile.to_wire(), "nonce": self.nonce}

    @classmethod
    def from_wire(cls, data: Mapping[str, Any]) -> "Advertisement":
        return cls(profile=CellProfile.from_wire(data["profile"]), nonce=data["nonce"])


@dataclass(frozen=True)
class RegistrationRequest:
    profile: CellProfile
    want_reply: bool

    def to_wire(self) -> dict[str, Any]:
        return {"profile": self.profile.to_wire(), "wantReply": self.want_reply}

    @classmethod
    def from_wire(cls, data: Mapping[str, Any]) -> "RegistrationRequest":
        return cls(
            profile=CellProfile.from_wire(data["profile"]),
            want_reply=bool(data["wantReply"]),
        )


class AdvertOutcome(str, Enum):
    ACCEPTED = "accepted"
    STALE_NONCE = "stale-nonce"
    SELF_IGNORED = "self-ignored"


class DiscoveryService:
    """Advert/registration logic for one cell, feeding its catalogue."""

    def __init__(
        self,
        catalogue: Catalogue,
        contexts: frozenset[str],
        capabilities: frozenset[str],
        resource_kind: str,
        ttl_ticks: int,
    ):
        self.catalogue = catalogue
        self.contexts = contexts
        self.capabilities = capabilities
        self.resource_kind = resource_kind
        self.ttl_ticks = ttl_ticks
        self._next_nonce = 0
        self._last_nonce: dict[str, int] = {}

    @property
    def cell_id(self) -> str:
        return self.catalogue.owner_id

    def current_profile(self, now: int) -> CellProfile:
        return CellProfile(
            cell_id=self.cell_id,
            endpoint=self.cell_id,
            contexts=self.contexts,
            capabilities=self.capabilities,
            resource_kind=self.resource_kind,
            advertised_at_tick=now,
            ttl_ticks=self.ttl_ticks,
        )

    def make_advertisement(self, now: int) -> Advertisement:
        advert = Advertisement(self.current_profile(now), self._next_nonce)
        self._next_nonce += 1
        return advert

    def handle_advertisement(self, advert: Advertisement, now: int) -> AdvertOutcome:
        peer = advert.profile.cell_id
        if peer == self.cell_id:
            return AdvertOutcome.SELF_IGNORED
        if advert.nonce <= self._last_nonce.get(peer, -1):
            return AdvertOutcome.STALE_NONCE
        self._last_nonce[peer] = advert.nonce
        self.catalogue.upsert(advert.profile, now)
        return AdvertOutcome.ACCEPTED

    def make_registration(self, target: str, now: int, want_reply: bool = True) -> RegistrationRequest:
        if target == self.cell_id:
            raise SelfRegistration(f"{target!r} cannot register with itself")
        return RegistrationRequest(self.current_profile(now), want_reply)

    def handle_registration(
        self, request: RegistrationRequest, now: int
    ) -> Optional[CellProfile]:
        """Record the registrant; returns our profile when a reply is wanted."""
        self.catalogue.upsert(request.profile, now)
        if request.want_reply:
            return self.current_profile(now)
        return None

    def handle_registration_reply(self, profile: CellProfile, now: int) -> None:
        self.catalogue.upsert(profile, now)
