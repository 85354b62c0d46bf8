"""Signed result records exchanged by the result-publication contract."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Optional

from .encoding import decode, encode
from .errors import DecodeError
from .pki import KeyPair, Signature, sign

CHOICES = ("yes", "no")


class ScopeLevel(str, Enum):
    MUNICIPALITY = "Municipality"
    CANTON = "Canton"
    FEDERAL = "Federal"


def normalize_counts(counts: Mapping[str, int]) -> tuple[tuple[str, int], ...]:
    merged = {c: 0 for c in CHOICES}
    merged.update(counts)
    return tuple(sorted(merged.items()))


@dataclass(frozen=True)
class ResultRecord:
    level: ScopeLevel
    scope: str
    event_id: str
    counts: tuple[tuple[str, int], ...]
    electorate_size: int
    submitter: str
    signature: Optional[Signature] = None

    def payload(self) -> bytes:
        return encode(("result", self.level, self.scope, self.event_id, self.counts,
                       self.electorate_size, self.submitter))

    @property
    def total(self) -> int:
        return sum(n for _, n in self.counts)

    def counts_dict(self) -> dict[str, int]:
        return dict(self.counts)

    def signed(self, key: KeyPair) -> "ResultRecord":
        return replace(self, signature=sign(key, self.payload()))

    def to_value(self):
        return (self.level, self.scope, self.event_id, self.counts, self.electorate_size,
                self.submitter, self.signature)

    def to_bytes(self) -> bytes:
        return encode(self)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ResultRecord":
        try:
            level, scope, event_id, counts, electorate, submitter, sig = decode(data)
            counts = tuple((str(c), int(n)) for c, n in counts)
            if not isinstance(electorate, int) or isinstance(electorate, bool):
                raise DecodeError("bad electorate")
            return cls(ScopeLevel(level), scope, event_id, counts, electorate, submitter,
                       None if sig is None else Signature.from_value(sig))
        except (TypeError, ValueError) as exc:
            raise DecodeError("malformed result record") from exc

    def render(self) -> str:
        counts = ",".join(f"{c}:{n}" for c, n in self.counts)
        return f"{self.level.value}\t{self.scope}\t{self.event_id}\t{counts}\t{self.electorate_size}"
