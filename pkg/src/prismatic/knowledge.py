"""Three-layer business-relationship network and ego-centric queries."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import InvalidArgument, UnknownInstrument
from .ingest import CompanyProfile, PersonIdentity


class Layer(enum.Enum):
    LOCATION = "location"
    HUMAN = "human"
    BUSINESS = "business"


class Attribute(enum.Enum):
    PROVINCE = "province"
    CITY = "city"
    INVESTOR = "investor"
    MANAGER = "manager"
    INDUSTRY = "industry"
    CONCEPT = "concept"


# (layer, attribute) pairs, primary attribute listed first per layer.
LAYER_ATTRIBUTES: dict[Layer, tuple[Attribute, Attribute]] = {
    Layer.LOCATION: (Attribute.PROVINCE, Attribute.CITY),
    Layer.HUMAN: (Attribute.INVESTOR, Attribute.MANAGER),
    Layer.BUSINESS: (Attribute.INDUSTRY, Attribute.CONCEPT),
}

_ATTRIBUTE_LAYER = {attr: layer for layer, attrs in LAYER_ATTRIBUTES.items() for attr in attrs}


def is_primary(attribute: Attribute) -> bool:
    return LAYER_ATTRIBUTES[_ATTRIBUTE_LAYER[attribute]][0] is attribute


@dataclass(frozen=True)
class KnowledgeItem:
    """One typed shared feature: a (layer, attribute, value) triple.

    Human-layer values are person identities; other layers hold plain strings.
    """

    layer: Layer
    attribute: Attribute
    value: str | PersonIdentity

    def __post_init__(self) -> None:
        if _ATTRIBUTE_LAYER[self.attribute] is not self.layer:
            raise InvalidArgument(f"{self.attribute.value} does not belong to layer {self.layer.value}")
        if isinstance(self.value, PersonIdentity):
            if self.layer is not Layer.HUMAN:
                raise InvalidArgument("person values are only valid in the human layer")
        elif not self.value:
            raise InvalidArgument("item value must be non-empty")

    @property
    def value_key(self) -> str:
        """Canonical string form of the value, stable for URLs and JSON."""
        if isinstance(self.value, PersonIdentity):
            return self.value.key()
        return self.value

    def sort_key(self) -> tuple:
        layer_rank = list(Layer).index(self.layer)
        return (layer_rank, 0 if is_primary(self.attribute) else 1, self.value_key)

    @staticmethod
    def from_parts(layer: str, attribute: str, value: str) -> "KnowledgeItem":
        try:
            lay = Layer(layer)
            attr = Attribute(attribute)
        except ValueError as exc:
            raise InvalidArgument(str(exc)) from None
        if lay is Layer.HUMAN:
            return KnowledgeItem(lay, attr, PersonIdentity.from_key(value))
        return KnowledgeItem(lay, attr, value)


@dataclass(frozen=True, eq=False)
class MultiLayerNetwork:
    """Companies and their knowledge items as mutually inverse incidence maps."""

    companies: frozenset[str]
    items_of: Mapping[str, frozenset[KnowledgeItem]]
    holders_of: Mapping[KnowledgeItem, frozenset[str]]

    def items_in_layer(self, layer: Layer) -> list[KnowledgeItem]:
        return sorted((i for i in self.holders_of if i.layer is layer), key=KnowledgeItem.sort_key)

    def layer_edge_count(self, layer: Layer) -> int:
        """Implied company-company edges: sum over the layer's items of C(holders, 2)."""
        return sum(
            len(holders) * (len(holders) - 1) // 2
            for item, holders in self.holders_of.items()
            if item.layer is layer
        )


def _profile_items(profile: CompanyProfile) -> Iterable[KnowledgeItem]:
    if profile.province:
        yield KnowledgeItem(Layer.LOCATION, Attribute.PROVINCE, profile.province)
    if profile.city:
        yield KnowledgeItem(Layer.LOCATION, Attribute.CITY, profile.city)
    if profile.industry:
        yield KnowledgeItem(Layer.BUSINESS, Attribute.INDUSTRY, profile.industry)
    for concept in profile.concepts:
        yield KnowledgeItem(Layer.BUSINESS, Attribute.CONCEPT, concept)
    for person in profile.top_investors:
        yield KnowledgeItem(Layer.HUMAN, Attribute.INVESTOR, person)
    for person in profile.managers:
        yield KnowledgeItem(Layer.HUMAN, Attribute.MANAGER, person)


def build_network(profiles: Sequence[CompanyProfile]) -> MultiLayerNetwork:
    """Populate the incidence maps from company profiles."""
    if not profiles:
        raise InvalidArgument("no profiles to build the network from")
    items_of: dict[str, frozenset[KnowledgeItem]] = {}
    holders: dict[KnowledgeItem, set[str]] = {}
    for profile in profiles:
        items = frozenset(_profile_items(profile))
        items_of[profile.instrument] = items
        for item in items:
            holders.setdefault(item, set()).add(profile.instrument)
    return MultiLayerNetwork(
        companies=frozenset(items_of),
        items_of=items_of,
        holders_of={item: frozenset(hs) for item, hs in holders.items()},
    )


@dataclass(frozen=True)
class EgoNeighbor:
    ticker: str
    shared_items: frozenset[KnowledgeItem]

    @property
    def ring(self) -> int:
        return len(self.shared_items)


@dataclass(frozen=True)
class EgoResult:
    ego: str
    segments: tuple[tuple[KnowledgeItem, int], ...]
    neighbors: tuple[EgoNeighbor, ...]


def ego_search(net: MultiLayerNetwork, ego: str) -> EgoResult:
    """All knowledge items of the ego plus every company sharing at least one.

    Neighbors carry their shared-item sets; ring = shared count, so higher
    rings sit closer to the center in the chord view.
    """
    if ego not in net.companies:
        raise UnknownInstrument(f"unknown company {ego!r}")
    ego_items = net.items_of.get(ego, frozenset())
    segments = tuple(
        (item, len(net.holders_of[item]))
        for item in sorted(ego_items, key=KnowledgeItem.sort_key)
    )
    shared: dict[str, set[KnowledgeItem]] = {}
    for item in ego_items:
        for holder in net.holders_of[item]:
            if holder != ego:
                shared.setdefault(holder, set()).add(item)
    neighbors = tuple(
        EgoNeighbor(ticker=t, shared_items=frozenset(items))
        for t, items in sorted(shared.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    )
    return EgoResult(ego=ego, segments=segments, neighbors=neighbors)


def companies_with_item(net: MultiLayerNetwork, item: KnowledgeItem) -> list[str]:
    """Holders of one item, ticker-sorted; unknown items yield an empty list."""
    return sorted(net.holders_of.get(item, frozenset()))


def segment_width(item_count: int, layer_total: int) -> float:
    """Raw segment weight ln(1 + total/count): rarer items come out wider."""
    if item_count < 1 or layer_total < 1 or item_count > layer_total:
        raise InvalidArgument(f"need 1 <= item_count <= layer_total, got {item_count}/{layer_total}")
    return math.log1p(layer_total / item_count)


def layer_segment_widths(counts: Sequence[int]) -> list[float]:
    """Normalized widths for one layer's segments; they sum to 1."""
    if not counts:
        return []
    total = sum(counts)
    raw = [segment_width(c, total) for c in counts]
    scale = sum(raw)
    return [w / scale for w in raw]
