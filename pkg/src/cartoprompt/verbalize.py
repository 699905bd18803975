"""Render an area descriptor into its fixed preprompt sentence template.

The output is deterministic: same descriptor, same bytes. Numbers are
plain integers with no grouping separators, list items are comma-joined,
and sentences are separated by exactly one space.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .descriptor import AreaDescriptor
from .util import round_half_up

_MULTISPACE = re.compile(r" {2,}")


@dataclass(frozen=True)
class VerbalizerRules:
    """Sentence templates and joiners for the preprompt text."""

    list_separator: str = ", "
    name_joiner: str = ", "
    area_template: str = ("This is a circular area of radius of {radius} meters that "
                          "intersects province(s) of {provinces} and district(s) of "
                          "{districts}.")
    amenity_item: str = "{count} {value}(s)"
    amenities_template: str = "There are {items}."
    buildings_template: str = "There are {count} buildings which cover {pct}% of the total area."
    coverage_item: str = "{pct}% {value}"
    coverage_template: str = "The area is covered by {items}."
    length_item: str = "{length} meters of {value} {kind}"
    lengths_template: str = "It contains {items}."


def render_preprompt(d: AreaDescriptor, rules: VerbalizerRules = VerbalizerRules()) -> str:
    """Compose the preprompt sentences for one descriptor.

    Sentence order is fixed: area/admin, amenities, buildings, coverage,
    then lengths with all rails before all roads. Amenities and each
    length group are sorted ascending by tag value; coverage entries are
    sorted by descending percent with alphabetical tie-break.
    """
    sentences = [
        rules.area_template.format(
            radius=round_half_up(d.radius_m),
            provinces=rules.name_joiner.join(d.provinces),
            districts=rules.name_joiner.join(d.districts),
        )
    ]

    if d.amenity_counts:
        items = rules.list_separator.join(
            rules.amenity_item.format(count=d.amenity_counts[value], value=value)
            for value in sorted(d.amenity_counts)
        )
        sentences.append(rules.amenities_template.format(items=items))

    if d.building_count > 0:
        sentences.append(rules.buildings_template.format(
            count=d.building_count, pct=d.building_coverage_pct))

    if d.coverage_entries:
        ordered = sorted(d.coverage_entries, key=lambda e: (-e.pct, e.value))
        items = rules.list_separator.join(
            rules.coverage_item.format(pct=e.pct, value=e.value) for e in ordered
        )
        sentences.append(rules.coverage_template.format(items=items))

    length_items = [
        rules.length_item.format(length=d.rail_lengths_m[value], value=value, kind="rail")
        for value in sorted(d.rail_lengths_m)
    ] + [
        rules.length_item.format(length=d.road_lengths_m[value], value=value, kind="road")
        for value in sorted(d.road_lengths_m)
    ]
    if length_items:
        sentences.append(rules.lengths_template.format(
            items=rules.list_separator.join(length_items)))

    return _MULTISPACE.sub(" ", " ".join(sentences)).strip()


def normalize_spaces(text: str) -> str:
    """Collapse runs of spaces to one; used when comparing against golden text."""
    return _MULTISPACE.sub(" ", text).strip()
