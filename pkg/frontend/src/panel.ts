/** Descriptor panel rendering: tables and bars, plus the raw preprompt. */

import type { Descriptor } from "./api.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function amenityTable(counts: Record<string, number>): HTMLElement {
  const table = el("table", "amenities");
  const head = table.createTHead().insertRow();
  head.insertCell().textContent = "amenity";
  head.insertCell().textContent = "count";
  const body = table.createTBody();
  for (const [name, count] of Object.entries(counts)) {
    const row = body.insertRow();
    row.insertCell().textContent = name;
    row.insertCell().textContent = String(count);
  }
  return table;
}

function coverageBars(descriptor: Descriptor): HTMLElement {
  const wrap = el("div", "coverage");
  const entries = [
    { category: "buildings", pct: descriptor.building_coverage_pct },
    ...descriptor.coverage_entries,
  ];
  for (const entry of entries) {
    const row = el("div", "coverage-row");
    row.appendChild(el("span", "coverage-label", `${entry.category} ${entry.pct}%`));
    const track = el("div", "coverage-track");
    const bar = el("div", "coverage-bar");
    bar.style.width = `${Math.min(100, entry.pct)}%`;
    track.appendChild(bar);
    row.appendChild(track);
    wrap.appendChild(row);
  }
  return wrap;
}

function lengthList(title: string, lengths: Record<string, number>): HTMLElement {
  const wrap = el("div", "lengths");
  wrap.appendChild(el("h3", undefined, title));
  const list = el("ul");
  for (const [kind, meters] of Object.entries(lengths)) {
    list.appendChild(el("li", undefined, `${kind}: ${meters} m`));
  }
  wrap.appendChild(list);
  return wrap;
}

/**
 * Replace the panel contents with the given descriptor. The preprompt
 * is assigned with textContent, so what the API sent is what the user
 * sees; no client-side reformatting happens anywhere on this path.
 */
export function renderDescriptor(
  panel: HTMLElement,
  descriptor: Descriptor,
  preprompt: string,
): void {
  panel.replaceChildren();
  const place = [...descriptor.provinces, ...descriptor.districts].join(" / ");
  panel.appendChild(el("h2", undefined, place || "selected area"));
  panel.appendChild(
    el(
      "p",
      "meta",
      `${descriptor.radius_m} m around ` +
        `${descriptor.center.lat.toFixed(5)}, ${descriptor.center.lon.toFixed(5)} — ` +
        `${descriptor.building_count} buildings`,
    ),
  );
  panel.appendChild(amenityTable(descriptor.amenity_counts));
  panel.appendChild(coverageBars(descriptor));
  panel.appendChild(lengthList("roads", descriptor.road_lengths_m));
  panel.appendChild(lengthList("rail", descriptor.rail_lengths_m));
  const pre = el("pre", "preprompt");
  pre.textContent = preprompt;
  panel.appendChild(pre);
}
