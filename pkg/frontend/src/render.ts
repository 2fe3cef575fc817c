/** DOM construction from view models. No data values are computed here. */

import type { ContextSentence } from "./types.js";
import type {
  IndustryBar,
  Pagination,
  ResultRow,
  TextSegment,
  TrendSeries,
} from "./views.js";
import { chartGeometry, formatPct } from "./views.js";

const SVG_NS = "http://www.w3.org/2000/svg";

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

export function renderSegments(segments: TextSegment[]): DocumentFragment {
  const fragment = document.createDocumentFragment();
  for (const segment of segments) {
    if (segment.hit) {
      fragment.appendChild(el("mark", "hit", segment.text));
    } else {
      fragment.appendChild(document.createTextNode(segment.text));
    }
  }
  return fragment;
}

export function renderResultsTable(
  rows: ResultRow[],
  onContext: (row: ResultRow, cell: HTMLElement) => void,
): HTMLTableElement {
  const table = el("table", "results");
  const head = table.createTHead().insertRow();
  for (const title of ["Company", "Year", "Item", "Sentence", ""]) {
    head.appendChild(el("th", undefined, title));
  }
  const body = table.createTBody();
  for (const row of rows) {
    const tr = body.insertRow();
    const company = tr.insertCell();
    company.appendChild(el("strong", undefined, row.company));
    company.appendChild(el("div", "meta", `CIK ${row.cik} · ${row.accession}`));
    tr.insertCell().textContent = String(row.year);
    tr.insertCell().textContent = row.item;
    const sentence = tr.insertCell();
    sentence.className = "sentence";
    sentence.appendChild(renderSegments(row.segments));
    const keywords = el("div", "meta", row.keywords.join(", "));
    sentence.appendChild(keywords);
    const actions = tr.insertCell();
    const button = el("button", "context-btn", "context");
    button.addEventListener("click", () => onContext(row, sentence));
    actions.appendChild(button);
  }
  return table;
}

export function renderContext(sentences: ContextSentence[]): HTMLElement {
  const box = el("div", "context");
  for (const sentence of sentences) {
    const line = el("div", sentence.current ? "context-line current" : "context-line");
    line.appendChild(el("span", "idx", `#${sentence.index}`));
    line.appendChild(document.createTextNode(" " + sentence.text));
    box.appendChild(line);
  }
  return box;
}

export function renderPagination(
  model: Pagination,
  onPage: (page: number) => void,
): HTMLElement {
  const bar = el("div", "pagination");
  const prev = el("button", undefined, "←");
  prev.disabled = !model.hasPrev;
  prev.addEventListener("click", () => onPage(model.page - 1));
  const next = el("button", undefined, "→");
  next.disabled = !model.hasNext;
  next.addEventListener("click", () => onPage(model.page + 1));
  bar.appendChild(prev);
  bar.appendChild(
    el("span", "page-label",
       `page ${model.page} / ${model.pages} · ${model.total} sentences`),
  );
  bar.appendChild(next);
  return bar;
}

export function renderTrendChart(
  series: TrendSeries[],
  width = 560,
  height = 240,
): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "chart trend");
  const years = [...new Set(series.flatMap((s) => s.points.map((p) => p.year)))];
  const maxValue = Math.max(0, ...series.flatMap((s) => s.points.map((p) => p.value)));
  if (!years.length) return svg;
  const geo = chartGeometry(years, maxValue, width, height);
  const colors: Record<string, string> = {
    business: "#2563eb", risk: "#dc2626", all: "#111827",
  };
  for (const s of series) {
    const polyline = document.createElementNS(SVG_NS, "polyline");
    polyline.setAttribute(
      "points",
      s.points.map((p) => `${geo.x(p.year)},${geo.y(p.value)}`).join(" "),
    );
    polyline.setAttribute("fill", "none");
    polyline.setAttribute("stroke", colors[s.scope] ?? "#6b7280");
    polyline.setAttribute("stroke-width", "2");
    polyline.setAttribute("data-scope", s.scope);
    svg.appendChild(polyline);
    for (const p of s.points) {
      const dot = document.createElementNS(SVG_NS, "circle");
      dot.setAttribute("cx", String(geo.x(p.year)));
      dot.setAttribute("cy", String(geo.y(p.value)));
      dot.setAttribute("r", "3");
      dot.setAttribute("fill", colors[s.scope] ?? "#6b7280");
      dot.setAttribute("data-scope", s.scope);
      dot.setAttribute("data-year", String(p.year));
      dot.setAttribute("data-value", String(p.value));
      const title = document.createElementNS(SVG_NS, "title");
      title.textContent = `${s.scope} ${p.year}: ${formatPct(p.value)}`;
      dot.appendChild(title);
      svg.appendChild(dot);
    }
  }
  for (const year of years.sort((a, b) => a - b)) {
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(geo.x(year)));
    label.setAttribute("y", String(height - 6));
    label.setAttribute("text-anchor", "middle");
    label.setAttribute("class", "axis");
    label.textContent = String(year);
    svg.appendChild(label);
  }
  return svg;
}

export function renderIndustryChart(
  bars: IndustryBar[],
  width = 560,
  rowHeight = 26,
): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  const height = bars.length * rowHeight + 20;
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "chart industry");
  const colors: Record<string, string> = {
    business: "#2563eb", risk: "#dc2626", all: "#111827",
  };
  const labelWidth = 90;
  const barSpan = width - labelWidth - 60;
  bars.forEach((bar, i) => {
    const y0 = i * rowHeight + 12;
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", "4");
    label.setAttribute("y", String(y0 + rowHeight / 2));
    label.setAttribute("class", "axis");
    label.textContent = `SIC ${bar.sic}`;
    svg.appendChild(label);
    const scoped = bar.values.filter((v) => v.scope !== "all");
    scoped.forEach((v, j) => {
      const rect = document.createElementNS(SVG_NS, "rect");
      const h = (rowHeight - 8) / Math.max(1, scoped.length);
      rect.setAttribute("x", String(labelWidth));
      rect.setAttribute("y", String(y0 + j * h));
      rect.setAttribute("width", String(Math.max(1, v.value * barSpan)));
      rect.setAttribute("height", String(h - 1));
      rect.setAttribute("fill", colors[v.scope] ?? "#6b7280");
      rect.setAttribute("data-scope", v.scope);
      rect.setAttribute("data-sic", bar.sic);
      rect.setAttribute("data-value", String(v.value));
      const title = document.createElementNS(SVG_NS, "title");
      title.textContent = `SIC ${bar.sic} ${v.scope}: ${formatPct(v.value)}`;
      rect.appendChild(title);
      svg.appendChild(rect);
      const value = document.createElementNS(SVG_NS, "text");
      value.setAttribute("x", String(labelWidth + Math.max(1, v.value * barSpan) + 4));
      value.setAttribute("y", String(y0 + j * h + h - 3));
      value.setAttribute("class", "axis");
      value.textContent = formatPct(v.value);
      svg.appendChild(value);
    });
  });
  return svg;
}
