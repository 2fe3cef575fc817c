/** Pure view models.
 *
 * Every number and highlight that reaches the DOM is computed here from an
 * API payload, never re-derived client-side: highlight segments come from
 * server offsets, chart values are the raw payload values (geometry is
 * computed separately from values).
 */

import type { SearchResponse, SearchResult, StatRow } from "./types.js";

export interface TextSegment {
  text: string;
  hit: boolean;
}

/** Split a sentence into plain/highlighted runs from server offsets. */
export function highlightSegments(
  text: string,
  spans: [number, number][],
): TextSegment[] {
  const clipped = spans
    .map(([s, e]): [number, number] => [
      Math.max(0, Math.min(s, text.length)),
      Math.max(0, Math.min(e, text.length)),
    ])
    .filter(([s, e]) => s < e)
    .sort((a, b) => a[0] - b[0] || a[1] - b[1]);
  const merged: [number, number][] = [];
  for (const [s, e] of clipped) {
    const last = merged[merged.length - 1];
    if (last && s <= last[1]) {
      last[1] = Math.max(last[1], e);
    } else {
      merged.push([s, e]);
    }
  }
  const segments: TextSegment[] = [];
  let cursor = 0;
  for (const [s, e] of merged) {
    if (s > cursor) segments.push({ text: text.slice(cursor, s), hit: false });
    segments.push({ text: text.slice(s, e), hit: true });
    cursor = e;
  }
  if (cursor < text.length) {
    segments.push({ text: text.slice(cursor), hit: false });
  }
  return segments;
}

export interface ResultRow {
  company: string;
  cik: number;
  year: number;
  item: string;
  accession: string;
  sentenceIndex: number;
  keywords: string[];
  segments: TextSegment[];
}

export function resultRows(response: SearchResponse): ResultRow[] {
  return response.results.map((r: SearchResult) => ({
    company: r.company_name,
    cik: r.cik,
    year: r.reporting_year,
    item: r.item_id,
    accession: r.accession_number,
    sentenceIndex: r.sentence_index,
    keywords: r.keyword_ids,
    segments: highlightSegments(r.sentence_text, r.highlights),
  }));
}

export interface Pagination {
  page: number;
  pages: number;
  total: number;
  hasPrev: boolean;
  hasNext: boolean;
}

export function pagination(response: SearchResponse): Pagination {
  const pages = Math.max(1, Math.ceil(response.total / response.page_size));
  return {
    page: response.page,
    pages,
    total: response.total,
    hasPrev: response.page > 1,
    hasNext: response.page < pages,
  };
}

export interface TrendPoint {
  year: number;
  value: number;
}

export interface TrendSeries {
  scope: string;
  points: TrendPoint[];
}

/** Fig-1-style trend: one series per scope, values straight off the rows. */
export function trendSeries(rows: StatRow[]): TrendSeries[] {
  const byScope = new Map<string, TrendPoint[]>();
  for (const row of rows) {
    if (row.sic_group) continue;
    const points = byScope.get(row.scope) ?? [];
    points.push({ year: row.year, value: row.value });
    byScope.set(row.scope, points);
  }
  return [...byScope.entries()]
    .map(([scope, points]) => ({
      scope,
      points: points.sort((a, b) => a.year - b.year),
    }))
    .sort((a, b) => a.scope.localeCompare(b.scope));
}

export interface IndustryBar {
  sic: string;
  values: { scope: string; value: number }[];
}

/** Fig-3-style industry bars, preserving the server's ranking order. */
export function industryBars(rows: StatRow[]): IndustryBar[] {
  const order: string[] = [];
  const bars = new Map<string, IndustryBar>();
  for (const row of rows) {
    if (!row.sic_group) continue;
    let bar = bars.get(row.sic_group);
    if (!bar) {
      bar = { sic: row.sic_group, values: [] };
      bars.set(row.sic_group, bar);
      order.push(row.sic_group);
    }
    bar.values.push({ scope: row.scope, value: row.value });
  }
  return order.map((sic) => bars.get(sic)!);
}

export interface ChartGeometry {
  x: (year: number) => number;
  y: (value: number) => number;
}

/** Map years/values onto a pixel box; pure geometry, values untouched. */
export function chartGeometry(
  years: number[],
  maxValue: number,
  width: number,
  height: number,
  pad = 24,
): ChartGeometry {
  const lo = Math.min(...years);
  const hi = Math.max(...years);
  const spanX = hi > lo ? hi - lo : 1;
  const top = maxValue > 0 ? maxValue : 1;
  return {
    x: (year) => pad + ((year - lo) / spanX) * (width - 2 * pad),
    y: (value) => height - pad - (value / top) * (height - 2 * pad),
  };
}

export function formatPct(value: number): string {
  return `${(value * 100).toFixed(1)}%`;
}
