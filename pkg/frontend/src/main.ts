/** App wiring: form -> API -> render, with URL-synced sessions. */

import { ApiClient, RequestError, ServiceUnavailableError } from "./api.js";
import {
  DEFAULT_PAGE_SIZE,
  QueryFormState,
  emptyForm,
  fromUrlParams,
  parseYears,
  toExportQuery,
  toSearchParams,
  toUrlParams,
  validateForm,
} from "./query.js";
import {
  renderContext,
  renderIndustryChart,
  renderPagination,
  renderResultsTable,
  renderTrendChart,
} from "./render.js";
import type { ExportFormat, MetaResponse } from "./types.js";
import {
  ResultRow,
  industryBars,
  pagination,
  resultRows,
  trendSeries,
} from "./views.js";

const api = new ApiClient("");

let form: QueryFormState = emptyForm();
let lastTotal = 0;
let inflight: AbortController | null = null;

function byId<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function setBanner(message: string, retry: (() => void) | null): void {
  const banner = byId<HTMLDivElement>("banner");
  banner.replaceChildren();
  if (!message) {
    banner.hidden = true;
    return;
  }
  banner.hidden = false;
  banner.appendChild(document.createTextNode(message));
  if (retry) {
    const button = document.createElement("button");
    button.textContent = "retry";
    button.addEventListener("click", retry);
    banner.appendChild(button);
  }
}

function setFieldError(message: string): void {
  const box = byId<HTMLDivElement>("field-error");
  box.textContent = message;
  box.hidden = !message;
}

function readForm(): QueryFormState {
  const keywords = [...document.querySelectorAll<HTMLInputElement>(
    "#keyword-chips input:checked",
  )].map((input) => input.value);
  const sections = [...document.querySelectorAll<HTMLInputElement>(
    "#section-checks input:checked",
  )].map((input) => input.value);
  const patternValue = byId<HTMLInputElement>("pattern").value.trim();
  const companyValue = byId<HTMLInputElement>("company").value.trim();
  const [yearFrom, yearTo] = parseYears(byId<HTMLInputElement>("years").value);
  const pageSize = parseInt(byId<HTMLInputElement>("page-size").value, 10);
  return {
    ...form,
    keywords,
    sections,
    patterns: patternValue ? [patternValue] : [],
    companies: companyValue ? [companyValue] : [],
    yearFrom,
    yearTo,
    pageSize: Number.isNaN(pageSize) ? DEFAULT_PAGE_SIZE : pageSize,
  };
}

function writeForm(state: QueryFormState): void {
  for (const input of document.querySelectorAll<HTMLInputElement>(
    "#keyword-chips input",
  )) {
    input.checked = state.keywords.includes(input.value);
  }
  for (const input of document.querySelectorAll<HTMLInputElement>(
    "#section-checks input",
  )) {
    input.checked = state.sections.includes(input.value);
  }
  byId<HTMLInputElement>("pattern").value = state.patterns[0] ?? "";
  byId<HTMLInputElement>("company").value = state.companies[0] ?? "";
  byId<HTMLInputElement>("years").value =
    state.yearFrom === null
      ? ""
      : state.yearFrom === state.yearTo || state.yearTo === null
        ? String(state.yearFrom)
        : `${state.yearFrom}..${state.yearTo}`;
  byId<HTMLInputElement>("page-size").value = String(state.pageSize);
}

function syncUrl(): void {
  const params = toUrlParams(form);
  const query = params.toString();
  history.replaceState(null, "", query ? `?${query}` : location.pathname);
}

async function runSearch(): Promise<void> {
  const next = readForm();
  const errors = validateForm(next);
  if (errors.length) {
    setFieldError(errors.map((e) => `${e.field}: ${e.message}`).join("; "));
    return;
  }
  setFieldError("");
  form = next;
  syncUrl();

  inflight?.abort();
  inflight = new AbortController();
  const signal = inflight.signal;
  try {
    const response = await api.search(toSearchParams(form), signal);
    lastTotal = response.total;
    const rows = resultRows(response);
    const host = byId<HTMLDivElement>("results");
    host.replaceChildren();
    if (!rows.length) {
      host.appendChild(Object.assign(document.createElement("p"), {
        className: "empty", textContent: "no matches",
      }));
    } else {
      host.appendChild(renderResultsTable(rows, expandContext));
    }
    const pager = byId<HTMLDivElement>("pager");
    pager.replaceChildren(renderPagination(pagination(response), (page) => {
      form = { ...form, page };
      writeForm(form);
      void runSearch();
    }));
    byId<HTMLButtonElement>("export-csv").disabled = response.total === 0;
    byId<HTMLButtonElement>("export-xlsx").disabled = response.total === 0;
    setBanner("", null);
  } catch (err) {
    if (err instanceof DOMException && err.name === "AbortError") return;
    if (err instanceof RequestError) {
      setFieldError(formatDetail(err.detail) || err.message);
    } else if (err instanceof ServiceUnavailableError) {
      setBanner("service unavailable — your query is preserved. ",
                () => void runSearch());
    } else {
      throw err;
    }
  }
}

function formatDetail(detail: unknown): string {
  if (detail == null) return "";
  if (typeof detail === "string") return detail;
  if (typeof detail === "object") {
    const d = detail as Record<string, unknown>;
    if (d.pattern) return `pattern ${JSON.stringify(d.pattern)}: ${d.error}`;
  }
  return JSON.stringify(detail);
}

async function expandContext(row: ResultRow, cell: HTMLElement): Promise<void> {
  const existing = cell.querySelector(".context");
  if (existing) {
    existing.remove();
    return;
  }
  try {
    const context = await api.context(row.accession, row.item,
                                      row.sentenceIndex);
    cell.appendChild(renderContext(context.sentences));
  } catch (err) {
    if (err instanceof ServiceUnavailableError) {
      setBanner("context fetch failed. ", null);
    }
  }
}

async function refreshCharts(): Promise<void> {
  const scopeInputs = [...document.querySelectorAll<HTMLInputElement>(
    "#trend-scopes input:checked",
  )];
  const trendHost = byId<HTMLDivElement>("trend-chart");
  trendHost.replaceChildren();
  const rows = [];
  for (const input of scopeInputs) {
    const params = new URLSearchParams({
      metric: "pct_companies", scope: input.value,
    });
    const payload = await api.stats(params);
    rows.push(...payload.rows);
  }
  trendHost.appendChild(renderTrendChart(trendSeries(rows)));

  const year = byId<HTMLSelectElement>("industry-year").value;
  if (year) {
    const params = new URLSearchParams({
      metric: "industry", year, top_n: "15",
    });
    const payload = await api.stats(params);
    const host = byId<HTMLDivElement>("industry-chart");
    host.replaceChildren(renderIndustryChart(industryBars(payload.rows)));
  }
}

async function downloadExport(format: ExportFormat): Promise<void> {
  try {
    const blob = await api.export(toExportQuery(form), format);
    const url = URL.createObjectURL(blob);
    const a = document.createElement("a");
    a.href = url;
    a.download = `matches.${format}`;
    a.click();
    URL.revokeObjectURL(url);
  } catch (err) {
    setBanner("download failed. ", () => void downloadExport(format));
  }
}

function populateForm(meta: MetaResponse): void {
  const chips = byId<HTMLDivElement>("keyword-chips");
  for (const keyword of meta.keywords) {
    const label = document.createElement("label");
    label.className = "chip";
    const input = document.createElement("input");
    input.type = "checkbox";
    input.value = keyword;
    label.appendChild(input);
    label.appendChild(document.createTextNode(keyword));
    chips.appendChild(label);
  }
  const sections = byId<HTMLDivElement>("section-checks");
  for (const section of meta.sections) {
    const label = document.createElement("label");
    const input = document.createElement("input");
    input.type = "checkbox";
    input.value = section;
    label.appendChild(input);
    label.appendChild(document.createTextNode(`Item ${section}`));
    sections.appendChild(label);
  }
  const companies = byId<HTMLDataListElement>("company-options");
  for (const company of meta.companies) {
    const option = document.createElement("option");
    option.value = company.name;
    companies.appendChild(option);
  }
  const yearSelect = byId<HTMLSelectElement>("industry-year");
  for (const year of meta.years) {
    const option = document.createElement("option");
    option.value = String(year);
    option.textContent = String(year);
    yearSelect.appendChild(option);
  }
  yearSelect.value = String(meta.years[meta.years.length - 1] ?? "");
  byId<HTMLSpanElement>("corpus-line").textContent =
    `${meta.total_sentences} sentences · ${meta.total_matches} matches · ` +
    `years ${meta.years.join(", ")}`;
}

async function start(): Promise<void> {
  try {
    const meta = await api.meta();
    populateForm(meta);
  } catch (err) {
    setBanner("cannot reach the corpus service. ", () => void start());
    return;
  }
  form = fromUrlParams(new URLSearchParams(location.search));
  writeForm(form);

  byId<HTMLFormElement>("query-form").addEventListener("submit", (event) => {
    event.preventDefault();
    form = { ...readForm(), page: 1 };
    writeForm(form);
    void runSearch();
  });
  byId<HTMLButtonElement>("export-csv").addEventListener(
    "click", () => void downloadExport("csv"),
  );
  byId<HTMLButtonElement>("export-xlsx").addEventListener(
    "click", () => void downloadExport("xlsx"),
  );
  byId<HTMLDivElement>("trend-scopes").addEventListener(
    "change", () => void refreshCharts(),
  );
  byId<HTMLSelectElement>("industry-year").addEventListener(
    "change", () => void refreshCharts(),
  );

  void refreshCharts();
  if (location.search) {
    void runSearch();
  }
}

document.addEventListener("DOMContentLoaded", () => void start());
