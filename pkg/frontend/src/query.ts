/** Query form state: validation and URL round-tripping.
 *
 * The submitted form always serializes to a request the server accepts;
 * the bounds checked here mirror the server's own rules, so a form that
 * validates locally cannot draw a parameter-level 400.
 */

export const MAX_PAGE_SIZE = 500;
export const DEFAULT_PAGE_SIZE = 25;

export interface QueryFormState {
  keywords: string[];
  patterns: string[];
  yearFrom: number | null;
  yearTo: number | null;
  sections: string[];
  companies: string[];
  sic: string[];
  page: number;
  pageSize: number;
}

export function emptyForm(): QueryFormState {
  return {
    keywords: [],
    patterns: [],
    yearFrom: null,
    yearTo: null,
    sections: [],
    companies: [],
    sic: [],
    page: 1,
    pageSize: DEFAULT_PAGE_SIZE,
  };
}

export interface FieldError {
  field: string;
  message: string;
}

export function validateForm(form: QueryFormState): FieldError[] {
  const errors: FieldError[] = [];
  if (!Number.isInteger(form.page) || form.page < 1) {
    errors.push({ field: "page", message: "page must be at least 1" });
  }
  if (
    !Number.isInteger(form.pageSize) ||
    form.pageSize < 1 ||
    form.pageSize > MAX_PAGE_SIZE
  ) {
    errors.push({
      field: "pageSize",
      message: `page size must be between 1 and ${MAX_PAGE_SIZE}`,
    });
  }
  if (form.yearFrom !== null && form.yearTo !== null && form.yearFrom > form.yearTo) {
    errors.push({ field: "years", message: "year range is reversed" });
  }
  for (const pattern of form.patterns) {
    if (!pattern.trim()) {
      errors.push({ field: "patterns", message: "empty pattern" });
    }
  }
  return errors;
}

function yearsParam(form: QueryFormState): string {
  if (form.yearFrom === null && form.yearTo === null) return "";
  const from = form.yearFrom ?? form.yearTo;
  const to = form.yearTo ?? form.yearFrom;
  return from === to ? String(from) : `${from}..${to}`;
}

/** Parameters for GET /api/search. */
export function toSearchParams(form: QueryFormState): URLSearchParams {
  const params = new URLSearchParams();
  for (const kw of form.keywords) params.append("keyword", kw);
  for (const pat of form.patterns) params.append("pattern", pat);
  const years = yearsParam(form);
  if (years) params.set("years", years);
  for (const sec of form.sections) params.append("section", sec);
  for (const co of form.companies) params.append("company", co);
  for (const code of form.sic) params.append("sic", code);
  params.set("page", String(form.page));
  params.set("page_size", String(form.pageSize));
  return params;
}

/** Body for POST /api/export: same filters, no pagination. */
export function toExportQuery(form: QueryFormState): Record<string, unknown> {
  const query: Record<string, unknown> = {};
  if (form.keywords.length) query.keywords = form.keywords;
  const years = yearsParam(form);
  if (years) query.years = years;
  if (form.sections.length) query.sections = form.sections;
  if (form.companies.length) query.companies = form.companies;
  if (form.sic.length) query.sic = form.sic;
  return query;
}

/** Shareable URL fragment for the current session. */
export function toUrlParams(form: QueryFormState): URLSearchParams {
  const params = new URLSearchParams();
  for (const kw of form.keywords) params.append("kw", kw);
  for (const pat of form.patterns) params.append("pat", pat);
  const years = yearsParam(form);
  if (years) params.set("years", years);
  for (const sec of form.sections) params.append("sec", sec);
  for (const co of form.companies) params.append("co", co);
  for (const code of form.sic) params.append("sic", code);
  if (form.page !== 1) params.set("page", String(form.page));
  if (form.pageSize !== DEFAULT_PAGE_SIZE) {
    params.set("ps", String(form.pageSize));
  }
  return params;
}

export function parseYears(spec: string): [number | null, number | null] {
  const trimmed = spec.trim();
  if (!trimmed) return [null, null];
  const range = trimmed.split("..");
  const from = parseInt(range[0] ?? "", 10);
  const to = parseInt(range[1] ?? range[0] ?? "", 10);
  return [Number.isNaN(from) ? null : from, Number.isNaN(to) ? null : to];
}

export function fromUrlParams(params: URLSearchParams): QueryFormState {
  const [yearFrom, yearTo] = parseYears(params.get("years") ?? "");
  const page = parseInt(params.get("page") ?? "1", 10);
  const pageSize = parseInt(params.get("ps") ?? String(DEFAULT_PAGE_SIZE), 10);
  return {
    keywords: params.getAll("kw"),
    patterns: params.getAll("pat"),
    yearFrom,
    yearTo,
    sections: params.getAll("sec"),
    companies: params.getAll("co"),
    sic: params.getAll("sic"),
    page: Number.isNaN(page) ? 1 : page,
    pageSize: Number.isNaN(pageSize) ? DEFAULT_PAGE_SIZE : pageSize,
  };
}
