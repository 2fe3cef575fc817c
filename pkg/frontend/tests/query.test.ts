import { describe, expect, it } from "vitest";

import {
  DEFAULT_PAGE_SIZE,
  MAX_PAGE_SIZE,
  QueryFormState,
  emptyForm,
  fromUrlParams,
  parseYears,
  toExportQuery,
  toSearchParams,
  toUrlParams,
  validateForm,
} from "../src/query.js";

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function randomForm(rand: () => number): QueryFormState {
  const pick = <T>(pool: T[], max: number): T[] => {
    const n = Math.floor(rand() * (max + 1));
    return pool.filter(() => rand() < 0.5).slice(0, n);
  };
  const yearFrom = rand() < 0.5 ? 2020 + Math.floor(rand() * 5) : null;
  const yearTo =
    yearFrom !== null && rand() < 0.7
      ? yearFrom + Math.floor(rand() * 3)
      : yearFrom;
  return {
    keywords: pick(["artificial_intelligence", "nlp", "chatbot", "agi"], 3),
    patterns: rand() < 0.3 ? ["model risk"] : [],
    yearFrom,
    yearTo,
    sections: pick(["1", "1A", "7"], 2),
    companies: rand() < 0.4 ? ["Fixture Bancorp"] : [],
    sic: pick(["7372", "6022"], 1),
    page: 1 + Math.floor(rand() * 4),
    pageSize: 1 + Math.floor(rand() * MAX_PAGE_SIZE),
  };
}

describe("validateForm", () => {
  it("accepts the empty form", () => {
    expect(validateForm(emptyForm())).toEqual([]);
  });

  it("mirrors the server page-size bounds", () => {
    expect(validateForm({ ...emptyForm(), pageSize: 0 })).not.toEqual([]);
    expect(validateForm({ ...emptyForm(), pageSize: MAX_PAGE_SIZE + 1 }))
      .not.toEqual([]);
    expect(validateForm({ ...emptyForm(), pageSize: MAX_PAGE_SIZE }))
      .toEqual([]);
  });

  it("rejects page below one", () => {
    expect(validateForm({ ...emptyForm(), page: 0 })).not.toEqual([]);
  });

  it("rejects reversed year ranges", () => {
    expect(
      validateForm({ ...emptyForm(), yearFrom: 2024, yearTo: 2020 }),
    ).not.toEqual([]);
  });

  it("rejects blank ad-hoc patterns", () => {
    expect(validateForm({ ...emptyForm(), patterns: ["  "] })).not.toEqual([]);
  });
});

describe("search params", () => {
  it("serializes every populated field", () => {
    const form: QueryFormState = {
      ...emptyForm(),
      keywords: ["nlp", "agi"],
      patterns: ["model risk"],
      yearFrom: 2023,
      yearTo: 2024,
      sections: ["1A"],
      companies: ["2222222"],
      sic: ["6022"],
      page: 2,
      pageSize: 50,
    };
    const params = toSearchParams(form);
    expect(params.getAll("keyword")).toEqual(["nlp", "agi"]);
    expect(params.getAll("pattern")).toEqual(["model risk"]);
    expect(params.get("years")).toBe("2023..2024");
    expect(params.getAll("section")).toEqual(["1A"]);
    expect(params.get("page")).toBe("2");
    expect(params.get("page_size")).toBe("50");
  });

  it("collapses a single year", () => {
    const params = toSearchParams({
      ...emptyForm(), yearFrom: 2024, yearTo: 2024,
    });
    expect(params.get("years")).toBe("2024");
  });

  it("export query drops pagination and empty fields", () => {
    const query = toExportQuery({
      ...emptyForm(), keywords: ["nlp"], yearFrom: 2024, yearTo: 2024,
      page: 3, pageSize: 10,
    });
    expect(query).toEqual({ keywords: ["nlp"], years: "2024" });
  });
});

describe("url round-trip", () => {
  it("state survives the url for 200 random forms", () => {
    const rand = mulberry32(20250401);
    for (let i = 0; i < 200; i++) {
      const form = randomForm(rand);
      const encoded = toUrlParams(form).toString();
      const decoded = fromUrlParams(new URLSearchParams(encoded));
      expect(decoded).toEqual(form);
    }
  });

  it("defaults are omitted from the url", () => {
    expect(toUrlParams(emptyForm()).toString()).toBe("");
    const decoded = fromUrlParams(new URLSearchParams(""));
    expect(decoded).toEqual(emptyForm());
    expect(decoded.pageSize).toBe(DEFAULT_PAGE_SIZE);
  });

  it("parseYears handles ranges and blanks", () => {
    expect(parseYears("2020..2024")).toEqual([2020, 2024]);
    expect(parseYears("2024")).toEqual([2024, 2024]);
    expect(parseYears("")).toEqual([null, null]);
  });
});
