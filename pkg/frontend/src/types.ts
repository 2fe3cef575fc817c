/** Payload shapes of the secmine corpus API. */

export interface SearchResult {
  accession_number: string;
  cik: number;
  company_name: string;
  sic: string;
  reporting_year: number;
  item_id: string;
  sentence_index: number;
  sentence_text: string;
  keyword_ids: string[];
  /** Server-computed highlight offsets into sentence_text. */
  highlights: [number, number][];
}

export interface SearchResponse {
  total: number;
  page: number;
  page_size: number;
  results: SearchResult[];
}

export interface StatRow {
  year: number;
  scope: string;
  sic_group: string | null;
  metric: string;
  value: number;
}

export interface StatsRowsResponse {
  rows: StatRow[];
}

export interface ContextSentence {
  index: number;
  text: string;
  current: boolean;
}

export interface ContextResponse {
  sentences: ContextSentence[];
}

export interface MetaCompany {
  cik: number;
  name: string;
}

export interface MetaResponse {
  years: number[];
  sections: string[];
  keywords: string[];
  companies: MetaCompany[];
  sic: string[];
  total_sentences: number;
  total_matches: number;
}

export type ExportFormat = "csv" | "xlsx";
