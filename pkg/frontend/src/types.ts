// Wire types for the /v1 JSON API. The console never computes ranking
// values itself; every displayed number originates in one of these fields.

export type Source = "visual" | "textual" | "objectSearch";

export interface ScoredResult {
  signature: string;
  hammingDistance: number;
  similarity: number;
  rerankScore: number;
  leafId: number;
  source: Source;
}

export interface AnnotationChip {
  term: string;
  weight: number;
}

export type BoxTuple = [number, number, number, number];

export interface Dot {
  box: BoxTuple;
  category: string;
  show: boolean;
}

export interface SearchResponse {
  results: ScoredResult[];
  annotations: AnnotationChip[];
  conformity: number;
  dots: Dot[];
  partial: boolean;
}

export interface SceneHit {
  signature: string;
  distance: number;
}

export interface ObjectSearchResponse {
  scenes: SceneHit[];
}

export interface DetectionSummary {
  box: BoxTuple;
  category: string;
  confidence: number;
}

export interface DocumentSummary {
  signature: string;
  width: number;
  height: number;
  annotations: AnnotationChip[];
  category: Record<string, number>;
  detections: DetectionSummary[];
}

export interface DocumentList {
  total: number;
  documents: DocumentSummary[];
}

export interface SearchRequestBody {
  signature?: string;
  cropBox?: BoxTuple;
  rawEmbedding?: string;
  k?: number;
  enableRerank?: boolean;
  modelId?: string;
  refine?: string[];
}

export interface ObjectSearchRequestBody {
  signature?: string;
  objectId?: string;
  box?: BoxTuple;
  k?: number;
}
