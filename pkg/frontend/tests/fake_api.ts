// In-memory /v1 stand-in that mirrors the API contract the console relies
// on: a crop covering the whole image is the same query as the image, and
// refine terms filter the result set.

import type {
  BoxTuple,
  DocumentSummary,
  ObjectSearchRequestBody,
  SearchRequestBody,
  SearchResponse,
  ScoredResult,
} from "../src/types.js";

export const SIG_A = "aa".repeat(16);
export const SIG_B = "bb".repeat(16);
export const SIG_C = "cc".repeat(16);
export const SIG_D = "dd".repeat(16);

export const CARD_A: DocumentSummary = {
  signature: SIG_A,
  width: 200,
  height: 100,
  annotations: [
    { term: "lamp", weight: 0.9 },
    { term: "desk", weight: 0.4 },
  ],
  category: { "3": 0.8 },
  detections: [
    { box: [10, 10, 40, 30], category: "lamp", confidence: 0.95 },
    { box: [120, 40, 60, 50], category: "desk", confidence: 0.85 },
  ],
};

export const CARD_B: DocumentSummary = {
  signature: SIG_B,
  width: 100,
  height: 100,
  annotations: [{ term: "vase", weight: 0.7 }],
  category: {},
  detections: [],
};

const RESULT_TERMS: Record<string, string[]> = {
  [SIG_B]: ["lamp", "vase"],
  [SIG_C]: ["desk"],
  [SIG_D]: ["lamp", "desk"],
};

function result(signature: string, distance: number): ScoredResult {
  return {
    signature,
    hammingDistance: distance,
    similarity: 1 - distance / 64,
    rerankScore: 0,
    leafId: 0,
    source: "visual",
  };
}

const SHOWN_DOT = { box: [10, 10, 40, 30] as BoxTuple, category: "lamp", show: true };
const SUPPRESSED_DOT = {
  box: [120, 40, 60, 50] as BoxTuple,
  category: "desk",
  show: false,
};

function isFullBox(box: BoxTuple | undefined, doc: DocumentSummary): boolean {
  return (
    !box ||
    (box[0] === 0 && box[1] === 0 && box[2] === doc.width && box[3] === doc.height)
  );
}

export class FakeApi {
  searchBodies: SearchRequestBody[] = [];
  objectBodies: ObjectSearchRequestBody[] = [];
  failNext = false;

  readonly fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    if (this.failNext) {
      this.failNext = false;
      throw new TypeError("network down");
    }
    const url = new URL(input);
    if (url.pathname === "/v1/documents") {
      return json({ total: 2, documents: [CARD_A, CARD_B] });
    }
    if (url.pathname.startsWith("/v1/documents/")) {
      const sig = url.pathname.split("/").pop();
      const doc = [CARD_A, CARD_B].find((d) => d.signature === sig);
      return doc ? json(doc) : json({ detail: "unknown signature" }, 404);
    }
    if (url.pathname === "/v1/search") {
      const body = JSON.parse(String(init?.body)) as SearchRequestBody;
      this.searchBodies.push(body);
      return json(this.search(body));
    }
    if (url.pathname === "/v1/object-search") {
      const body = JSON.parse(String(init?.body)) as ObjectSearchRequestBody;
      this.objectBodies.push(body);
      return json({
        scenes: [
          { signature: SIG_C, distance: 3 },
          { signature: SIG_D, distance: 9 },
        ],
      });
    }
    return json({ detail: `no route ${url.pathname}` }, 404);
  };

  search(body: SearchRequestBody): SearchResponse {
    const whole = isFullBox(body.cropBox, CARD_A);
    let results = whole
      ? [result(SIG_B, 4), result(SIG_C, 10), result(SIG_D, 18)]
      : [result(SIG_D, 2), result(SIG_B, 22)];
    for (const term of body.refine ?? []) {
      results = results.filter((r) => RESULT_TERMS[r.signature]?.includes(term));
    }
    return {
      results,
      annotations: [
        { term: "lamp", weight: 2.5 },
        { term: "desk", weight: 1.2 },
      ],
      conformity: 0.66,
      dots: [SHOWN_DOT, SUPPRESSED_DOT],
      partial: false,
    };
  }
}

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
