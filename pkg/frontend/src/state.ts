// Console session state. History is append-only; the grid and chips always
// mirror the latest applied response.

import type { CropRect } from "./crop.js";
import type {
  AnnotationChip,
  BoxTuple,
  DocumentSummary,
  Dot,
  SceneHit,
  ScoredResult,
} from "./types.js";

export interface HistoryEntry {
  kind: "search" | "objectSearch";
  body: unknown;
}

export type GridItem =
  | { kind: "result"; result: ScoredResult }
  | { kind: "scene"; scene: SceneHit };

export interface ConsoleState {
  currentSignature: string | null;
  card: DocumentSummary | null;
  cropRect: CropRect | null;
  refineTerms: string[];
  activeDots: Dot[];
  grid: GridItem[];
  chips: AnnotationChip[];
  conformity: number | null;
  history: HistoryEntry[];
  error: string | null;
}

export function initialState(): ConsoleState {
  return {
    currentSignature: null,
    card: null,
    cropRect: null,
    refineTerms: [],
    activeDots: [],
    grid: [],
    chips: [],
    conformity: null,
    history: [],
    error: null,
  };
}

export function recordRequest(state: ConsoleState, entry: HistoryEntry): void {
  state.history.push(entry); // append-only per session
}

export function cropBoxOf(state: ConsoleState): BoxTuple | undefined {
  if (!state.cropRect) return undefined;
  return [state.cropRect.x, state.cropRect.y, state.cropRect.w, state.cropRect.h];
}
