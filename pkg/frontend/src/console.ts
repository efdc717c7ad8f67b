// Session controller: wires the API client, state, and DOM together.
// Every mutation goes request -> response -> state -> render; a failed
// request shows the banner and leaves the rest of the state untouched.

import { ApiClient, isAbortError } from "./api.js";
import { clampRect, isZeroArea, rectFromDrag, toCropBox } from "./crop.js";
import type { CropRect } from "./crop.js";
import { renderConsole } from "./render.js";
import { cropBoxOf, initialState, recordRequest } from "./state.js";
import type { ConsoleState } from "./state.js";
import type {
  DocumentSummary,
  Dot,
  SearchRequestBody,
  SearchResponse,
} from "./types.js";

const DEFAULT_K = 25;

export class Console {
  readonly state: ConsoleState = initialState();
  private cards: DocumentSummary[] = [];
  private seq = 0; // only the latest response may touch the state

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
    private readonly k: number = DEFAULT_K,
  ) {}

  async start(): Promise<void> {
    const listing = await this.api.listDocuments();
    this.cards = listing.documents;
    this.render();
  }

  async loadCard(signature: string): Promise<void> {
    const card =
      this.cards.find((d) => d.signature === signature) ??
      (await this.api.getDocument(signature));
    this.state.currentSignature = signature;
    this.state.card = card;
    this.state.cropRect = null;
    this.state.refineTerms = [];
    await this.runSearch({ signature, k: this.k });
  }

  /** Crop drag in image pixels; a zero-area drag issues no request. */
  async dragCrop(x0: number, y0: number, x1: number, y1: number): Promise<void> {
    if (!this.state.card || !this.state.currentSignature) return;
    const rect = clampRect(
      rectFromDrag(x0, y0, x1, y1),
      this.state.card.width,
      this.state.card.height,
    );
    if (isZeroArea(rect)) return;
    await this.applyCrop(rect);
  }

  private async applyCrop(rect: CropRect): Promise<void> {
    const body: SearchRequestBody = {
      signature: this.state.currentSignature!,
      cropBox: toCropBox(rect),
      k: this.k,
    };
    if (this.state.refineTerms.length) body.refine = [...this.state.refineTerms];
    await this.runSearch(body, () => {
      this.state.cropRect = rect;
    });
  }

  /** Chip click: term joins the refinement set; crop context is preserved. */
  async clickChip(term: string): Promise<void> {
    if (!this.state.currentSignature || this.state.refineTerms.includes(term)) return;
    const refine = [...this.state.refineTerms, term];
    const body: SearchRequestBody = {
      signature: this.state.currentSignature,
      k: this.k,
      refine,
    };
    const crop = cropBoxOf(this.state);
    if (crop) body.cropBox = crop;
    await this.runSearch(body, () => {
      this.state.refineTerms = refine;
    });
  }

  /** Dot click: object-scoped search mapped back to scenes. */
  async clickDot(dot: Dot): Promise<void> {
    if (!this.state.currentSignature) return;
    const body = { signature: this.state.currentSignature, box: dot.box, k: this.k };
    const ticket = ++this.seq;
    recordRequest(this.state, { kind: "objectSearch", body });
    try {
      const resp = await this.api.objectSearch(body);
      if (ticket !== this.seq) return;
      this.state.error = null;
      this.state.grid = resp.scenes.map((scene) => ({ kind: "scene", scene }));
      this.render();
    } catch (err) {
      this.fail(ticket, err);
    }
  }

  private async runSearch(
    body: SearchRequestBody,
    onApply?: () => void,
  ): Promise<void> {
    const ticket = ++this.seq;
    recordRequest(this.state, { kind: "search", body });
    try {
      const resp = await this.api.search(body);
      if (ticket !== this.seq) return; // superseded by a newer request
      onApply?.();
      this.applySearchResponse(resp);
      this.render();
    } catch (err) {
      this.fail(ticket, err);
    }
  }

  private applySearchResponse(resp: SearchResponse): void {
    this.state.error = null;
    this.state.grid = resp.results.map((result) => ({ kind: "result", result }));
    this.state.chips = resp.annotations;
    this.state.activeDots = resp.dots;
    this.state.conformity = resp.conformity;
  }

  private fail(ticket: number, err: unknown): void {
    if (isAbortError(err) || ticket !== this.seq) return; // cancelled, not an error
    this.state.error = err instanceof Error ? err.message : String(err);
    this.render(); // banner only; the rest of the state is unchanged
  }

  render(): void {
    this.root.replaceChildren(renderConsole(this.state, this.cards));
    this.bind();
  }

  private bind(): void {
    for (const tile of this.root.querySelectorAll<HTMLElement>(".card-tile")) {
      tile.addEventListener("click", () => {
        void this.loadCard(tile.dataset.signature!);
      });
    }
    for (const chip of this.root.querySelectorAll<HTMLElement>("button.chip")) {
      chip.addEventListener("click", () => {
        void this.clickChip(chip.dataset.term!);
      });
    }
    for (const dotNode of this.root.querySelectorAll<HTMLElement>("button.dot")) {
      dotNode.addEventListener("click", (event) => {
        event.stopPropagation(); // a dot click is not a crop gesture
        const dot = this.state.activeDots.find(
          (d) => JSON.stringify(d.box) === dotNode.dataset.box && d.show,
        );
        if (dot) void this.clickDot(dot);
      });
    }
    const image = this.root.querySelector<HTMLElement>(".card-image");
    if (image && this.state.card) {
      attachCropGesture(image, this.state.card, (x0, y0, x1, y1) => {
        void this.dragCrop(x0, y0, x1, y1);
      });
    }
  }
}

/** Translate mouse drags on the tile into image-pixel coordinates. */
export function attachCropGesture(
  image: HTMLElement,
  card: DocumentSummary,
  onDrag: (x0: number, y0: number, x1: number, y1: number) => void,
): void {
  let start: { x: number; y: number } | null = null;

  const toImage = (event: MouseEvent): { x: number; y: number } => {
    const rect = image.getBoundingClientRect();
    const sx = rect.width ? card.width / rect.width : 1;
    const sy = rect.height ? card.height / rect.height : 1;
    return { x: (event.clientX - rect.left) * sx, y: (event.clientY - rect.top) * sy };
  };

  image.addEventListener("mousedown", (event) => {
    start = toImage(event);
  });
  image.addEventListener("mouseup", (event) => {
    if (!start) return;
    const end = toImage(event);
    onDrag(start.x, start.y, end.x, end.y);
    start = null;
  });
  image.addEventListener("mouseleave", () => {
    start = null;
  });
}
