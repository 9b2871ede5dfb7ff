// Search box with live meta-suggestions, engine toggles and duplicate
// highlighting. One logically-current suggest request at a time: every
// fetch gets a sequence number and responses that lost the race are
// dropped instead of rendered.

import {
  ApiError,
  type Candidate,
  type EngineInfo,
  type HighlightResponse,
  type SuggestResponse,
} from "./api.js";
import { debounce, type Debounced } from "./debounce.js";

export const MAX_RENDERED = 8;
export const DEBOUNCE_MS = 200;

export interface SuggestionApi {
  suggest(q: string, cutoff?: number, engines?: string[]): Promise<SuggestResponse>;
  highlight(q: string, hostSuggestions: string[]): Promise<HighlightResponse>;
  engines(): Promise<{ engines: EngineInfo[] }>;
  toggleEngine(name: string): Promise<{ engine: string; enabled: boolean }>;
}

const SKELETON = `
  <div class="search">
    <input class="query-input" type="text" autocomplete="off"
           placeholder="Type a search query..." />
    <ul class="suggestions" hidden></ul>
  </div>
  <div class="error-banner" hidden></div>
  <div class="engines"></div>
  <div class="host-compare">
    <textarea class="host-list" rows="4"
              placeholder="Paste the host page's own suggestions, one per line"></textarea>
    <button class="apply-host" type="button">Compare</button>
  </div>
  <div class="toast" hidden></div>
`;

export class SuggestApp {
  private readonly input: HTMLInputElement;
  private readonly dropdown: HTMLUListElement;
  private readonly banner: HTMLElement;
  private readonly enginesBox: HTMLElement;
  private readonly hostArea: HTMLTextAreaElement;
  private readonly toast: HTMLElement;

  private readonly debouncedFetch: Debounced<[string]>;
  private requestSeq = 0;
  private candidates: Candidate[] = [];
  private overlapNames = new Set<string>();
  private hostList: string[] = [];
  private activeIndex = -1;

  constructor(root: HTMLElement, private readonly api: SuggestionApi) {
    root.innerHTML = SKELETON;
    this.input = root.querySelector(".query-input") as HTMLInputElement;
    this.dropdown = root.querySelector(".suggestions") as HTMLUListElement;
    this.banner = root.querySelector(".error-banner") as HTMLElement;
    this.enginesBox = root.querySelector(".engines") as HTMLElement;
    this.hostArea = root.querySelector(".host-list") as HTMLTextAreaElement;
    this.toast = root.querySelector(".toast") as HTMLElement;

    this.debouncedFetch = debounce((text: string) => {
      void this.fetchSuggestions(text);
    }, DEBOUNCE_MS);

    this.input.addEventListener("input", () => this.onInput(this.input.value));
    this.input.addEventListener("keydown", (event) => this.onKeyDown(event));
    this.dropdown.addEventListener("click", (event) => {
      const item = (event.target as HTMLElement).closest("li[data-display]");
      if (item) void this.selectSuggestion(item.getAttribute("data-display") ?? "");
    });
    (root.querySelector(".apply-host") as HTMLButtonElement).addEventListener(
      "click",
      () => void this.applyHostList(),
    );
  }

  /** Debounced entry point for typing; empty input clears the dropdown. */
  onInput(text: string): void {
    if (!text.trim()) {
      this.debouncedFetch.cancel();
      this.requestSeq += 1; // anything in flight is now stale
      this.candidates = [];
      this.renderSuggestions();
      return;
    }
    this.debouncedFetch(text);
  }

  /** Clicked (or keyboard-selected) suggestion becomes the next query. */
  async selectSuggestion(display: string): Promise<void> {
    if (!display) return;
    this.input.value = display;
    this.debouncedFetch.cancel();
    await this.fetchSuggestions(display);
  }

  async fetchSuggestions(text: string): Promise<void> {
    const seq = ++this.requestSeq;
    let response: SuggestResponse;
    try {
      response = await this.api.suggest(text);
    } catch (error) {
      if (seq !== this.requestSeq) return; // a newer request owns the UI
      this.candidates = [];
      this.renderSuggestions();
      this.showBanner(error instanceof Error ? error.message : "service unreachable");
      return;
    }
    if (seq !== this.requestSeq) return;
    this.hideBanner();
    this.candidates = response.candidates;
    await this.refreshOverlapFlags(text, seq);
    if (seq !== this.requestSeq) return;
    this.activeIndex = -1;
    this.renderSuggestions();
  }

  /** Re-check duplicate flags for the current meta list, when a host list is set. */
  private async refreshOverlapFlags(query: string, seq: number): Promise<void> {
    if (this.hostList.length === 0) {
      this.overlapNames = new Set();
      return;
    }
    try {
      const response = await this.api.highlight(query, this.hostList);
      if (seq !== this.requestSeq) return;
      this.overlapNames = new Set(
        response.suggestions.filter((s) => s.overlap).map((s) => s.name),
      );
    } catch {
      this.overlapNames = new Set();
    }
  }

  async applyHostList(): Promise<void> {
    this.hostList = this.hostArea.value
      .split("\n")
      .map((line) => line.trim())
      .filter((line) => line.length > 0);
    const query = this.input.value;
    if (!query.trim()) return;
    await this.refreshOverlapFlags(query, this.requestSeq);
    this.renderSuggestions();
  }

  async refreshEngines(): Promise<void> {
    const { engines } = await this.api.engines();
    this.enginesBox.replaceChildren(
      ...engines.map((engine) => {
        const pill = document.createElement("button");
        pill.type = "button";
        pill.className = engine.enabled ? "engine-pill" : "engine-pill off";
        pill.dataset.engine = engine.name;
        pill.textContent = engine.name;
        pill.addEventListener("click", () => void this.toggleEngine(engine.name));
        return pill;
      }),
    );
  }

  async toggleEngine(name: string): Promise<void> {
    try {
      await this.api.toggleEngine(name);
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        this.showToast(`unknown engine: ${name}`);
        return;
      }
      throw error;
    }
    await this.refreshEngines();
    if (this.input.value.trim()) {
      await this.fetchSuggestions(this.input.value);
    }
  }

  private onKeyDown(event: KeyboardEvent): void {
    const count = Math.min(this.candidates.length, MAX_RENDERED);
    if (event.key === "ArrowDown" && count > 0) {
      event.preventDefault();
      this.activeIndex = (this.activeIndex + 1) % count;
      this.renderSuggestions();
    } else if (event.key === "ArrowUp" && count > 0) {
      event.preventDefault();
      this.activeIndex = (this.activeIndex - 1 + count) % count;
      this.renderSuggestions();
    } else if (event.key === "Enter" && this.activeIndex >= 0 && this.activeIndex < count) {
      event.preventDefault();
      void this.selectSuggestion(this.candidates[this.activeIndex].display);
    } else if (event.key === "Escape") {
      this.candidates = [];
      this.renderSuggestions();
    }
  }

  private renderSuggestions(): void {
    const visible = this.candidates.slice(0, MAX_RENDERED);
    this.dropdown.replaceChildren(
      ...visible.map((candidate, index) => {
        const item = document.createElement("li");
        item.className = "suggestion";
        if (index === this.activeIndex) item.classList.add("active");
        if (this.overlapNames.has(candidate.name)) item.classList.add("overlap");
        item.dataset.display = candidate.display;
        item.dataset.name = candidate.name;

        const rank = document.createElement("span");
        rank.className = "rank";
        rank.textContent = String(candidate.display_rank);

        const text = document.createElement("span");
        text.className = "text";
        text.textContent = candidate.display;

        const nod = document.createElement("span");
        nod.className = "badge nod";
        nod.textContent = `×${candidate.nod}`;

        const sim = document.createElement("span");
        sim.className = "badge sim";
        sim.textContent = `${candidate.similarity.toFixed(1)}%`;

        const engines = document.createElement("span");
        engines.className = "badge engines";
        engines.textContent = Object.keys(candidate.locs).join(",");

        item.append(rank, text, nod, sim, engines);
        return item;
      }),
    );
    this.dropdown.hidden = visible.length === 0;
  }

  private showBanner(message: string): void {
    this.banner.textContent = `suggestion service error: ${message}`;
    this.banner.hidden = false;
  }

  private hideBanner(): void {
    this.banner.hidden = true;
    this.banner.textContent = "";
  }

  private showToast(message: string): void {
    this.toast.textContent = message;
    this.toast.hidden = false;
    setTimeout(() => {
      this.toast.hidden = true;
    }, 2500);
  }
}
