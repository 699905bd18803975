/** Map explorer wiring: leaflet map, descriptor panel, ask box, layers. */

import L from "leaflet";

import { ApiError, ServiceClient } from "./api.js";
import type { EmbeddingCollection } from "./api.js";
import { renderDescriptor } from "./panel.js";
import { MAX_RADIUS_M, MIN_RADIUS_M, UiState } from "./state.js";
import type { ConversationEntry } from "./state.js";

const OSM_TILES = "https://tile.openstreetmap.org/{z}/{x}/{y}.png";
const OSM_ATTRIBUTION = "&copy; OpenStreetMap contributors";

export interface AppOptions {
  /** Radius slider changes coalesce into one refetch per quiet period. */
  debounceMs?: number;
  toastMs?: number;
  center?: [number, number];
  zoom?: number;
  tileUrl?: string;
}

export interface AppElements {
  mapContainer: HTMLDivElement;
  panel: HTMLDivElement;
  conversation: HTMLDivElement;
  askForm: HTMLFormElement;
  askInput: HTMLInputElement;
  askButton: HTMLButtonElement;
  radiusSlider: HTMLInputElement;
  radiusValue: HTMLSpanElement;
  embeddingToggle: HTMLButtonElement;
  toast: HTMLDivElement;
}

export class App {
  readonly map: L.Map;
  readonly state = new UiState();
  readonly elements: AppElements;

  private circle: L.Circle | null = null;
  private embeddingLayer: L.LayerGroup | null = null;
  private embeddingCache: EmbeddingCollection | null = null;
  private prepromptAbort: AbortController | null = null;
  private radiusTimer: number | undefined;
  private toastTimer: number | undefined;
  private askChain: Promise<void> = Promise.resolve();
  private readonly debounceMs: number;
  private readonly toastMs: number;

  constructor(
    root: HTMLElement,
    readonly api: ServiceClient,
    options: AppOptions = {},
  ) {
    this.debounceMs = options.debounceMs ?? 250;
    this.toastMs = options.toastMs ?? 4000;
    this.elements = buildLayout(root);

    this.map = L.map(this.elements.mapContainer, {
      zoomAnimation: false,
      fadeAnimation: false,
      markerZoomAnimation: false,
    });
    this.map.setView(options.center ?? [41.013, 28.955], options.zoom ?? 15);
    L.tileLayer(options.tileUrl ?? OSM_TILES, {
      attribution: OSM_ATTRIBUTION,
      maxZoom: 19,
    }).addTo(this.map);

    this.map.on("click", (event) => {
      const { latlng } = event as L.LeafletMouseEvent;
      void this.selectLocation(latlng.lat, latlng.lng);
    });
    this.wireControls();
    this.state.onChange(() => this.renderConversation());
  }

  /** Click entry point; awaitable so tests can observe completion. */
  async selectLocation(lat: number, lon: number): Promise<void> {
    this.state.select(lat, lon);
    this.drawCircle();
    this.updateAskEnabled();
    await this.fetchPreprompt();
  }

  private drawCircle(): void {
    const selected = this.state.selected;
    if (!selected) return;
    if (this.circle === null) {
      this.circle = L.circle([selected.lat, selected.lon], {
        radius: this.state.radiusM,
        color: "#2b6cb0",
        weight: 2,
        fillOpacity: 0.08,
      }).addTo(this.map);
    } else {
      this.circle.setLatLng([selected.lat, selected.lon]);
      this.circle.setRadius(this.state.radiusM);
    }
  }

  getCircle(): L.Circle | null {
    return this.circle;
  }

  getEmbeddingLayer(): L.LayerGroup | null {
    return this.embeddingLayer;
  }

  private async fetchPreprompt(): Promise<void> {
    const selected = this.state.selected;
    if (!selected) return;
    // A newer selection or radius supersedes any in-flight request.
    this.prepromptAbort?.abort();
    const controller = new AbortController();
    this.prepromptAbort = controller;
    try {
      const payload = await this.api.preprompt(
        selected.lat,
        selected.lon,
        this.state.radiusM,
        controller.signal,
      );
      this.state.describeLoaded(payload.descriptor, payload.preprompt);
      renderDescriptor(this.elements.panel, payload.descriptor, payload.preprompt);
    } catch (err) {
      if (isAbort(err)) return;
      // The panel keeps its previous contents on failure.
      this.showToast(describeError(err));
    }
  }

  private wireControls(): void {
    const { radiusSlider, radiusValue, askForm, askInput, embeddingToggle } =
      this.elements;

    radiusSlider.min = String(MIN_RADIUS_M);
    radiusSlider.max = String(MAX_RADIUS_M);
    radiusSlider.value = String(this.state.radiusM);
    radiusSlider.addEventListener("input", () => {
      this.state.setRadius(Number(radiusSlider.value));
      radiusValue.textContent = `${this.state.radiusM} m`;
      this.drawCircle();
      window.clearTimeout(this.radiusTimer);
      this.radiusTimer = window.setTimeout(() => {
        void this.fetchPreprompt();
      }, this.debounceMs);
    });

    askInput.addEventListener("input", () => this.updateAskEnabled());
    askForm.addEventListener("submit", (event) => {
      event.preventDefault();
      const question = askInput.value.trim();
      if (question === "" || !this.state.selected) return;
      askInput.value = "";
      this.updateAskEnabled();
      void this.submitQuestion(question);
    });

    embeddingToggle.addEventListener("click", () => {
      void this.toggleEmbeddingLayer();
    });
  }

  private updateAskEnabled(): void {
    const { askInput, askButton } = this.elements;
    askButton.disabled =
      askInput.value.trim() === "" || this.state.selected === null;
  }

  /**
   * Queue a question. Requests run strictly one at a time in submission
   * order, so each answer lands on the entry that asked for it.
   */
  submitQuestion(question: string): Promise<void> {
    const entry = this.state.askStarted(question);
    this.askChain = this.askChain.then(() => this.runAsk(entry));
    return this.askChain;
  }

  private async runAsk(entry: ConversationEntry): Promise<void> {
    const selected = this.state.selected;
    if (!selected) return;
    try {
      const reply = await this.api.ask(
        selected.lat,
        selected.lon,
        entry.question,
        this.state.radiusM,
      );
      this.state.askResolved(entry, reply.answer);
    } catch (err) {
      this.state.askFailed(entry);
      this.showToast(describeError(err));
    }
  }

  private renderConversation(): void {
    const container = this.elements.conversation;
    container.replaceChildren();
    for (const entry of this.state.conversation) {
      const item = document.createElement("div");
      item.className = "qa";
      const question = document.createElement("div");
      question.className = "question";
      question.textContent = entry.question;
      item.appendChild(question);
      const answer = document.createElement("div");
      answer.className = "answer";
      if (entry.answer !== null) {
        answer.textContent = entry.answer;
      } else if (entry.failed) {
        const retry = document.createElement("button");
        retry.className = "retry";
        retry.type = "button";
        retry.textContent = "retry";
        retry.addEventListener("click", () => {
          const pending = this.state.askRetried(entry);
          this.askChain = this.askChain.then(() => this.runAsk(pending));
        });
        answer.appendChild(retry);
      } else {
        answer.textContent = "…";
        answer.classList.add("pending");
      }
      item.appendChild(answer);
      container.appendChild(item);
    }
  }

  async toggleEmbeddingLayer(): Promise<void> {
    if (!this.state.embeddingsAvailable) return;
    if (this.state.embeddingLayerOn) {
      this.state.toggleEmbeddingLayer();
      if (this.embeddingLayer) this.map.removeLayer(this.embeddingLayer);
      return;
    }
    if (this.embeddingCache === null) {
      try {
        this.embeddingCache = await this.api.embeddings();
      } catch (err) {
        if (err instanceof ApiError && err.status === 404) {
          this.state.embeddingsMissing();
          this.elements.embeddingToggle.disabled = true;
          this.elements.embeddingToggle.title = err.message;
        } else {
          this.showToast(describeError(err));
        }
        return;
      }
      this.embeddingLayer = L.layerGroup(
        this.embeddingCache.features.map((feature) => {
          const [lon, lat] = feature.geometry.coordinates;
          return L.circleMarker([lat, lon], {
            radius: 6,
            color: feature.properties.color,
            fillColor: feature.properties.color,
            fillOpacity: 0.8,
            weight: 1,
          });
        }),
      );
    }
    this.state.toggleEmbeddingLayer();
    if (this.embeddingLayer) this.embeddingLayer.addTo(this.map);
  }

  showToast(message: string): void {
    const { toast } = this.elements;
    toast.textContent = message;
    toast.classList.add("visible");
    window.clearTimeout(this.toastTimer);
    this.toastTimer = window.setTimeout(() => {
      toast.classList.remove("visible");
    }, this.toastMs);
  }

  destroy(): void {
    window.clearTimeout(this.radiusTimer);
    window.clearTimeout(this.toastTimer);
    this.prepromptAbort?.abort();
    this.map.remove();
  }
}

function buildLayout(root: HTMLElement): AppElements {
  root.classList.add("cartoprompt-ui");
  root.innerHTML = `
    <div class="map-container"></div>
    <aside class="side">
      <div class="controls">
        <label class="radius-control">
          radius
          <input type="range" class="radius-slider" step="10" />
          <span class="radius-value">300 m</span>
        </label>
        <button type="button" class="embedding-toggle">embedding layer</button>
      </div>
      <div class="panel">Click the map to describe a location.</div>
      <div class="conversation"></div>
      <form class="ask">
        <input type="text" class="ask-input" placeholder="Ask about this area" />
        <button type="submit" class="ask-button" disabled>ask</button>
      </form>
    </aside>
    <div class="toast"></div>
  `;
  const query = <T extends HTMLElement>(selector: string): T => {
    const node = root.querySelector(selector);
    if (!node) throw new Error(`layout is missing ${selector}`);
    return node as T;
  };
  return {
    mapContainer: query(".map-container"),
    panel: query(".panel"),
    conversation: query(".conversation"),
    askForm: query(".ask"),
    askInput: query(".ask-input"),
    askButton: query(".ask-button"),
    radiusSlider: query(".radius-slider"),
    radiusValue: query(".radius-value"),
    embeddingToggle: query(".embedding-toggle"),
    toast: query(".toast"),
  };
}

function isAbort(err: unknown): boolean {
  return err instanceof DOMException && err.name === "AbortError";
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return "service unreachable";
}

export function createApp(
  root: HTMLElement,
  api: ServiceClient,
  options: AppOptions = {},
): App {
  return new App(root, api, options);
}
