/** UI state, kept apart from the DOM so the invariants are testable. */

import type { Descriptor } from "./api.js";

// Mirrors the service's radius clamp; the slider never requests values
// the API would silently rewrite.
export const MIN_RADIUS_M = 50;
export const MAX_RADIUS_M = 2000;

export function clampRadius(value: number): number {
  if (Number.isNaN(value)) return MIN_RADIUS_M;
  return Math.min(MAX_RADIUS_M, Math.max(MIN_RADIUS_M, value));
}

export interface ConversationEntry {
  readonly question: string;
  readonly answer: string | null;
  readonly failed: boolean;
}

export interface Selection {
  lat: number;
  lon: number;
}

type Listener = () => void;

export class UiState {
  selected: Selection | null = null;
  radiusM = 300;
  descriptor: Descriptor | null = null;
  preprompt: string | null = null;
  conversation: ConversationEntry[] = [];
  embeddingLayerOn = false;
  embeddingsAvailable = true;

  private listeners: Listener[] = [];

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  /** New selection: the conversation is per-location and starts empty. */
  select(lat: number, lon: number): void {
    this.selected = { lat, lon };
    this.conversation = [];
    this.emit();
  }

  setRadius(value: number): void {
    this.radiusM = clampRadius(value);
    this.emit();
  }

  describeLoaded(descriptor: Descriptor, preprompt: string): void {
    this.descriptor = descriptor;
    this.preprompt = preprompt;
    this.emit();
  }

  askStarted(question: string): ConversationEntry {
    const entry: ConversationEntry = { question, answer: null, failed: false };
    this.conversation = [...this.conversation, entry];
    this.emit();
    return entry;
  }

  /**
   * Resolve a pending entry. Entries are replaced, never mutated, and a
   * resolved entry is frozen: once answered it cannot change again.
   */
  askResolved(entry: ConversationEntry, answer: string): ConversationEntry {
    return this.replace(entry, Object.freeze({ ...entry, answer, failed: false }));
  }

  askFailed(entry: ConversationEntry): ConversationEntry {
    return this.replace(entry, { ...entry, failed: true });
  }

  /** Retry resets a failed entry to pending; answered entries stay put. */
  askRetried(entry: ConversationEntry): ConversationEntry {
    if (entry.answer !== null) return entry;
    return this.replace(entry, { question: entry.question, answer: null, failed: false });
  }

  private replace(
    previous: ConversationEntry,
    next: ConversationEntry,
  ): ConversationEntry {
    const index = this.conversation.indexOf(previous);
    if (index < 0 || previous.answer !== null) return previous;
    this.conversation = [
      ...this.conversation.slice(0, index),
      next,
      ...this.conversation.slice(index + 1),
    ];
    this.emit();
    return next;
  }

  toggleEmbeddingLayer(): boolean {
    this.embeddingLayerOn = !this.embeddingLayerOn;
    this.emit();
    return this.embeddingLayerOn;
  }

  embeddingsMissing(): void {
    this.embeddingsAvailable = false;
    this.embeddingLayerOn = false;
    this.emit();
  }
}
