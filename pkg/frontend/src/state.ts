/** Session state for the tuner: debounced inference with latest-wins
 * response ordering, slider snapping to the server-effective omega, and an
 * A/B pin for before/after comparison.
 *
 * Concurrency contract: at most one network request in flight; slider
 * changes during flight are coalesced and issued when it settles; a
 * response is displayed only if no later request has already completed.
 */

import type { InferClient } from "./api.js";

export const DEBOUNCE_MS = 150;
export const SLIDER_STEP = 0.01;

export interface Snapshot {
  image: string;
  omega: number[];
}

export interface SessionEvents {
  onImage?: (snap: Snapshot) => void;
  onOmega?: (omega: number[]) => void;
  onError?: (reason: string) => void;
}

export function quantize(value: number): number {
  const clamped = Math.min(1, Math.max(0, value));
  return Math.round(clamped / SLIDER_STEP) * SLIDER_STEP;
}

export class TunerSession {
  omega: number[];
  displayed: Snapshot | null = null;
  pinned: Snapshot | null = null;

  private source: string | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private nextId = 0;
  private shownId = 0;
  private inFlight = false;
  private dirty = false;

  constructor(
    private readonly client: InferClient,
    readonly p: number,
    private readonly events: SessionEvents = {},
    private readonly debounceMs: number = DEBOUNCE_MS,
  ) {
    this.omega = new Array(p).fill(1);
  }

  /** Load a new source image (base64 PNG) and request inference for it. */
  setImage(image: string): void {
    this.source = image;
    this.schedule();
  }

  /** Slider movement: quantize, update local state, debounce the request. */
  setOmega(index: number, value: number): void {
    if (index < 0 || index >= this.p) return;
    this.omega[index] = quantize(value);
    this.events.onOmega?.([...this.omega]);
    if (this.source !== null) this.schedule();
  }

  pin(): void {
    if (this.displayed) {
      this.pinned = { image: this.displayed.image, omega: [...this.displayed.omega] };
    }
  }

  /** Restore the pinned snapshot without a network round trip, so the
   * restored image is byte-identical to what was pinned. */
  restorePin(): void {
    if (!this.pinned) return;
    this.omega = [...this.pinned.omega];
    this.displayed = { image: this.pinned.image, omega: [...this.pinned.omega] };
    this.shownId = this.nextId; // anything already in flight is now stale
    this.events.onOmega?.([...this.omega]);
    this.events.onImage?.(this.displayed);
  }

  private schedule(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.fire();
    }, this.debounceMs);
  }

  private fire(): void {
    if (this.inFlight) {
      this.dirty = true; // coalesce; reissued when the current one settles
      return;
    }
    if (this.source === null) return;
    const id = ++this.nextId;
    const image = this.source;
    const omega = [...this.omega];
    this.inFlight = true;
    this.client
      .infer(image, omega)
      .then((resp) => {
        if (id > this.shownId) {
          this.shownId = id;
          const effective = resp.clamped_omega.map(quantize);
          this.displayed = { image: resp.image, omega: effective };
          // don't snap sliders over input made while this was in flight;
          // the coalesced follow-up request will settle them
          if (!this.dirty) {
            this.omega = [...effective];
            this.events.onOmega?.([...this.omega]);
          }
          this.events.onImage?.(this.displayed);
        }
      })
      .catch((err: unknown) => {
        this.events.onError?.(err instanceof Error ? err.message : String(err));
      })
      .finally(() => {
        this.inFlight = false;
        if (this.dirty) {
          this.dirty = false;
          this.fire();
        }
      });
  }
}
