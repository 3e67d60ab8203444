import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import type { InferClient, InferResponse, ModelInfo } from "../src/api.js";
import { DEBOUNCE_MS, TunerSession, quantize } from "../src/state.js";

interface Pending {
  omega: number[];
  resolve: (r: InferResponse) => void;
  reject: (e: Error) => void;
}

/** Client whose responses are resolved manually by the test. */
class FakeClient implements InferClient {
  calls: Pending[] = [];

  modelInfo(): Promise<ModelInfo> {
    throw new Error("unused");
  }

  infer(_image: string, omega: number[]): Promise<InferResponse> {
    return new Promise((resolve, reject) => {
      this.calls.push({ omega: [...omega], resolve, reject });
    });
  }
}

function respond(call: Pending, tag: string, clamped?: number[]): void {
  call.resolve({
    image: `png-${tag}`,
    clamped_omega: clamped ?? call.omega,
    latency_ms: 1,
  });
}

describe("quantize", () => {
  it("snaps to 0.01 steps inside [0, 1]", () => {
    expect(quantize(0.123)).toBeCloseTo(0.12, 10);
    expect(quantize(-0.5)).toBe(0);
    expect(quantize(1.7)).toBe(1);
  });
});

describe("TunerSession", () => {
  let client: FakeClient;
  let session: TunerSession;
  let shown: string[];
  let errors: string[];

  beforeEach(() => {
    vi.useFakeTimers();
    client = new FakeClient();
    shown = [];
    errors = [];
    session = new TunerSession(client, 2, {
      onImage: (snap) => shown.push(snap.image),
      onError: (reason) => errors.push(reason),
    });
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("issues at most one request per debounce window during a drag", async () => {
    session.setImage("src");
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    expect(client.calls).toHaveLength(1);
    respond(client.calls[0], "initial");
    await vi.advanceTimersByTimeAsync(0);

    for (let v = 0.9; v > 0.4; v -= 0.05) {
      session.setOmega(0, v);
      await vi.advanceTimersByTimeAsync(20); // all inside one window
    }
    expect(client.calls).toHaveLength(1); // nothing fired yet
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    expect(client.calls).toHaveLength(2); // exactly one trailing request
    expect(client.calls[1].omega[0]).toBeCloseTo(0.45, 10);
  });

  it("never lets a stale response overwrite a newer image", async () => {
    session.setImage("src");
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    const first = client.calls[0];

    // a second change is coalesced while the first request is in flight
    session.setOmega(0, 0.2);
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    expect(client.calls).toHaveLength(1);

    respond(first, "old");
    await vi.advanceTimersByTimeAsync(0);
    const second = client.calls[1];
    respond(second, "new");
    await vi.advanceTimersByTimeAsync(0);

    expect(shown).toEqual(["png-old", "png-new"]);
    expect(session.displayed?.image).toBe("png-new");
  });

  it("keeps at most one request in flight", async () => {
    session.setImage("src");
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    session.setOmega(0, 0.5);
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    session.setOmega(1, 0.5);
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    expect(client.calls).toHaveLength(1); // the rest are coalesced

    respond(client.calls[0], "a");
    await vi.advanceTimersByTimeAsync(0);
    expect(client.calls).toHaveLength(2); // coalesced state issued once
    expect(client.calls[1].omega).toEqual([0.5, 0.5]);
  });

  it("snaps sliders to the server-effective clamped omega", async () => {
    const omegas: number[][] = [];
    session = new TunerSession(client, 2, {
      onOmega: (om) => omegas.push(om),
    });
    session.setImage("src");
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    respond(client.calls[0], "x", [0.75, 0.0]);
    await vi.advanceTimersByTimeAsync(0);
    expect(session.omega).toEqual([0.75, 0.0]);
    expect(omegas.at(-1)).toEqual([0.75, 0.0]);
  });

  it("pin then restore reproduces the pinned image byte for byte", async () => {
    session.setImage("src");
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    respond(client.calls[0], "pinned-bytes");
    await vi.advanceTimersByTimeAsync(0);
    session.pin();

    session.setOmega(0, 0.1);
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    respond(client.calls[1], "moved");
    await vi.advanceTimersByTimeAsync(0);
    expect(session.displayed?.image).toBe("png-moved");

    session.restorePin();
    expect(session.displayed?.image).toBe("png-pinned-bytes");
    expect(session.omega).toEqual(session.pinned?.omega);
  });

  it("a response in flight when the pin is restored is treated as stale", async () => {
    session.setImage("src");
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    respond(client.calls[0], "first");
    await vi.advanceTimersByTimeAsync(0);
    session.pin();

    session.setOmega(0, 0.3);
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    session.restorePin();
    respond(client.calls[1], "late");
    await vi.advanceTimersByTimeAsync(0);
    expect(session.displayed?.image).toBe("png-first");
  });

  it("surfaces the server reason and stays interactive after an error", async () => {
    session.setImage("src");
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    client.calls[0].reject(new Error("image has 9000000 pixels, limit is 2000000"));
    await vi.advanceTimersByTimeAsync(0);
    expect(errors).toEqual(["image has 9000000 pixels, limit is 2000000"]);

    session.setOmega(0, 0.4);
    await vi.advanceTimersByTimeAsync(DEBOUNCE_MS);
    expect(client.calls).toHaveLength(2); // still issuing requests
    respond(client.calls[1], "recovered");
    await vi.advanceTimersByTimeAsync(0);
    expect(session.displayed?.image).toBe("png-recovered");
  });

  it("quantizes slider input to 0.01 steps", () => {
    session.setOmega(0, 0.333333);
    expect(session.omega[0]).toBeCloseTo(0.33, 10);
  });
});
