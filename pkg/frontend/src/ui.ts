/** DOM wiring: builds sliders from the model's objective list, binds the
 * session to image panes, and renders the A/B compare strip. */

import { HttpClient, ModelInfo } from "./api.js";
import { SLIDER_STEP, Snapshot, TunerSession } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function pngUrl(b64: string): string {
  return `data:image/png;base64,${b64}`;
}

function caption(omega: number[]): string {
  return `ω = (${omega.map((v) => v.toFixed(2)).join(", ")})`;
}

export function mountTuner(root: HTMLElement, base = ""): Promise<TunerSession> {
  const client = new HttpClient(base);
  return client.modelInfo().then((info) => build(root, client, info));
}

function build(root: HTMLElement, client: HttpClient, info: ModelInfo): TunerSession {
  const toast = el("div", "toast");
  const currentImg = el("img", "pane-img");
  const currentCap = el("div", "pane-cap", caption(new Array(info.p).fill(1)));
  const pinnedImg = el("img", "pane-img");
  const pinnedCap = el("div", "pane-cap", "nothing pinned");

  const sliders: HTMLInputElement[] = [];
  const session = new TunerSession(client, info.p, {
    onImage: (snap: Snapshot) => {
      currentImg.src = pngUrl(snap.image);
      currentCap.textContent = caption(snap.omega);
    },
    onOmega: (omega: number[]) => {
      omega.forEach((v, i) => {
        sliders[i].value = v.toFixed(2);
        sliders[i].nextElementSibling!.textContent = v.toFixed(2);
      });
    },
    onError: (reason: string) => {
      toast.textContent = reason;
      toast.classList.add("visible");
      setTimeout(() => toast.classList.remove("visible"), 4000);
    },
  });

  const controls = el("div", "controls");
  for (let i = 0; i < info.p; i++) {
    const row = el("label", "slider-row");
    row.append(el("span", "slider-name", info.objective_ids[i] ?? `ω${i + 1}`));
    const input = el("input");
    input.type = "range";
    input.min = "0";
    input.max = "1";
    input.step = String(SLIDER_STEP);
    input.value = "1";
    input.addEventListener("input", () => session.setOmega(i, Number(input.value)));
    const value = el("span", "slider-value", "1.00");
    row.append(input, value);
    sliders.push(input);
    controls.append(row);
  }

  const file = el("input");
  file.type = "file";
  file.accept = "image/png";
  file.addEventListener("change", () => {
    const chosen = file.files?.[0];
    if (!chosen) return;
    chosen.arrayBuffer().then((buf) => {
      let binary = "";
      new Uint8Array(buf).forEach((b) => (binary += String.fromCharCode(b)));
      session.setImage(btoa(binary));
    });
  });

  const pinBtn = el("button", "", "pin A");
  pinBtn.addEventListener("click", () => {
    session.pin();
    if (session.pinned) {
      pinnedImg.src = pngUrl(session.pinned.image);
      pinnedCap.textContent = caption(session.pinned.omega);
    }
  });
  const restoreBtn = el("button", "", "restore A");
  restoreBtn.addEventListener("click", () => session.restorePin());

  const compare = el("div", "compare");
  const paneA = el("div", "pane");
  paneA.append(el("div", "pane-title", "A (pinned)"), pinnedImg, pinnedCap);
  const paneB = el("div", "pane");
  paneB.append(el("div", "pane-title", "B (current)"), currentImg, currentCap);
  compare.append(paneA, paneB);

  const bar = el("div", "bar");
  bar.append(file, pinBtn, restoreBtn);
  root.append(bar, controls, compare, toast);
  return session;
}
