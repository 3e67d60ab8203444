import { mountTuner } from "./ui.js";

const root = document.getElementById("app");
if (root) {
  mountTuner(root).catch((err) => {
    root.textContent = `failed to reach inference service: ${err}`;
  });
}
