/** Browser entry point: binds the editor to the page controls. */
import { Client } from "./api.js";
import { SliceEditor } from "./editor.js";

declare global {
  interface Window { editor: SliceEditor; }
}

export function mount(doc: Document): SliceEditor {
  const canvas = doc.getElementById("slice") as HTMLCanvasElement;
  const latency = doc.getElementById("latency") as HTMLElement;
  const statusEl = doc.getElementById("status") as HTMLElement;
  const volumeInput = doc.getElementById("volume") as HTMLInputElement;
  const openBtn = doc.getElementById("open") as HTMLButtonElement;
  const submitBtn = doc.getElementById("submit") as HTMLButtonElement;
  const undoBtn = doc.getElementById("undo") as HTMLButtonElement;

  const client = new Client("", (url, init) => fetch(url, init));
  const editor = new SliceEditor(client, canvas.getContext("2d")!, {
    onLatency: (ms) => { latency.textContent = `${ms.toFixed(1)} ms`; },
    onStatus: (msg) => { statusEl.textContent = msg; },
  });

  openBtn.addEventListener("click", () => {
    editor.open(volumeInput.value).catch(
      (e) => { statusEl.textContent = String(e); });
  });
  submitBtn.addEventListener("click", () => { void editor.submit(); });
  undoBtn.addEventListener("click", () => { void editor.undo(); });
  canvas.addEventListener("click", (ev) => {
    const rect = canvas.getBoundingClientRect();
    editor.click(ev.clientX - rect.left, ev.clientY - rect.top);
  });
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    editor.state.zoom = Math.max(
      1, editor.state.zoom * (ev.deltaY < 0 ? 1.25 : 0.8));
    editor.render();
  });
  doc.addEventListener("keydown", (ev) => { void editor.handleKey(ev.key); });

  window.editor = editor;
  return editor;
}

if (typeof document !== "undefined" && document.getElementById("slice")) {
  mount(document);
}
