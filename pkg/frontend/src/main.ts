/** DOM wiring: binds the store to the canvas, chat panel, and scene picker.
 * All layout math and state transitions live in render.ts / state.ts. */

import { ApiClient } from './api.js';
import { drawScene } from './draw.js';
import { hitTest, layoutScene } from './render.js';
import { AppStore, TranscriptEntry } from './state.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id} in index.html`);
  return node as T;
}

function traceBlock(entry: TranscriptEntry): HTMLElement | null {
  const trace = entry.response?.tool_trace ?? [];
  if (trace.length === 0) return null;
  const details = document.createElement('details');
  details.className = 'trace';
  const summary = document.createElement('summary');
  summary.textContent = `${trace.length} function call${trace.length === 1 ? '' : 's'}`;
  details.appendChild(summary);
  for (const step of trace) {
    const line = document.createElement('pre');
    line.textContent = step.ok ? `${step.call} -> ${step.result}` : `${step.call} !! ${step.error}`;
    details.appendChild(line);
  }
  return details;
}

function main(): void {
  const apiBase = new URLSearchParams(window.location.search).get('api') ?? '';
  const store = new AppStore(new ApiClient(apiBase));

  const canvas = el<HTMLCanvasElement>('bev-canvas');
  const ctx = canvas.getContext('2d');
  if (!ctx) throw new Error('canvas 2d context unavailable');
  const banner = el<HTMLDivElement>('banner');
  const sceneSelect = el<HTMLSelectElement>('scene-select');
  const transcriptBox = el<HTMLDivElement>('transcript');
  const form = el<HTMLFormElement>('chat-form');
  const input = el<HTMLInputElement>('chat-input');
  const sendButton = el<HTMLButtonElement>('chat-send');
  const panel = el<HTMLDivElement>('object-panel');

  function redrawCanvas(): void {
    const rect = canvas.getBoundingClientRect();
    canvas.width = rect.width;
    canvas.height = rect.height;
    if (!store.payload || !ctx) return;
    const layout = layoutScene(
      store.payload,
      store.highlighted,
      store.selected,
      store.viewport,
      canvas.width,
      canvas.height,
    );
    drawScene(ctx, layout, canvas.width, canvas.height, store.payload.grid.rows, store.payload.grid.cols);
  }

  function renderTranscript(): void {
    transcriptBox.replaceChildren();
    for (const entry of store.transcript) {
      const bubble = document.createElement('div');
      bubble.className = `bubble ${entry.role}`;
      const text = document.createElement('div');
      text.textContent = entry.text;
      bubble.appendChild(text);
      if (entry.role === 'assistant' && entry.response) {
        const why = document.createElement('div');
        why.className = 'explanation';
        why.textContent = entry.response.explanation;
        bubble.appendChild(why);
        const trace = traceBlock(entry);
        if (trace) bubble.appendChild(trace);
      }
      transcriptBox.appendChild(bubble);
    }
    if (store.sendError) {
      const bubble = document.createElement('div');
      bubble.className = 'bubble error';
      bubble.textContent = store.sendError;
      const retry = document.createElement('button');
      retry.textContent = 'retry';
      retry.addEventListener('click', () => void store.retry());
      bubble.appendChild(retry);
      transcriptBox.appendChild(bubble);
    }
    transcriptBox.scrollTop = transcriptBox.scrollHeight;
  }

  function renderPanel(): void {
    panel.replaceChildren();
    if (store.selected === null || !store.payload) {
      panel.classList.add('hidden');
      return;
    }
    const obj = store.payload.objects.find((o) => o.object_id === store.selected);
    if (!obj) {
      panel.classList.add('hidden');
      return;
    }
    panel.classList.remove('hidden');
    const title = document.createElement('h3');
    title.textContent = obj.category
      ? `object ${obj.object_id} (${obj.category})`
      : `object ${obj.object_id}`;
    const fg = document.createElement('p');
    fg.textContent = obj.foreground_text;
    const bg = document.createElement('p');
    bg.className = 'muted';
    bg.textContent = obj.background_text;
    const geo = document.createElement('p');
    geo.className = 'muted';
    geo.textContent =
      `position (${obj.position[0].toFixed(2)}, ${obj.position[1].toFixed(2)}) m, ` +
      `area ${obj.area.toFixed(2)} m²`;
    panel.append(title, fg, bg, geo);
  }

  store.subscribe(() => {
    banner.textContent = store.banner ?? '';
    banner.classList.toggle('hidden', store.banner === null);
    sendButton.disabled = store.busy || store.payload === null;
    input.disabled = store.payload === null;
    renderTranscript();
    renderPanel();
    redrawCanvas();
  });

  // -------------------------------------------------------- canvas input
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  let moved = false;

  canvas.addEventListener('pointerdown', (e) => {
    dragging = true;
    moved = false;
    lastX = e.offsetX;
    lastY = e.offsetY;
    canvas.setPointerCapture(e.pointerId);
  });
  canvas.addEventListener('pointermove', (e) => {
    if (dragging) {
      const dx = e.offsetX - lastX;
      const dy = e.offsetY - lastY;
      if (Math.abs(dx) + Math.abs(dy) > 2) moved = true;
      lastX = e.offsetX;
      lastY = e.offsetY;
      if (moved) store.pan(dx, dy);
    } else if (store.payload) {
      const id = hitTest(store.payload, store.viewport, canvas.width, canvas.height, e.offsetX, e.offsetY);
      canvas.style.cursor = id === null ? 'grab' : 'pointer';
      store.hoverObject(id);
    }
  });
  canvas.addEventListener('pointerup', (e) => {
    dragging = false;
    if (!moved && store.payload) {
      const id = hitTest(store.payload, store.viewport, canvas.width, canvas.height, e.offsetX, e.offsetY);
      store.selectObject(id);
    }
  });
  canvas.addEventListener('wheel', (e) => {
    e.preventDefault();
    // zoomAt expects the anchor relative to the canvas center
    store.zoom(
      e.deltaY < 0 ? 1.15 : 1 / 1.15,
      e.offsetX - canvas.width / 2,
      e.offsetY - canvas.height / 2,
    );
  });
  window.addEventListener('resize', redrawCanvas);

  // ----------------------------------------------------------- chat input
  form.addEventListener('submit', (e) => {
    e.preventDefault();
    const message = input.value;
    void store.send(message).then((accepted) => {
      if (accepted) input.value = '';
    });
  });

  sceneSelect.addEventListener('change', () => {
    if (sceneSelect.value) void store.loadScene(sceneSelect.value);
  });

  const api = new ApiClient(apiBase);
  void api
    .listScenes()
    .then((scenes) => {
      sceneSelect.replaceChildren();
      for (const scene of scenes) {
        const option = document.createElement('option');
        option.value = scene.scene_token;
        option.textContent = `${scene.scene_token} (${scene.n_objects} objects)`;
        sceneSelect.appendChild(option);
      }
      if (scenes.length > 0) void store.loadScene(scenes[0]!.scene_token);
    })
    .catch((err: unknown) => {
      banner.textContent = `could not list scenes: ${err instanceof Error ? err.message : err}`;
      banner.classList.remove('hidden');
    });
}

main();
