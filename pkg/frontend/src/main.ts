// DOM wiring for the studio: pick an artist and variant, sample lines,
// reproduce any batch from its seed, curate a keep-list.

import { ApiClient, ApiError, Artist, ModelInfo } from "./api.js";
import { Batch, SessionStore } from "./state.js";

const api = new ApiClient("");
const store = new SessionStore(window.localStorage);

let artists: Artist[] = [];
let models: ModelInfo[] = [];
let pending = false;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

function setBanner(message: string | null, retry: boolean): void {
  const banner = byId<HTMLDivElement>("banner");
  banner.replaceChildren();
  if (message === null) {
    banner.hidden = true;
    return;
  }
  banner.hidden = false;
  banner.append(el("span", {}, message));
  if (retry) {
    const button = el("button", {}, "Retry");
    button.onclick = () => void bootstrap();
    banner.append(button);
  }
}

function controlsReady(): boolean {
  return artists.length > 0 && models.length > 0 && !pending;
}

function syncControls(): void {
  const artistSel = byId<HTMLSelectElement>("artist");
  const modeSel = byId<HTMLSelectElement>("mode");
  const sample = byId<HTMLButtonElement>("sample");
  const temp = byId<HTMLInputElement>("temperature");
  const tempOut = byId<HTMLSpanElement>("temperature-value");
  const count = byId<HTMLInputElement>("count");

  artistSel.replaceChildren(
    ...artists.map((a) =>
      el("option", { value: String(a.id) }, a.genre ? `${a.name} (${a.genre})` : a.name),
    ),
  );
  modeSel.replaceChildren(
    ...models.map((m) => el("option", { value: m.mode }, m.mode)),
  );
  if (store.state.artistId !== null) artistSel.value = String(store.state.artistId);
  if (store.state.mode !== null && models.some((m) => m.mode === store.state.mode)) {
    modeSel.value = store.state.mode;
  }
  temp.value = String(store.state.temperature);
  tempOut.textContent = store.state.temperature.toFixed(2);
  count.value = String(store.state.count);

  sample.disabled = !controlsReady();
  sample.textContent = pending ? "Sampling…" : "Sample";
  if (models.length === 0) {
    byId<HTMLParagraphElement>("no-models").hidden = false;
    byId<HTMLParagraphElement>("no-models").textContent =
      "No models are loaded on the service; generation is disabled.";
  } else {
    byId<HTMLParagraphElement>("no-models").hidden = true;
  }
}

function renderBatch(batch: Batch): HTMLElement {
  const box = el("section", { class: "batch" });
  const head = el("header", {});
  head.append(
    el(
      "span",
      { class: "batch-meta" },
      `#${batch.id} · ${batch.artistName} · ${batch.mode} · T=${batch.temperature} · seed ${batch.seed}`,
    ),
  );
  const reproduce = el("button", { title: "Request the same seed again" }, "Reproduce");
  reproduce.onclick = () => void sample(batch.seed, batch);
  head.append(reproduce);
  box.append(head);
  const list = el("ol", {});
  batch.lines.forEach((line, i) => {
    const item = el("li", {});
    const pinBtn = el(
      "button",
      { class: "pin" },
      store.isPinned(batch.id, i) ? "★" : "☆",
    );
    pinBtn.onclick = () => {
      if (store.isPinned(batch.id, i)) store.unpin(batch.id, i);
      else store.pin(batch.id, i);
      renderHistory();
      renderKeepList();
    };
    item.append(pinBtn, el("span", {}, line));
    list.append(item);
  });
  box.append(list);
  return box;
}

function renderHistory(): void {
  const history = byId<HTMLDivElement>("history");
  history.replaceChildren(
    ...[...store.state.history].reverse().map((b) => renderBatch(b)),
  );
}

function renderKeepList(): void {
  const panel = byId<HTMLDivElement>("keeplist");
  const lines = store.keepListLines();
  const list = el("ul", {});
  store.state.keepList.forEach((pin) => {
    const batch = store.getBatch(pin.batchId);
    const line = batch?.lines[pin.lineIndex];
    if (batch === undefined || line === undefined) return;
    const item = el("li", {});
    const unpin = el("button", { class: "pin" }, "✕");
    unpin.onclick = () => {
      store.unpin(pin.batchId, pin.lineIndex);
      renderHistory();
      renderKeepList();
    };
    item.append(unpin, el("span", {}, line));
    list.append(item);
  });
  const exportBtn = el("button", { id: "export" }, "Export keep-list");
  exportBtn.disabled = lines.length === 0;
  exportBtn.onclick = () => {
    const blob = new Blob([store.exportKeepList()], { type: "text/plain" });
    const url = URL.createObjectURL(blob);
    const a = el("a", { href: url, download: "keeplist.txt" });
    a.click();
    URL.revokeObjectURL(url);
  };
  panel.replaceChildren(el("h2", {}, `Keep-list (${lines.length})`), list, exportBtn);
}

async function sample(seed?: number, like?: Batch): Promise<void> {
  if (pending) return;
  const artistSel = byId<HTMLSelectElement>("artist");
  const modeSel = byId<HTMLSelectElement>("mode");
  const artistId = like ? like.artistId : Number(artistSel.value);
  const mode = like ? like.mode : modeSel.value;
  const temperature = like ? like.temperature : store.state.temperature;
  const count = like ? like.lines.length : store.state.count;
  const artist = artists.find((a) => a.id === artistId);
  if (artist === undefined || mode === "") return;

  pending = true;
  syncControls();
  setBanner(null, false);
  try {
    const result = await api.generate({
      artist_id: artistId,
      mode,
      count,
      temperature,
      ...(seed !== undefined ? { seed } : {}),
    });
    store.addBatch({
      artistId,
      artistName: artist.name,
      mode,
      temperature,
      seed: result.seed_used,
      lines: result.lines,
    });
    renderHistory();
  } catch (err) {
    if (err instanceof ApiError) {
      setBanner(`Generation failed: ${err.message}`, false);
    } else {
      setBanner("Cannot reach the generation service.", true);
    }
  } finally {
    pending = false;
    syncControls();
  }
}

async function bootstrap(): Promise<void> {
  setBanner(null, false);
  try {
    [artists, models] = await Promise.all([api.artists(), api.models()]);
  } catch {
    artists = [];
    models = [];
    setBanner("Cannot reach the generation service.", true);
  }
  syncControls();
  renderHistory();
  renderKeepList();
}

function wireControls(): void {
  byId<HTMLSelectElement>("artist").onchange = (e) =>
    store.setControls({ artistId: Number((e.target as HTMLSelectElement).value) });
  byId<HTMLSelectElement>("mode").onchange = (e) =>
    store.setControls({ mode: (e.target as HTMLSelectElement).value });
  const temp = byId<HTMLInputElement>("temperature");
  temp.oninput = () => {
    store.setControls({ temperature: Number(temp.value) });
    byId<HTMLSpanElement>("temperature-value").textContent =
      Number(temp.value).toFixed(2);
  };
  const count = byId<HTMLInputElement>("count");
  count.onchange = () => {
    const v = Math.min(100, Math.max(1, Number(count.value) || 1));
    store.setControls({ count: v });
    count.value = String(v);
  };
  byId<HTMLButtonElement>("sample").onclick = () => void sample();
}

wireControls();
void bootstrap();
