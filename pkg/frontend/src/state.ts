// Session state: sampling controls, batch history, and the keep-list.
// Everything persists through an injected Storage-like object so the whole
// session is reconstructible from local storage plus the service.

export interface Batch {
  id: number;
  artistId: number;
  artistName: string;
  mode: string;
  temperature: number;
  seed: number;
  lines: string[];
}

export interface Pin {
  batchId: number;
  lineIndex: number;
}

export interface SessionState {
  artistId: number | null;
  mode: string | null;
  temperature: number;
  count: number;
  history: Batch[];
  keepList: Pin[];
  nextBatchId: number;
}

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

export const STORAGE_KEY = "lyra-studio-session-v1";

export function initialState(): SessionState {
  return {
    artistId: null,
    mode: null,
    temperature: 1.0,
    count: 10,
    history: [],
    keepList: [],
    nextBatchId: 1,
  };
}

export class SessionStore {
  state: SessionState;

  constructor(private storage: StorageLike) {
    this.state = this.loadFromStorage() ?? initialState();
  }

  private loadFromStorage(): SessionState | null {
    const raw = this.storage.getItem(STORAGE_KEY);
    if (raw === null) return null;
    try {
      const parsed = JSON.parse(raw) as SessionState;
      if (!Array.isArray(parsed.history) || !Array.isArray(parsed.keepList)) {
        return null;
      }
      return parsed;
    } catch {
      return null;
    }
  }

  private save(): void {
    this.storage.setItem(STORAGE_KEY, JSON.stringify(this.state));
  }

  setControls(update: {
    artistId?: number;
    mode?: string;
    temperature?: number;
    count?: number;
  }): void {
    if (update.artistId !== undefined) this.state.artistId = update.artistId;
    if (update.mode !== undefined) this.state.mode = update.mode;
    if (update.temperature !== undefined) this.state.temperature = update.temperature;
    if (update.count !== undefined) this.state.count = update.count;
    this.save();
  }

  addBatch(batch: Omit<Batch, "id">): Batch {
    const full: Batch = { ...batch, id: this.state.nextBatchId };
    this.state.nextBatchId += 1;
    this.state.history.push(full);
    this.save();
    return full;
  }

  getBatch(batchId: number): Batch | undefined {
    return this.state.history.find((b) => b.id === batchId);
  }

  isPinned(batchId: number, lineIndex: number): boolean {
    return this.state.keepList.some(
      (p) => p.batchId === batchId && p.lineIndex === lineIndex,
    );
  }

  pin(batchId: number, lineIndex: number): void {
    const batch = this.getBatch(batchId);
    if (batch === undefined) {
      throw new Error(`no batch with id ${batchId}`);
    }
    if (lineIndex < 0 || lineIndex >= batch.lines.length) {
      throw new Error(`line ${lineIndex} not in batch ${batchId}`);
    }
    if (!this.isPinned(batchId, lineIndex)) {
      this.state.keepList.push({ batchId, lineIndex });
      this.save();
    }
  }

  unpin(batchId: number, lineIndex: number): void {
    const before = this.state.keepList.length;
    this.state.keepList = this.state.keepList.filter(
      (p) => !(p.batchId === batchId && p.lineIndex === lineIndex),
    );
    if (this.state.keepList.length !== before) this.save();
  }

  keepListLines(): string[] {
    const lines: string[] = [];
    for (const pin of this.state.keepList) {
      const batch = this.getBatch(pin.batchId);
      const line = batch?.lines[pin.lineIndex];
      if (line !== undefined) lines.push(line);
    }
    return lines;
  }

  exportKeepList(): string {
    return this.keepListLines().join("\n") + "\n";
  }
}
