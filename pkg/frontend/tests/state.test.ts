import { describe, expect, it } from "vitest";

import {
  initialState,
  SessionStore,
  STORAGE_KEY,
  StorageLike,
} from "../src/state.js";

class MemoryStorage implements StorageLike {
  private map = new Map<string, string>();
  getItem(key: string): string | null {
    return this.map.has(key) ? this.map.get(key)! : null;
  }
  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }
}

function storeWithBatch(storage = new MemoryStorage()) {
  const store = new SessionStore(storage);
  const batch = store.addBatch({
    artistId: 0,
    artistName: "Aurora Vex",
    mode: "randNT",
    temperature: 1.0,
    seed: 42,
    lines: ["first line", "second line", "third line"],
  });
  return { store, storage, batch };
}

describe("SessionStore", () => {
  it("starts from a clean initial state", () => {
    const store = new SessionStore(new MemoryStorage());
    expect(store.state).toEqual(initialState());
  });

  it("records batches with their seeds and increments ids", () => {
    const { store, batch } = storeWithBatch();
    expect(batch.id).toBe(1);
    expect(batch.seed).toBe(42);
    const second = store.addBatch({ ...batch, lines: ["x"] });
    expect(second.id).toBe(2);
    expect(store.state.history).toHaveLength(2);
  });

  it("persists through storage and reloads identically", () => {
    const { store, storage } = storeWithBatch();
    store.pin(1, 0);
    store.setControls({ artistId: 1, mode: "onehot", temperature: 0.5, count: 7 });
    const reloaded = new SessionStore(storage);
    expect(reloaded.state).toEqual(store.state);
    expect(reloaded.keepListLines()).toEqual(["first line"]);
  });

  it("keep-list survives a reload (page refresh semantics)", () => {
    const storage = new MemoryStorage();
    {
      const { store } = storeWithBatch(storage);
      store.pin(1, 2);
    }
    const fresh = new SessionStore(storage);
    expect(fresh.keepListLines()).toEqual(["third line"]);
  });

  it("ignores corrupt storage payloads", () => {
    const storage = new MemoryStorage();
    storage.setItem(STORAGE_KEY, "{not json");
    const store = new SessionStore(storage);
    expect(store.state).toEqual(initialState());
  });

  it("pin validates that the line exists in history", () => {
    const { store } = storeWithBatch();
    expect(() => store.pin(9, 0)).toThrow(/no batch/);
    expect(() => store.pin(1, 99)).toThrow(/not in batch/);
  });

  it("pin is idempotent and unpin removes exactly one entry", () => {
    const { store } = storeWithBatch();
    store.pin(1, 1);
    store.pin(1, 1);
    store.pin(1, 0);
    expect(store.state.keepList).toHaveLength(2);
    store.unpin(1, 1);
    expect(store.state.keepList).toHaveLength(1);
    expect(store.isPinned(1, 1)).toBe(false);
    expect(store.isPinned(1, 0)).toBe(true);
  });

  it("exports the keep-list byte-for-byte, one line per pin", () => {
    const { store } = storeWithBatch();
    store.pin(1, 2);
    store.pin(1, 0);
    expect(store.exportKeepList()).toBe("third line\nfirst line\n");
  });
});
