import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, FetchLike, GenerateParams } from "../src/api.js";

// fixture service behavior: deterministic lines keyed by (artist, seed),
// mirroring the JSON shapes of the real endpoints
const ARTISTS = [
  { id: 0, name: "Aurora Vex", genre: "Electronic" },
  { id: 1, name: "Granite Choir", genre: "Hard Rock" },
];
const MODELS = [{ mode: "randNT", checkpoint_id: "vae_randNT_seed11" }];

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

let autoSeed = 1000;

const fakeFetch: FetchLike = async (input, init) => {
  if (input.endsWith("/api/health")) return json(200, { status: "ok" });
  if (input.endsWith("/api/artists")) return json(200, ARTISTS);
  if (input.endsWith("/api/models")) return json(200, MODELS);
  if (input.endsWith("/api/generate")) {
    const req = JSON.parse(String(init?.body)) as GenerateParams;
    if (req.count < 1 || req.count > 100) {
      return json(400, {
        detail: [{ field: "count", message: "must be between 1 and 100" }],
      });
    }
    if (!MODELS.some((m) => m.mode === req.mode)) {
      return json(404, { detail: `unknown mode '${req.mode}'` });
    }
    const seed = req.seed ?? autoSeed++;
    const lines = Array.from(
      { length: req.count },
      (_, i) => `artist${req.artist_id} seed${seed} line${i}`,
    );
    return json(200, { lines, seed_used: seed });
  }
  return json(404, { detail: "no such route" });
};

const client = new ApiClient("", fakeFetch);

describe("ApiClient against the fixture service behavior", () => {
  it("loads the artist manifest for the picker", async () => {
    const artists = await client.artists();
    expect(artists).toHaveLength(2);
    expect(artists[0]!.name).toBe("Aurora Vex");
    expect(await client.models()).toEqual(MODELS);
  });

  it("same explicit seed twice yields identical lines", async () => {
    const params = {
      artist_id: 0,
      mode: "randNT",
      count: 5,
      temperature: 1.0,
      seed: 7,
    };
    const a = await client.generate(params);
    const b = await client.generate(params);
    expect(a.seed_used).toBe(7);
    expect(a.lines).toEqual(b.lines);
    expect(a.lines).toHaveLength(5);
  });

  it("reports the generated seed when none is supplied", async () => {
    const a = await client.generate({
      artist_id: 1,
      mode: "randNT",
      count: 2,
      temperature: 0.5,
    });
    const replay = await client.generate({
      artist_id: 1,
      mode: "randNT",
      count: 2,
      temperature: 0.5,
      seed: a.seed_used,
    });
    expect(replay.lines).toEqual(a.lines);
  });

  it("surfaces 400 validation errors with field messages", async () => {
    await expect(
      client.generate({ artist_id: 0, mode: "randNT", count: 0, temperature: 1 }),
    ).rejects.toMatchObject({
      status: 400,
      fields: [{ field: "count", message: "must be between 1 and 100" }],
    });
  });

  it("surfaces 404 for unknown modes", async () => {
    await expect(
      client.generate({ artist_id: 0, mode: "audioT", count: 1, temperature: 1 }),
    ).rejects.toMatchObject({ status: 404 });
  });

  it("wraps connection failures as plain errors", async () => {
    const down = new ApiClient("", async () => {
      throw new TypeError("fetch failed");
    });
    await expect(down.artists()).rejects.toThrow("fetch failed");
    await expect(down.artists()).rejects.not.toBeInstanceOf(ApiError);
  });
});
