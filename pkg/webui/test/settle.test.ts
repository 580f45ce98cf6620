import { describe, expect, it } from "vitest";

import { createSettle, LatestWins } from "../src/settle.js";
import { sleep } from "./mock-server.js";

describe("createSettle", () => {
  it("fires once per settle no matter how many pokes", async () => {
    let fired = 0;
    const settle = createSettle(20, () => fired++);
    for (let i = 0; i < 8; i++) settle.poke();
    expect(fired).toBe(0);
    await sleep(60);
    expect(fired).toBe(1);
    settle.poke();
    await sleep(60);
    expect(fired).toBe(2);
  });

  it("cancel drops a pending fire", async () => {
    let fired = 0;
    const settle = createSettle(10, () => fired++);
    settle.poke();
    settle.cancel();
    await sleep(40);
    expect(fired).toBe(0);
  });
});

describe("LatestWins", () => {
  it("aborts the previous run and discards its result", async () => {
    const flight = new LatestWins();
    const seen: string[] = [];
    const first = flight.run(async (signal) => {
      await sleep(30);
      return signal.aborted ? "aborted" : "first";
    });
    const second = flight.run(async () => "second");
    const [a, b] = await Promise.all([first, second]);
    expect(b).toBe("second");
    expect(a).toBeUndefined(); // superseded, never lands
    expect(seen).toEqual([]);
  });

  it("propagates real failures from the current run", async () => {
    const flight = new LatestWins();
    await expect(
      flight.run(async () => {
        throw new Error("boom");
      }),
    ).rejects.toThrow("boom");
  });
});
