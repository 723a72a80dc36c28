import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { debounce, SequencedLookup } from "../src/debounce";

describe("debounce", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("fires once with the latest arguments", () => {
    const calls: string[] = [];
    const fn = debounce((text: string) => calls.push(text), 120);
    fn("A");
    fn("Ad");
    fn("Ade");
    vi.advanceTimersByTime(119);
    expect(calls).toEqual([]);
    vi.advanceTimersByTime(1);
    expect(calls).toEqual(["Ade"]);
  });

  it("keeps the delay at or under 150ms per keystroke", () => {
    const calls: string[] = [];
    const fn = debounce((text: string) => calls.push(text), 120);
    fn("A");
    vi.advanceTimersByTime(150);
    expect(calls).toEqual(["A"]);
  });

  it("cancel drops the pending call", () => {
    const calls: string[] = [];
    const fn = debounce((text: string) => calls.push(text), 120);
    fn("A");
    fn.cancel();
    vi.advanceTimersByTime(500);
    expect(calls).toEqual([]);
  });

  it("flush runs the pending call immediately", () => {
    const calls: string[] = [];
    const fn = debounce((text: string) => calls.push(text), 120);
    fn("A");
    fn.flush();
    expect(calls).toEqual(["A"]);
    fn.flush(); // nothing pending: no-op
    expect(calls).toEqual(["A"]);
  });
});

describe("SequencedLookup", () => {
  it("discards responses that arrive after a newer request", async () => {
    const lookup = new SequencedLookup();
    const applied: string[] = [];
    let resolveSlow!: (v: string) => void;
    const slow = new Promise<string>((resolve) => (resolveSlow = resolve));
    const first = lookup.run(() => slow, (v) => applied.push(v));
    await lookup.run(() => Promise.resolve("fresh"), (v) => applied.push(v));
    resolveSlow("stale");
    await first;
    expect(applied).toEqual(["fresh"]);
  });

  it("applies in-order responses normally", async () => {
    const lookup = new SequencedLookup();
    const applied: string[] = [];
    await lookup.run(() => Promise.resolve("one"), (v) => applied.push(v));
    await lookup.run(() => Promise.resolve("two"), (v) => applied.push(v));
    expect(applied).toEqual(["one", "two"]);
  });
});
