import assert from "node:assert";
import test from "node:test";

import { Axis, extent, fmt, heatColor, pad } from "../src/svg.js";

test("linear axis maps endpoints to pixels", () => {
  const a = new Axis(0, 10, 100, 300, "linear");
  assert.strictEqual(a.map(0), 100);
  assert.strictEqual(a.map(10), 300);
  assert.strictEqual(a.map(5), 200);
});

test("log axis is monotone and hits decade ticks", () => {
  const a = new Axis(0.01, 10, 0, 100, "log");
  assert.ok(a.map(0.1) < a.map(1));
  assert.deepStrictEqual(a.ticks(), [0.01, 0.1, 1, 10]);
});

test("log axis rejects nonpositive bounds", () => {
  assert.throws(() => new Axis(0, 1, 0, 1, "log"));
});

test("extent and pad", () => {
  assert.deepStrictEqual(extent([3, 1, 2]), [1, 3]);
  const [lo, hi] = pad([1, 3], "linear");
  assert.ok(lo < 1 && hi > 3);
  assert.throws(() => extent([NaN]));
});

test("fmt is stable and compact", () => {
  assert.strictEqual(fmt(0.0625), "0.0625");
  assert.strictEqual(fmt(0), "0");
  assert.strictEqual(fmt(1.23456789e-7), "1.23e-7");
});

test("heat color ramp endpoints", () => {
  assert.strictEqual(heatColor(0), "rgb(239,243,255)");
  assert.strictEqual(heatColor(1), "rgb(8,48,107)");
});
