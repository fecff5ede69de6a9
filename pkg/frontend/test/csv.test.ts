import assert from "node:assert";
import test from "node:test";

import { numbers, parseCsv } from "../src/csv.js";

test("parses header and rows", () => {
  const t = parseCsv("a,b\n1,2\n3,4\n");
  assert.deepStrictEqual(t.columns, ["a", "b"]);
  assert.strictEqual(t.rows.length, 2);
  assert.deepStrictEqual(numbers(t, "b"), [2, 4]);
});

test("keeps full precision strings", () => {
  const t = parseCsv("x\n0.10000000000000000555\n");
  assert.strictEqual(numbers(t, "x")[0], 0.10000000000000000555);
});

test("rejects ragged rows", () => {
  assert.throws(() => parseCsv("a,b\n1\n"), /malformed CSV/);
});

test("rejects empty input", () => {
  assert.throws(() => parseCsv(""), /empty CSV/);
});

test("rejects missing columns and non-numeric cells", () => {
  const t = parseCsv("a\nx\n");
  assert.throws(() => numbers(t, "b"), /missing column/);
  assert.throws(() => numbers(t, "a"), /non-numeric/);
});

test("handles quoted cells", () => {
  const t = parseCsv('k,v\n"a,b",3\n');
  assert.strictEqual(t.rows[0]["k"], "a,b");
});
