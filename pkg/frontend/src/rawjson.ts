/**
 * Extract the raw source text of a value inside a JSON document.
 *
 * Statistics on screen must trace byte-for-byte to the service payload.
 * Re-stringifying parsed numbers does not guarantee that (e.g. Python
 * serializes 1e-07 where JavaScript would print "1e-7"), so the stat cards
 * read their digits straight out of the response body via this scanner.
 */

export type JsonPath = (string | number)[];

class Scanner {
  pos = 0;

  constructor(readonly text: string) {}

  peek(): string {
    const ch = this.text[this.pos];
    if (ch === undefined) throw new SyntaxError("unexpected end of JSON input");
    return ch;
  }

  skipWhitespace(): void {
    while (this.pos < this.text.length && " \t\n\r".includes(this.text[this.pos]!)) {
      this.pos += 1;
    }
  }

  expect(ch: string): void {
    if (this.text[this.pos] !== ch) {
      throw new SyntaxError(`expected ${ch} at offset ${this.pos}`);
    }
    this.pos += 1;
  }
}

function skipString(s: Scanner): string {
  const start = s.pos;
  s.expect('"');
  while (true) {
    const ch = s.peek();
    s.pos += 1;
    if (ch === "\\") {
      s.pos += 1; // escaped character (covers \" and \\; \uXXXX digits are plain)
    } else if (ch === '"') {
      return s.text.slice(start, s.pos);
    }
  }
}

function skipScalar(s: Scanner): void {
  while (s.pos < s.text.length && !',}] \t\n\r'.includes(s.text[s.pos]!)) {
    s.pos += 1;
  }
}

/**
 * Returns the exact source slice of the value at `path`, e.g.
 * rawLiteral('{"a": [1, 2.50]}', ["a", 1]) === "2.50".
 */
export function rawLiteral(text: string, path: JsonPath): string {
  const s = new Scanner(text);
  s.skipWhitespace();
  return scanValue(s, path, 0);
}

function scanValue(s: Scanner, path: JsonPath, depth: number): string {
  s.skipWhitespace();
  const target = depth === path.length;
  const ch = s.peek();
  if (ch === "{") {
    return scanObject(s, path, depth, target);
  }
  if (ch === "[") {
    return scanArray(s, path, depth, target);
  }
  const start = s.pos;
  if (ch === '"') {
    skipString(s);
  } else {
    skipScalar(s);
  }
  if (!target) {
    throw new Error(`path descends into a scalar at depth ${depth}`);
  }
  return s.text.slice(start, s.pos);
}

function scanObject(s: Scanner, path: JsonPath, depth: number, target: boolean): string {
  const start = s.pos;
  s.expect("{");
  s.skipWhitespace();
  let found: string | null = null;
  if (s.peek() !== "}") {
    while (true) {
      s.skipWhitespace();
      const rawKey = skipString(s);
      const key = JSON.parse(rawKey) as string;
      s.skipWhitespace();
      s.expect(":");
      if (!target && key === path[depth]) {
        found = scanValue(s, path, depth + 1);
      } else {
        scanValue(s, [], 0); // consume the subtree
      }
      s.skipWhitespace();
      if (s.peek() === ",") {
        s.pos += 1;
        continue;
      }
      break;
    }
  }
  s.skipWhitespace();
  s.expect("}");
  if (target) return s.text.slice(start, s.pos);
  if (found === null) throw new Error(`key ${String(path[depth])} not found`);
  return found;
}

function scanArray(s: Scanner, path: JsonPath, depth: number, target: boolean): string {
  const start = s.pos;
  s.expect("[");
  s.skipWhitespace();
  let found: string | null = null;
  let index = 0;
  if (s.peek() !== "]") {
    while (true) {
      if (!target && index === path[depth]) {
        found = scanValue(s, path, depth + 1);
      } else {
        scanValue(s, [], 0); // consume the subtree
      }
      index += 1;
      s.skipWhitespace();
      if (s.peek() === ",") {
        s.pos += 1;
        s.skipWhitespace();
        continue;
      }
      break;
    }
  }
  s.skipWhitespace();
  s.expect("]");
  if (target) return s.text.slice(start, s.pos);
  if (found === null) throw new Error(`index ${String(path[depth])} not found`);
  return found;
}
