/** Canonical JSON encoder byte-compatible with the Python toolkit.
 *
 * Canonical form: keys sorted, compact separators, ASCII-escaped
 * strings, floats printed as C's "%.17g" would print them, -0
 * collapsed to 0, single trailing newline.
 */

/** 17-significant-digit shortest fixed/exponential form ("%.17g"). */
export function formatG17(x: number): string {
  if (!Number.isFinite(x)) {
    throw new Error(`non-finite float ${x} not representable`);
  }
  if (x === 0) {
    return "0"; // collapses -0 so reserialization is stable
  }
  // integers below the %g exponent threshold print in plain decimal
  if (Number.isInteger(x) && Math.abs(x) < 1e17) {
    return x.toString();
  }
  // toExponential(16) is correctly rounded to 17 significant digits,
  // the same digits %.17g produces
  const [mant, expStr] = x.toExponential(16).split("e");
  const exp = parseInt(expStr, 10);
  let m = mant;
  if (m.includes(".")) {
    m = m.replace(/0+$/, "").replace(/\.$/, "");
  }
  const neg = m.startsWith("-");
  const digits = (neg ? m.slice(1) : m).replace(".", "");
  if (exp < -4 || exp >= 17) {
    const sign = exp < 0 ? "-" : "+";
    const mag = Math.abs(exp).toString().padStart(2, "0");
    return `${m}e${sign}${mag}`;
  }
  let body: string;
  if (exp >= digits.length - 1) {
    body = digits + "0".repeat(exp - (digits.length - 1));
  } else if (exp >= 0) {
    body = digits.slice(0, exp + 1) + "." + digits.slice(exp + 1);
  } else {
    body = "0." + "0".repeat(-exp - 1) + digits;
  }
  return (neg ? "-" : "") + body;
}

const SHORT_ESCAPES: Record<number, string> = {
  0x08: "\\b",
  0x09: "\\t",
  0x0a: "\\n",
  0x0c: "\\f",
  0x0d: "\\r",
};

function encodeString(s: string): string {
  let out = '"';
  for (let i = 0; i < s.length; i++) {
    const code = s.charCodeAt(i);
    const ch = s[i];
    if (ch === '"') {
      out += '\\"';
    } else if (ch === "\\") {
      out += "\\\\";
    } else if (code in SHORT_ESCAPES) {
      out += SHORT_ESCAPES[code];
    } else if (code < 0x20 || code > 0x7e) {
      out += "\\u" + code.toString(16).padStart(4, "0");
    } else {
      out += ch;
    }
  }
  return out + '"';
}

function encode(value: unknown, out: string[]): void {
  if (value === null) {
    out.push("null");
  } else if (value === true || value === false) {
    out.push(value ? "true" : "false");
  } else if (typeof value === "number") {
    out.push(formatG17(value));
  } else if (typeof value === "string") {
    out.push(encodeString(value));
  } else if (Array.isArray(value)) {
    out.push("[");
    value.forEach((v, i) => {
      if (i) out.push(",");
      encode(v, out);
    });
    out.push("]");
  } else if (typeof value === "object") {
    const obj = value as Record<string, unknown>;
    out.push("{");
    Object.keys(obj)
      .sort()
      .forEach((k, i) => {
        if (i) out.push(",");
        out.push(encodeString(k), ":");
        encode(obj[k], out);
      });
    out.push("}");
  } else {
    throw new Error(`unsupported type ${typeof value}`);
  }
}

export function canonicalJson(value: unknown): string {
  const out: string[] = [];
  encode(value, out);
  out.push("\n");
  return out.join("");
}
