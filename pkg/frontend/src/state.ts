/** Annotation session: tools, layer stamping, undo/redo, import/export.
 *
 * Every committed edit snapshots the working AnnotationSet, so N edits
 * followed by N undos restore the initial serialized state
 * byte-for-byte (the canonical encoder is deterministic).
 */

import { canonicalJson } from "./canonical";
import {
  AnnotatedPoint,
  AnnotationSet,
  MAX_LAYER_ID,
  ReferenceGroup,
  Tool,
  cloneSet,
} from "./types";
import { validate } from "./validate";

interface PendingGroup {
  ref: AnnotatedPoint;
}

function nextId(prefix: string, existing: string[]): string {
  let max = 0;
  for (const id of existing) {
    const m = id.match(new RegExp(`^${prefix}-(\\d+)$`));
    if (m) max = Math.max(max, parseInt(m[1], 10));
  }
  return `${prefix}-${max + 1}`;
}

export class Session {
  tool: Tool = "line";
  layer = 1;
  /** Line in progress: clicks accumulated before commitLine(). */
  draft: AnnotatedPoint[] = [];
  /** Reference placed but not yet materialized as a group. */
  pending: PendingGroup | null = null;
  /** Id of the line/group receiving front/behind points. */
  selected: string | null = null;
  notice: string | null = null;

  private set: AnnotationSet;
  private undoStack: AnnotationSet[] = [];
  private redoStack: AnnotationSet[] = [];

  constructor(imageId: string, width: number, height: number) {
    this.set = { image_id: imageId, width, height, lines: [], groups: [] };
  }

  get annotations(): AnnotationSet {
    return this.set;
  }

  setTool(tool: Tool): void {
    this.tool = tool;
    this.notice = null;
  }

  setLayer(layer: number): void {
    if (Number.isInteger(layer) && layer >= 1 && layer <= MAX_LAYER_ID) {
      this.layer = layer;
    }
  }

  selectTarget(id: string): void {
    const known = [...this.set.lines, ...this.set.groups].some((a) => a.id === id);
    if (known) {
      this.selected = id;
      this.pending = null;
    }
  }

  private inBounds(x: number, y: number): boolean {
    return x >= 0 && x < this.set.width && y >= 0 && y < this.set.height;
  }

  private commit(edit: (s: AnnotationSet) => void): void {
    this.undoStack.push(cloneSet(this.set));
    this.redoStack = [];
    edit(this.set);
  }

  /** Handle a canvas click at sub-pixel image coordinates. */
  click(x: number, y: number): void {
    if (!this.inBounds(x, y)) {
      return; // clicks outside the image are ignored
    }
    const p: AnnotatedPoint = { x, y, layer: this.layer };
    this.notice = null;
    if (this.tool === "line") {
      this.draft.push(p);
      return;
    }
    if (this.tool === "reference") {
      this.pending = { ref: p };
      this.selected = null;
      return;
    }
    // front-point / behind-point
    const polarity = this.tool === "front-point" ? "front" : "behind";
    if (this.pending) {
      const ref = this.pending.ref;
      this.commit((s) => {
        const grp: ReferenceGroup = { id: nextId("group", ids(s)), ref,
                                      front: [], behind: [] };
        grp[polarity].push(p);
        s.groups.push(grp);
        this.selected = grp.id;
      });
      this.pending = null;
      return;
    }
    if (!this.selected) {
      this.notice = "select a line or place a reference first";
      return;
    }
    const id = this.selected;
    this.commit((s) => {
      const target = [...s.lines, ...s.groups].find((a) => a.id === id);
      if (target) target[polarity].push(p);
    });
  }

  /** Finish the line in progress; <2 points discards it with a notice. */
  commitLine(): void {
    const pts = this.draft;
    this.draft = [];
    if (pts.length < 2) {
      this.notice = "line needs at least 2 points; discarded";
      return;
    }
    this.commit((s) => {
      const id = nextId("line", ids(s));
      s.lines.push({ id, points: pts, front: [], behind: [] });
      this.selected = id;
    });
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (!prev) return false;
    this.redoStack.push(this.set);
    this.set = prev;
    this.draft = [];
    this.pending = null;
    this.selected = null;
    return true;
  }

  redo(): boolean {
    const next = this.redoStack.pop();
    if (!next) return false;
    this.undoStack.push(this.set);
    this.set = next;
    return true;
  }

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  validateWorkingSet(): string[] {
    return validate(this.set);
  }

  /** Canonical bytes matching the Python toolkit's serializer. */
  exportJson(): string {
    return canonicalJson({
      image_id: this.set.image_id,
      width: this.set.width,
      height: this.set.height,
      lines: this.set.lines.map((l) => ({
        id: l.id,
        points: l.points.map(pointJson),
        front: l.front.map(pointJson),
        behind: l.behind.map(pointJson),
      })),
      groups: this.set.groups.map((g) => ({
        id: g.id,
        ref: pointJson(g.ref),
        front: g.front.map(pointJson),
        behind: g.behind.map(pointJson),
      })),
    });
  }

  /** Replace the session from a file; returns schema errors (empty = ok). */
  importJson(text: string): string[] {
    let doc: unknown;
    try {
      doc = JSON.parse(text);
    } catch (e) {
      return [`parse error: ${e instanceof Error ? e.message : String(e)}`];
    }
    const result = parseAnnotationSet(doc);
    if (result.errors.length > 0 || result.set === null) {
      return result.errors;
    }
    const violations = validate(result.set);
    if (violations.length > 0) {
      return violations;
    }
    this.set = result.set;
    this.undoStack = [];
    this.redoStack = [];
    this.draft = [];
    this.pending = null;
    this.selected = null;
    return [];
  }
}

function ids(s: AnnotationSet): string[] {
  return [...s.lines, ...s.groups].map((a) => a.id);
}

function pointJson(p: AnnotatedPoint) {
  return { x: p.x, y: p.y, layer: p.layer };
}

// ---------------------------------------------------------------------------
// strict schema parsing (mirrors the Python field checks)

interface ParseResult {
  set: AnnotationSet | null;
  errors: string[];
}

function isRecord(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

function checkKeys(obj: Record<string, unknown>, path: string,
                   required: string[], errors: string[]): boolean {
  let ok = true;
  for (const k of Object.keys(obj)) {
    if (!required.includes(k)) {
      errors.push(`${path}.${k}: unknown field`);
      ok = false;
    }
  }
  for (const k of required) {
    if (!(k in obj)) {
      errors.push(`${path}.${k}: missing field`);
      ok = false;
    }
  }
  return ok;
}

function parsePoint(v: unknown, path: string, errors: string[]): AnnotatedPoint | null {
  if (!isRecord(v)) {
    errors.push(`${path}: expected object`);
    return null;
  }
  if (!checkKeys(v, path, ["x", "y", "layer"], errors)) return null;
  if (typeof v.x !== "number" || typeof v.y !== "number") {
    errors.push(`${path}: x and y must be numbers`);
    return null;
  }
  if (typeof v.layer !== "number" || !Number.isInteger(v.layer)) {
    errors.push(`${path}.layer: must be an integer`);
    return null;
  }
  return { x: v.x, y: v.y, layer: v.layer };
}

function parsePoints(v: unknown, path: string, errors: string[]): AnnotatedPoint[] {
  if (!Array.isArray(v)) {
    errors.push(`${path}: expected array`);
    return [];
  }
  const out: AnnotatedPoint[] = [];
  v.forEach((item, i) => {
    const p = parsePoint(item, `${path}[${i}]`, errors);
    if (p) out.push(p);
  });
  return out;
}

export function parseAnnotationSet(doc: unknown): ParseResult {
  const errors: string[] = [];
  if (!isRecord(doc)) {
    return { set: null, errors: ["$: expected object"] };
  }
  if (!checkKeys(doc, "$", ["image_id", "width", "height", "lines", "groups"],
                 errors)) {
    return { set: null, errors };
  }
  if (typeof doc.image_id !== "string") errors.push("$.image_id: must be a string");
  for (const k of ["width", "height"] as const) {
    const v = doc[k];
    if (typeof v !== "number" || !Number.isInteger(v) || v < 1) {
      errors.push(`$.${k}: must be a positive integer`);
    }
  }
  const lines = (Array.isArray(doc.lines) ? doc.lines : []).map((obj, i) => {
    const path = `$.lines[${i}]`;
    if (!isRecord(obj) || !checkKeys(obj, path, ["id", "points", "front", "behind"], errors)) {
      return null;
    }
    return {
      id: String(obj.id),
      points: parsePoints(obj.points, `${path}.points`, errors),
      front: parsePoints(obj.front, `${path}.front`, errors),
      behind: parsePoints(obj.behind, `${path}.behind`, errors),
    };
  });
  if (!Array.isArray(doc.lines)) errors.push("$.lines: expected array");
  const groups = (Array.isArray(doc.groups) ? doc.groups : []).map((obj, i) => {
    const path = `$.groups[${i}]`;
    if (!isRecord(obj) || !checkKeys(obj, path, ["id", "ref", "front", "behind"], errors)) {
      return null;
    }
    const ref = parsePoint(obj.ref, `${path}.ref`, errors);
    if (!ref) return null;
    return {
      id: String(obj.id),
      ref,
      front: parsePoints(obj.front, `${path}.front`, errors),
      behind: parsePoints(obj.behind, `${path}.behind`, errors),
    };
  });
  if (!Array.isArray(doc.groups)) errors.push("$.groups: expected array");
  if (errors.length > 0) {
    return { set: null, errors };
  }
  return {
    set: {
      image_id: doc.image_id as string,
      width: doc.width as number,
      height: doc.height as number,
      lines: lines.filter((l): l is NonNullable<typeof l> => l !== null),
      groups: groups.filter((g): g is NonNullable<typeof g> => g !== null),
    },
    errors,
  };
}
