/** Client-side mirror of the toolkit's annotation validation rules.
 *
 * The Python validate() is the authority; this mirror keeps the
 * working set structurally valid while annotating so exports never
 * surprise the pipeline.
 */

import {
  AnnotatedPoint,
  AnnotationSet,
  MAX_LAYER_ID,
  pointKey,
} from "./types";

function baseEdges(aset: AnnotationSet): Map<string, string[]> {
  const succ = new Map<string, string[]>();
  const add = (a: AnnotatedPoint, b: AnnotatedPoint) => {
    const ka = pointKey(a);
    const list = succ.get(ka) ?? [];
    list.push(pointKey(b));
    succ.set(ka, list);
  };
  for (const line of aset.lines) {
    for (let i = 0; i + 1 < line.points.length; i++) {
      add(line.points[i], line.points[i + 1]);
    }
    for (const f of line.front) {
      for (const p of line.points) add(f, p);
      for (const b of line.behind) add(f, b);
    }
    for (const p of line.points) {
      for (const b of line.behind) add(p, b);
    }
  }
  for (const grp of aset.groups) {
    for (const f of grp.front) {
      add(f, grp.ref);
      for (const b of grp.behind) add(f, b);
    }
    for (const b of grp.behind) add(grp.ref, b);
  }
  return succ;
}

function hasCycle(succ: Map<string, string[]>): boolean {
  const color = new Map<string, number>(); // 1 = on stack, 2 = done
  const visit = (u: string): boolean => {
    color.set(u, 1);
    for (const v of succ.get(u) ?? []) {
      const c = color.get(v) ?? 0;
      if (c === 1) return true;
      if (c === 0 && visit(v)) return true;
    }
    color.set(u, 2);
    return false;
  };
  for (const u of succ.keys()) {
    if ((color.get(u) ?? 0) === 0 && visit(u)) return true;
  }
  return false;
}

export function validate(aset: AnnotationSet): string[] {
  const out: string[] = [];
  const ids = [...aset.lines, ...aset.groups].map((a) => a.id);
  const dup = [...new Set(ids.filter((i) => ids.indexOf(i) !== ids.lastIndexOf(i)))];
  for (const i of dup.sort()) {
    out.push(`id '${i}': duplicate annotation id`);
  }

  const allPoints: AnnotatedPoint[] = [];
  for (const line of aset.lines) {
    allPoints.push(...line.points, ...line.front, ...line.behind);
  }
  for (const grp of aset.groups) {
    allPoints.push(grp.ref, ...grp.front, ...grp.behind);
  }
  for (const p of allPoints) {
    if (!(p.x >= 0 && p.x < aset.width && p.y >= 0 && p.y < aset.height)) {
      out.push(`point (${p.x}, ${p.y}): outside image bounds ` +
               `${aset.width}x${aset.height}`);
    }
    if (!(Number.isInteger(p.layer) && p.layer >= 1 && p.layer <= MAX_LAYER_ID)) {
      out.push(`point (${p.x}, ${p.y}): layer ${p.layer} outside 1..${MAX_LAYER_ID}`);
    }
  }

  for (const line of aset.lines) {
    if (line.points.length < 2) {
      out.push(`line '${line.id}': requires >=2 points`);
    }
    const seen = new Set<string>();
    for (const p of [...line.points, ...line.front, ...line.behind]) {
      const k = pointKey(p);
      if (seen.has(k)) {
        out.push(`line '${line.id}': point (${p.x}, ${p.y}, ${p.layer}) appears twice`);
      }
      seen.add(k);
    }
  }

  for (const grp of aset.groups) {
    if (grp.front.length === 0 && grp.behind.length === 0) {
      out.push(`group '${grp.id}': needs at least one front or behind point`);
    }
    const refKey = pointKey(grp.ref);
    const seen = new Set<string>();
    for (const p of [...grp.front, ...grp.behind]) {
      const k = pointKey(p);
      if (k === refKey) {
        out.push(`group '${grp.id}': reference also listed as front/behind`);
      }
      if (seen.has(k)) {
        out.push(`group '${grp.id}': point (${p.x}, ${p.y}, ${p.layer}) appears twice`);
      }
      seen.add(k);
    }
  }

  if (out.length === 0 && hasCycle(baseEdges(aset))) {
    out.push("annotation set: depth order contains a cycle");
  }
  return out;
}
