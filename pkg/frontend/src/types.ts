/** Annotation schema shared with the Python toolkit (annotations module).
 *
 * Field names and value semantics must match the Python side exactly;
 * exports are serialized with the canonical JSON encoding so the bytes
 * are reproducible across both implementations.
 */

export const MAX_LAYER_ID = 7;

export interface AnnotatedPoint {
  x: number;
  y: number;
  layer: number;
}

/** Ordered front-to-back: depth increases along `points`. */
export interface MonotonicLine {
  id: string;
  points: AnnotatedPoint[];
  front: AnnotatedPoint[];
  behind: AnnotatedPoint[];
}

export interface ReferenceGroup {
  id: string;
  ref: AnnotatedPoint;
  front: AnnotatedPoint[];
  behind: AnnotatedPoint[];
}

export interface AnnotationSet {
  image_id: string;
  width: number;
  height: number;
  lines: MonotonicLine[];
  groups: ReferenceGroup[];
}

export type Tool = "line" | "front-point" | "behind-point" | "reference";

export function pointKey(p: AnnotatedPoint): string {
  return `${p.x}|${p.y}|${p.layer}`;
}

export function clonePoint(p: AnnotatedPoint): AnnotatedPoint {
  return { x: p.x, y: p.y, layer: p.layer };
}

export function cloneSet(s: AnnotationSet): AnnotationSet {
  return {
    image_id: s.image_id,
    width: s.width,
    height: s.height,
    lines: s.lines.map((l) => ({
      id: l.id,
      points: l.points.map(clonePoint),
      front: l.front.map(clonePoint),
      behind: l.behind.map(clonePoint),
    })),
    groups: s.groups.map((g) => ({
      id: g.id,
      ref: clonePoint(g.ref),
      front: g.front.map(clonePoint),
      behind: g.behind.map(clonePoint),
    })),
  };
}
