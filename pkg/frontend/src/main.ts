/** Canvas wiring for the annotator: image loading, tool buttons,
 * keyboard shortcuts, rendering, export/import.
 */

import { Session } from "./state";
import { AnnotatedPoint, Tool } from "./types";

const canvas = document.getElementById("canvas") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const noticeEl = document.getElementById("notice")!;
const errorsEl = document.getElementById("errors")!;
const layerEl = document.getElementById("layer")!;

let session = new Session("untitled", canvas.width, canvas.height);
let image: HTMLImageElement | null = null;

const TOOLS: Tool[] = ["line", "front-point", "behind-point", "reference"];

function setTool(tool: Tool): void {
  session.setTool(tool);
  for (const t of TOOLS) {
    document.getElementById(`tool-${t}`)!.classList.toggle("active", t === tool);
  }
  render();
}

function lerpColor(t: number): string {
  // red (near) to blue (far) along the line direction
  const r = Math.round(230 * (1 - t) + 40 * t);
  const b = Math.round(40 * (1 - t) + 230 * t);
  return `rgb(${r},60,${b})`;
}

function drawPoint(p: AnnotatedPoint, color: string, shape: "dot" | "diamond" = "dot"): void {
  ctx.fillStyle = color;
  ctx.beginPath();
  if (shape === "diamond") {
    ctx.moveTo(p.x, p.y - 6);
    ctx.lineTo(p.x + 6, p.y);
    ctx.lineTo(p.x, p.y + 6);
    ctx.lineTo(p.x - 6, p.y);
    ctx.closePath();
  } else {
    ctx.arc(p.x, p.y, 4, 0, 2 * Math.PI);
  }
  ctx.fill();
  ctx.fillStyle = "#111";
  ctx.font = "10px sans-serif";
  ctx.fillText(String(p.layer), p.x + 6, p.y - 6);
}

function render(): void {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (image) {
    ctx.drawImage(image, 0, 0);
  } else {
    ctx.fillStyle = "#ddd";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
  }
  const aset = session.annotations;
  for (const line of aset.lines) {
    const n = line.points.length;
    for (let i = 0; i + 1 < n; i++) {
      ctx.strokeStyle = lerpColor((i + 0.5) / Math.max(n - 1, 1));
      ctx.lineWidth = line.id === session.selected ? 3 : 2;
      ctx.beginPath();
      ctx.moveTo(line.points[i].x, line.points[i].y);
      ctx.lineTo(line.points[i + 1].x, line.points[i + 1].y);
      ctx.stroke();
    }
    line.points.forEach((p, i) => drawPoint(p, lerpColor(n > 1 ? i / (n - 1) : 0)));
    line.front.forEach((p) => drawPoint(p, "rgb(230,60,40)"));
    line.behind.forEach((p) => drawPoint(p, "rgb(40,60,230)"));
  }
  for (const grp of aset.groups) {
    drawPoint(grp.ref, "rgb(240,200,30)", "diamond");
    grp.front.forEach((p) => drawPoint(p, "rgb(230,60,40)"));
    grp.behind.forEach((p) => drawPoint(p, "rgb(40,60,230)"));
  }
  // in-progress artifacts
  if (session.draft.length > 0) {
    ctx.strokeStyle = "#888";
    ctx.setLineDash([4, 3]);
    ctx.beginPath();
    session.draft.forEach((p, i) =>
      i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y));
    ctx.stroke();
    ctx.setLineDash([]);
    session.draft.forEach((p) => drawPoint(p, "#888"));
  }
  if (session.pending) {
    drawPoint(session.pending.ref, "rgb(240,200,30)", "diamond");
  }
  layerEl.textContent = String(session.layer);
  noticeEl.textContent = session.notice ?? "";
}

canvas.addEventListener("click", (ev) => {
  const rect = canvas.getBoundingClientRect();
  // sub-pixel coordinates are preserved as reals
  session.click(ev.clientX - rect.left, ev.clientY - rect.top);
  render();
});

for (const t of TOOLS) {
  document.getElementById(`tool-${t}`)!.addEventListener("click", () => setTool(t));
}
document.getElementById("finish-line")!.addEventListener("click", () => {
  session.commitLine();
  render();
});
document.getElementById("undo")!.addEventListener("click", () => {
  session.undo();
  render();
});
document.getElementById("redo")!.addEventListener("click", () => {
  session.redo();
  render();
});

document.getElementById("export")!.addEventListener("click", () => {
  const violations = session.validateWorkingSet();
  errorsEl.textContent = violations.join("\n");
  if (violations.length > 0) return;
  const blob = new Blob([session.exportJson()], { type: "application/json" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = `${session.annotations.image_id}.json`;
  a.click();
  URL.revokeObjectURL(a.href);
});

document.getElementById("image-input")!.addEventListener("change", (ev) => {
  const file = (ev.target as HTMLInputElement).files?.[0];
  if (!file) return;
  const img = new Image();
  img.onload = () => {
    canvas.width = img.naturalWidth;
    canvas.height = img.naturalHeight;
    image = img;
    session = new Session(file.name.replace(/\.[^.]+$/, ""),
                          img.naturalWidth, img.naturalHeight);
    render();
  };
  img.src = URL.createObjectURL(file);
});

document.getElementById("import-input")!.addEventListener("change", async (ev) => {
  const file = (ev.target as HTMLInputElement).files?.[0];
  if (!file) return;
  const errors = session.importJson(await file.text());
  errorsEl.textContent = errors.join("\n");
  render();
});

document.addEventListener("keydown", (ev) => {
  if (ev.key >= "1" && ev.key <= "7") {
    session.setLayer(parseInt(ev.key, 10));
  } else if (ev.key === "l" || ev.key === "L") {
    setTool("line");
  } else if (ev.key === "f" || ev.key === "F") {
    setTool("front-point");
  } else if (ev.key === "b" || ev.key === "B") {
    setTool("behind-point");
  } else if (ev.key === "r" || ev.key === "R") {
    setTool("reference");
  } else if (ev.key === "Enter") {
    session.commitLine();
  } else if ((ev.ctrlKey || ev.metaKey) && ev.key === "z") {
    session.undo();
  } else if ((ev.ctrlKey || ev.metaKey) && ev.key === "y") {
    session.redo();
  } else {
    return;
  }
  render();
});

render();
