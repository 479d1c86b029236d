/**
 * Browser entry point: wires the session store and viewer math to the page.
 *
 * All logic with behavior worth testing lives in api.ts, state.ts and
 * viewer.ts; this module only reads DOM elements, forwards events, and
 * re-renders on store notifications.
 */

import { createClient } from "./api.js";
import { createSession } from "./state.js";
import { drawPath } from "./viewer.js";
import type { PathDrawing } from "./viewer.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

function apiBase(): string {
  const override = new URLSearchParams(window.location.search).get("api");
  return override ?? "http://localhost:8000";
}

function renderDrawing(svg: SVGSVGElement, drawing: PathDrawing): void {
  svg.setAttribute("viewBox", drawing.viewBox);
  while (svg.firstChild !== null) svg.removeChild(svg.firstChild);
  if (drawing.points.length === 0) return;

  const path = document.createElementNS(SVG_NS, "polyline");
  path.setAttribute("points", drawing.polyline);
  path.setAttribute("class", "path");
  svg.appendChild(path);

  for (const fr of drawing.frusta) {
    const ray = document.createElementNS(SVG_NS, "line");
    ray.setAttribute("x1", String(fr.tip[0]));
    ray.setAttribute("y1", String(fr.tip[1]));
    ray.setAttribute("x2", String(fr.tip[0] + fr.dir[0] * 14));
    ray.setAttribute("y2", String(fr.tip[1] + fr.dir[1] * 14));
    ray.setAttribute("class", "frustum");
    svg.appendChild(ray);
    const dot = document.createElementNS(SVG_NS, "circle");
    dot.setAttribute("cx", String(fr.tip[0]));
    dot.setAttribute("cy", String(fr.tip[1]));
    dot.setAttribute("r", "2.5");
    dot.setAttribute("class", "frame-dot");
    svg.appendChild(dot);
  }

  for (const anchor of drawing.anchors) {
    const mark = document.createElementNS(SVG_NS, "circle");
    mark.setAttribute("cx", String(anchor.point[0]));
    mark.setAttribute("cy", String(anchor.point[1]));
    mark.setAttribute("r", "6");
    mark.setAttribute("class", `anchor anchor-${anchor.role}`);
    const tip = document.createElementNS(SVG_NS, "title");
    tip.textContent = `${anchor.role}: ${anchor.prompt}`;
    mark.appendChild(tip);
    svg.appendChild(mark);
  }
}

function main(): void {
  const api = createClient(apiBase());
  const session = createSession(api);

  const form = el<HTMLFormElement>("prompt-form");
  const promptInput = el<HTMLInputElement>("prompt-input");
  const sceneSelect = el<HTMLSelectElement>("scene-select");
  const historyList = el<HTMLUListElement>("history");
  const scrub = el<HTMLInputElement>("scrub");
  const readout = el("camera-readout");
  const exportBtn = el<HTMLButtonElement>("export-btn");
  const status = el("status");
  const svg = document.getElementById("viewer") as SVGSVGElement | null;
  if (svg === null) throw new Error("missing #viewer");

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const prompt = promptInput.value.trim();
    if (prompt === "") return;
    void session.submitPrompt(prompt);
  });

  sceneSelect.addEventListener("change", () => {
    session.selectScene(sceneSelect.value === "" ? null : sceneSelect.value);
  });

  scrub.addEventListener("input", () => {
    session.scrubPlayback(Number(scrub.value));
  });

  exportBtn.addEventListener("click", () => {
    void session.exportPath().then((file) => {
      if (file === null) return;
      const url = URL.createObjectURL(new Blob([file.content], { type: "application/json" }));
      const a = document.createElement("a");
      a.href = url;
      a.download = file.filename;
      a.click();
      URL.revokeObjectURL(url);
    });
  });

  function renderHistory(): void {
    while (historyList.firstChild !== null) historyList.removeChild(historyList.firstChild);
    for (const entry of session.state.history) {
      const li = document.createElement("li");
      li.className = `entry entry-${entry.status}`;
      const label = document.createElement("span");
      label.textContent = entry.prompt;
      li.appendChild(label);
      const badge = document.createElement("span");
      badge.className = "badge";
      badge.textContent =
        entry.status === "error" && entry.error !== null
          ? `${entry.status}: ${entry.error.code}`
          : entry.status;
      li.appendChild(badge);
      if (entry.status === "error") {
        const retry = document.createElement("button");
        retry.textContent = "retry";
        retry.addEventListener("click", () => void session.submitPrompt(entry.prompt));
        li.appendChild(retry);
      }
      historyList.appendChild(li);
    }
  }

  function render(): void {
    renderHistory();
    const selected = session.state.selected;
    exportBtn.disabled = selected === null;
    if (selected === null) {
      scrub.disabled = true;
      readout.textContent = "no trajectory";
      return;
    }
    const frames = selected.trajectory.frames;
    scrub.disabled = false;
    scrub.max = String(frames.length - 1);
    scrub.value = String(session.state.frameIndex);
    renderDrawing(svg!, drawPath(frames, selected.plan));
    const cam = session.viewerCamera();
    if (cam !== null) {
      const t = cam.trans.map((x) => x.toFixed(3)).join(", ");
      readout.textContent =
        `frame ${session.state.frameIndex + 1}/${frames.length}  ` +
        `t = (${t})  fov = ${cam.fovDeg.toFixed(1)} deg`;
    }
  }

  session.subscribe(render);
  render();

  api
    .scenes()
    .then((scenes) => {
      for (const s of scenes) {
        const opt = document.createElement("option");
        opt.value = s.scene_id;
        opt.textContent = `${s.scene_id} (${s.image_count} images)`;
        sceneSelect.appendChild(opt);
      }
      status.textContent = "";
    })
    .catch((err) => {
      status.textContent = `service unreachable: ${String(err)}`;
    });
}

main();
