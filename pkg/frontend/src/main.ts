// App shell: connect to the session server, wire the three views, the tool
// palette, the annotation list, and the alert feed.

import * as THREE from "three";

import { DrawState, buildTombstone } from "./authoring.js";
import { previewFrame, overlayToPixels } from "./preview.js";
import { FirstPersonView, OrbitView, TerrainScene, TopDownView, pickTerrainXY } from "./render3d.js";
import { ClientSession } from "./session.js";
import { AnnotationKind, isPoint } from "./store.js";
import { TerrainField, containsXY, elevationAt, parseAsciiGrid } from "./terrain.js";
import { PoseDoc, Role, sha256Hex } from "./wire.js";

const EYE_HEIGHT = 1.7;
const HFOV = (70 * Math.PI) / 180;
const STALE_AFTER_MS = 5000;

type UiMode = "guide" | "skier-preview";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element ${id}`);
  return node as T;
}

function makeRenderer(canvas: HTMLCanvasElement): THREE.WebGLRenderer {
  const renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
  renderer.setPixelRatio(window.devicePixelRatio);
  return renderer;
}

class App {
  session!: ClientSession;
  terrain!: TerrainField;
  scene!: TerrainScene;
  orbit!: OrbitView;
  top!: TopDownView;
  fp!: FirstPersonView;
  socket!: WebSocket;
  mode: UiMode = "guide";
  draw = new DrawState();
  selectedSkier: string | null = null;
  previewPose: PoseDoc | null = null; // driven locally in skier-preview mode
  keys = new Set<string>();

  async connect(url: string, mode: UiMode, senderId: string): Promise<void> {
    this.mode = mode;
    const httpBase = url.replace(/^ws/, "http").replace(/\/ws$/, "");
    const text = await (await fetch(`${httpBase}/terrain.asc`)).text();
    this.terrain = parseAsciiGrid(text);
    const terrainHash = await sha256Hex(text);

    this.scene = new TerrainScene(this.terrain);
    this.orbit = new OrbitView(this.scene, makeRenderer(el<HTMLCanvasElement>("orbit-canvas")));
    this.top = new TopDownView(this.scene, makeRenderer(el<HTMLCanvasElement>("top-canvas")));
    this.fp = new FirstPersonView(this.scene, makeRenderer(el<HTMLCanvasElement>("fp-canvas")));

    const role: Role = mode === "guide" ? "guide" : "skier";
    this.socket = new WebSocket(url);
    this.session = new ClientSession(senderId, role, {
      send: (frame) => this.socket.send(frame),
    });
    this.session.on((kind) => {
      if (kind === "mirror") this.refreshAnnotations();
      if (kind === "view_state") this.refreshTracks();
      if (kind === "alert") this.refreshAlerts();
      if (kind === "error") this.showBanner(`server: ${this.session.lastError}`, false);
    });
    this.socket.onopen = () => {
      this.session.hello(terrainHash);
      this.showBanner("", true);
    };
    this.socket.onmessage = (ev) => this.session.handleFrame(String(ev.data));
    this.socket.onclose = () => this.showBanner("connection lost", false);

    if (mode === "skier-preview") {
      const c = this.scene.center();
      this.previewPose = this.poseAt(c.x, c.y, -Math.PI / 2, -0.1);
      this.selectedSkier = senderId;
      document.body.classList.add("skier-mode");
      setInterval(() => this.stepPreviewPose(), 200);
    }

    this.wireInputs();
    this.refreshAnnotations();
    const frame = () => {
      this.renderAll();
      requestAnimationFrame(frame);
    };
    requestAnimationFrame(frame);
    setInterval(() => this.session.ping(), 5000);
    setInterval(() => this.updateStaleness(), 1000);
  }

  poseAt(x: number, y: number, yaw: number, pitch: number): PoseDoc {
    const canvas = el<HTMLCanvasElement>("fp-canvas");
    const aspect = canvas.clientWidth / Math.max(1, canvas.clientHeight) || 16 / 9;
    return { x, y, z: elevationAt(this.terrain, x, y) + EYE_HEIGHT, yaw, pitch, hfov: HFOV, aspect };
  }

  stepPreviewPose(): void {
    if (this.previewPose === null) return;
    const pose = this.previewPose;
    const step = 2.0;
    let { x, y, yaw, pitch } = pose;
    if (this.keys.has("arrowleft") || this.keys.has("a")) yaw += 0.12;
    if (this.keys.has("arrowright") || this.keys.has("d")) yaw -= 0.12;
    if (this.keys.has("q")) pitch = Math.min(1.2, pitch + 0.06);
    if (this.keys.has("e")) pitch = Math.max(-1.2, pitch - 0.06);
    let nx = x;
    let ny = y;
    if (this.keys.has("arrowup") || this.keys.has("w")) {
      nx += step * Math.cos(yaw);
      ny += step * Math.sin(yaw);
    }
    if (this.keys.has("arrowdown") || this.keys.has("s")) {
      nx -= step * Math.cos(yaw);
      ny -= step * Math.sin(yaw);
    }
    if (!containsXY(this.terrain, nx, ny)) {
      nx = x;
      ny = y;
    }
    this.previewPose = this.poseAt(nx, ny, yaw, pitch);
    const speed = Math.hypot(nx - x, ny - y) / 0.2;
    this.session.sendPose(this.previewPose, speed);
  }

  wireInputs(): void {
    window.addEventListener("keydown", (ev) => this.keys.add(ev.key.toLowerCase()));
    window.addEventListener("keyup", (ev) => this.keys.delete(ev.key.toLowerCase()));

    for (const tool of ["hazard", "slow_zone", "safe_zone"] as AnnotationKind[]) {
      el<HTMLButtonElement>(`tool-${tool}`).onclick = () => {
        this.draw.begin(tool);
        this.refreshSketch();
      };
    }
    el<HTMLButtonElement>("tool-confirm").onclick = () => this.confirmSketch();
    el<HTMLButtonElement>("tool-cancel").onclick = () => {
      this.draw.cancel();
      this.refreshSketch();
    };

    const tap = (canvas: HTMLCanvasElement, camera: THREE.Camera) => (ev: MouseEvent) => {
      if (this.mode !== "guide" || this.draw.tool === null) return;
      const xy = pickTerrainXY(this.scene, camera, canvas, ev.clientX, ev.clientY);
      if (xy !== null) {
        this.draw.addTap(xy[0], xy[1]);
        this.refreshSketch();
      }
    };
    const topCanvas = el<HTMLCanvasElement>("top-canvas");
    topCanvas.addEventListener("click", (ev) => tap(topCanvas, this.top.camera)(ev));
    const orbitCanvas = el<HTMLCanvasElement>("orbit-canvas");
    orbitCanvas.addEventListener("click", (ev) => tap(orbitCanvas, this.orbit.camera)(ev));

    el<HTMLSelectElement>("skier-select").onchange = (ev) => {
      this.selectedSkier = (ev.target as HTMLSelectElement).value || null;
    };
  }

  confirmSketch(): void {
    const status = el<HTMLDivElement>("tool-status");
    const params = {
      label: el<HTMLInputElement>("param-label").value,
      speedLimit: Number(el<HTMLInputElement>("param-speed").value) || undefined,
      radius: Number(el<HTMLInputElement>("param-radius").value) || undefined,
    };
    if (!this.draw.canConfirm()) {
      status.textContent = "sketch incomplete (zones need at least 3 taps)";
      return;
    }
    const violations = this.draw.validate(this.terrain, params);
    if (violations.length > 0) {
      status.textContent = `rejected: ${violations.join(", ")}`;
      return;
    }
    const annotation = this.draw.confirm(
      this.terrain, this.session.mirror, this.session.senderId, params, Date.now(),
    );
    this.session.sendUpsert(annotation);
    status.textContent = `sent ${annotation.kind} (${annotation.id})`;
    this.refreshSketch();
  }

  deleteAnnotation(id: string): void {
    const tombstone = buildTombstone(this.session.mirror, id, this.session.senderId, Date.now());
    this.session.sendDelete(tombstone);
    this.session.mirror.merge(tombstone); // optimistic hide; rebroadcast is idempotent
    this.refreshAnnotations();
  }

  refreshSketch(): void {
    this.scene.setSketch(this.draw.vertices);
    el<HTMLDivElement>("tool-status").textContent =
      this.draw.tool === null
        ? ""
        : `${this.draw.tool}: ${this.draw.vertices.length} tap(s)`;
  }

  refreshAnnotations(): void {
    const live = this.session.mirror.live();
    this.scene.setAnnotations(live);
    const list = el<HTMLUListElement>("annotation-list");
    list.innerHTML = "";
    for (const ann of live) {
      const item = document.createElement("li");
      const where = isPoint(ann.geometry)
        ? `(${ann.geometry.point.x.toFixed(0)}, ${ann.geometry.point.y.toFixed(0)})`
        : `${ann.geometry.polygon.length} vertices`;
      item.textContent = `${ann.kind} ${ann.label || ann.id} ${where} `;
      if (this.mode === "guide") {
        const btn = document.createElement("button");
        btn.textContent = "delete";
        btn.onclick = () => this.deleteAnnotation(ann.id);
        item.appendChild(btn);
      }
      list.appendChild(item);
    }
  }

  refreshTracks(): void {
    const poses = new Map<string, PoseDoc>();
    for (const skierId of this.session.skierIds()) {
      const vs = this.session.viewStates.get(skierId);
      if (vs !== undefined) poses.set(skierId, vs.pose);
    }
    this.scene.setTracks(poses);
    const select = el<HTMLSelectElement>("skier-select");
    const current = new Set([...select.options].map((o) => o.value));
    for (const skierId of this.session.skierIds()) {
      if (!current.has(skierId)) {
        const opt = document.createElement("option");
        opt.value = skierId;
        opt.textContent = skierId;
        select.appendChild(opt);
        if (this.selectedSkier === null) this.selectedSkier = skierId;
      }
    }
  }

  refreshAlerts(): void {
    const feed = el<HTMLUListElement>("alert-feed");
    feed.innerHTML = "";
    for (const alert of this.session.alerts.slice(-12).reverse()) {
      const item = document.createElement("li");
      item.textContent = `${alert.kind} [${alert.skier_id}] ${alert.detail}`;
      feed.appendChild(item);
    }
  }

  updateStaleness(): void {
    const last = this.session.lastMessageAt;
    const stale = last !== null && Date.now() - last > STALE_AFTER_MS;
    el<HTMLDivElement>("stale-indicator").style.display = stale ? "block" : "none";
  }

  showBanner(text: string, connected: boolean): void {
    const banner = el<HTMLDivElement>("banner");
    banner.textContent = text;
    banner.style.display = text === "" ? "none" : "block";
    banner.className = connected ? "banner" : "banner lost";
  }

  renderFirstPersonOverlays(): void {
    const layer = el<HTMLDivElement>("fp-overlays");
    layer.innerHTML = "";
    const frame = previewFrame(this.session, this.selectedSkier);
    if (frame === null) return;
    const canvas = el<HTMLCanvasElement>("fp-canvas");
    for (const overlay of frame.overlays) {
      const marker = document.createElement("div");
      marker.className = `hud hud-${overlay.kind}`;
      const { x, y } = overlayToPixels(overlay, canvas.clientWidth, canvas.clientHeight);
      marker.style.left = `${x}px`;
      marker.style.top = `${y}px`;
      marker.textContent = `${overlay.annotation_id} ${overlay.distance.toFixed(0)}m`;
      layer.appendChild(marker);
    }
  }

  renderAll(): void {
    if (this.scene === undefined) return;
    for (const view of [
      ["orbit-canvas", () => this.orbit.render()],
      ["top-canvas", () => this.top.render()],
    ] as const) {
      const canvas = el<HTMLCanvasElement>(view[0]);
      const renderer =
        view[0] === "orbit-canvas" ? this.orbit.renderer : this.top.renderer;
      if (canvas.width !== canvas.clientWidth || canvas.height !== canvas.clientHeight) {
        renderer.setSize(canvas.clientWidth, canvas.clientHeight, false);
      }
      view[1]();
    }
    const fpCanvas = el<HTMLCanvasElement>("fp-canvas");
    if (fpCanvas.width !== fpCanvas.clientWidth || fpCanvas.height !== fpCanvas.clientHeight) {
      this.fp.renderer.setSize(fpCanvas.clientWidth, fpCanvas.clientHeight, false);
    }
    // Guide: render the selected skier's last server-computed pose; preview
    // mode renders the locally driven pose (the server echoes it back in
    // VIEW_STATE, but local rendering keeps motion smooth).
    const frame = previewFrame(this.session, this.selectedSkier);
    const pose = this.mode === "skier-preview" ? this.previewPose : frame?.pose ?? null;
    this.fp.render(pose);
    this.renderFirstPersonOverlays();
  }
}

const app = new App();
el<HTMLButtonElement>("connect").onclick = () => {
  const url = el<HTMLInputElement>("server-url").value;
  const mode = el<HTMLSelectElement>("mode-select").value as UiMode;
  const senderId =
    el<HTMLInputElement>("sender-id").value ||
    `${mode === "guide" ? "guide" : "skier"}-${Math.floor(Math.random() * 1e4)}`;
  el<HTMLDivElement>("connect-bar").style.display = "none";
  app.connect(url, mode, senderId).catch((err) => {
    el<HTMLDivElement>("connect-bar").style.display = "block";
    app.showBanner(`connect failed: ${err}`, false);
  });
};
