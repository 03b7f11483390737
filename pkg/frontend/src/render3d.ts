// three.js scene management for the three synchronized viewports: free orbit,
// orthographic top-down, and first-person preview. World frame is Z-up.

import * as THREE from "three";

import { Annotation, isPoint } from "./store.js";
import { TerrainField, elevationAt, buildMeshArrays, maxX, maxY } from "./terrain.js";
import { XY } from "./geometry.js";
import { PoseDoc } from "./wire.js";

const DRAPE_LIFT = 0.3;
const DRAPE_SPACING = 2.0;

const KIND_COLORS: Record<string, number> = {
  hazard: 0xe0452b,
  slow_zone: 0xe8a33d,
  safe_zone: 0x3d7be8,
};

export class TerrainScene {
  readonly scene = new THREE.Scene();
  readonly terrainMesh: THREE.Mesh;
  private annotationGroup = new THREE.Group();
  private trackGroup = new THREE.Group();
  private sketchLine: THREE.Line | null = null;

  constructor(readonly terrain: TerrainField) {
    this.scene.background = new THREE.Color(0xdfe8f2);
    const { positions, indices } = buildMeshArrays(terrain);
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));
    geometry.setIndex(new THREE.BufferAttribute(indices, 1));
    geometry.computeVertexNormals();
    const material = new THREE.MeshLambertMaterial({ color: 0xf2f5f8 });
    this.terrainMesh = new THREE.Mesh(geometry, material);
    this.scene.add(this.terrainMesh);

    const sun = new THREE.DirectionalLight(0xffffff, 1.8);
    sun.position.set(-0.4, -0.7, 1.0);
    this.scene.add(sun);
    this.scene.add(new THREE.AmbientLight(0xb8c4d4, 0.9));
    this.scene.add(this.annotationGroup);
    this.scene.add(this.trackGroup);
  }

  center(): THREE.Vector3 {
    const cx = (this.terrain.originX + maxX(this.terrain)) / 2;
    const cy = (this.terrain.originY + maxY(this.terrain)) / 2;
    return new THREE.Vector3(cx, cy, elevationAt(this.terrain, cx, cy));
  }

  extent(): number {
    return Math.max(
      maxX(this.terrain) - this.terrain.originX,
      maxY(this.terrain) - this.terrain.originY,
    );
  }

  private drapedPoints(vertices: XY[]): THREE.Vector3[] {
    const points: THREE.Vector3[] = [];
    const n = vertices.length;
    for (let k = 0; k < n; k++) {
      const [ax, ay] = vertices[k];
      const [bx, by] = vertices[(k + 1) % n];
      const length = Math.hypot(bx - ax, by - ay);
      const pieces = Math.max(1, Math.ceil(length / DRAPE_SPACING));
      for (let p = 0; p < pieces; p++) {
        const t = p / pieces;
        const x = ax + t * (bx - ax);
        const y = ay + t * (by - ay);
        points.push(new THREE.Vector3(x, y, this.safeElevation(x, y) + DRAPE_LIFT));
      }
    }
    return points;
  }

  private safeElevation(x: number, y: number): number {
    try {
      return elevationAt(this.terrain, x, y);
    } catch {
      return 0;
    }
  }

  /** Rebuild annotation visuals from the mirror's live set. */
  setAnnotations(live: Annotation[]): void {
    this.scene.remove(this.annotationGroup);
    this.annotationGroup = new THREE.Group();
    for (const ann of live) {
      const color = KIND_COLORS[ann.kind] ?? 0x888888;
      if (isPoint(ann.geometry)) {
        const { x, y, radius } = ann.geometry.point;
        const z = this.safeElevation(x, y);
        const marker = new THREE.Mesh(
          new THREE.ConeGeometry(2.5, 9, 10),
          new THREE.MeshLambertMaterial({ color }),
        );
        marker.rotation.x = Math.PI / 2; // cone +Y axis to world +Z
        marker.position.set(x, y, z + 5);
        this.annotationGroup.add(marker);
        const ringPts: THREE.Vector3[] = [];
        for (let a = 0; a <= 48; a++) {
          const phi = (a / 48) * Math.PI * 2;
          const rx = x + radius * Math.cos(phi);
          const ry = y + radius * Math.sin(phi);
          ringPts.push(new THREE.Vector3(rx, ry, this.safeElevation(rx, ry) + DRAPE_LIFT));
        }
        this.annotationGroup.add(
          new THREE.Line(
            new THREE.BufferGeometry().setFromPoints(ringPts),
            new THREE.LineBasicMaterial({ color }),
          ),
        );
      } else {
        const pts = this.drapedPoints(ann.geometry.polygon);
        this.annotationGroup.add(
          new THREE.LineLoop(
            new THREE.BufferGeometry().setFromPoints(pts),
            new THREE.LineBasicMaterial({ color, linewidth: 2 }),
          ),
        );
      }
    }
    this.scene.add(this.annotationGroup);
  }

  /** Latest skier positions as small markers. */
  setTracks(poses: Map<string, PoseDoc>): void {
    this.scene.remove(this.trackGroup);
    this.trackGroup = new THREE.Group();
    for (const [, pose] of poses) {
      const marker = new THREE.Mesh(
        new THREE.SphereGeometry(1.8, 12, 12),
        new THREE.MeshLambertMaterial({ color: 0x23313f }),
      );
      marker.position.set(pose.x, pose.y, pose.z);
      this.trackGroup.add(marker);
    }
    this.scene.add(this.trackGroup);
  }

  setSketch(vertices: XY[]): void {
    if (this.sketchLine !== null) {
      this.scene.remove(this.sketchLine);
      this.sketchLine = null;
    }
    if (vertices.length === 0) return;
    const pts = vertices.map(
      ([x, y]) => new THREE.Vector3(x, y, this.safeElevation(x, y) + DRAPE_LIFT + 0.5),
    );
    this.sketchLine = new THREE.Line(
      new THREE.BufferGeometry().setFromPoints(pts),
      new THREE.LineBasicMaterial({ color: 0x111111 }),
    );
    this.scene.add(this.sketchLine);
  }
}

export class OrbitView {
  readonly camera: THREE.PerspectiveCamera;
  private target: THREE.Vector3;
  private azimuth = -Math.PI / 3;
  private elevation = 0.7;
  private distance: number;

  constructor(
    private readonly scene: TerrainScene,
    readonly renderer: THREE.WebGLRenderer,
  ) {
    this.camera = new THREE.PerspectiveCamera(55, 1, 0.5, 10000);
    this.camera.up.set(0, 0, 1);
    this.target = scene.center();
    this.distance = scene.extent() * 0.9;
    this.attach(renderer.domElement);
  }

  private attach(el: HTMLElement): void {
    let dragging = false;
    let panning = false;
    let lastX = 0;
    let lastY = 0;
    el.addEventListener("pointerdown", (ev) => {
      dragging = ev.button === 0;
      panning = ev.button === 2;
      lastX = ev.clientX;
      lastY = ev.clientY;
    });
    window.addEventListener("pointerup", () => {
      dragging = false;
      panning = false;
    });
    window.addEventListener("pointermove", (ev) => {
      const dx = ev.clientX - lastX;
      const dy = ev.clientY - lastY;
      if (dragging) {
        this.azimuth -= dx * 0.005;
        this.elevation = Math.min(1.5, Math.max(0.05, this.elevation + dy * 0.005));
      } else if (panning) {
        const scale = this.distance * 0.001;
        this.target.x -= (Math.cos(this.azimuth) * dy + Math.sin(this.azimuth) * dx) * scale;
        this.target.y -= (Math.sin(this.azimuth) * dy - Math.cos(this.azimuth) * dx) * scale;
      }
      lastX = ev.clientX;
      lastY = ev.clientY;
    });
    el.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      this.distance = Math.min(
        this.scene.extent() * 4,
        Math.max(20, this.distance * (ev.deltaY > 0 ? 1.12 : 0.89)),
      );
    });
    el.addEventListener("contextmenu", (ev) => ev.preventDefault());
  }

  render(): void {
    const horiz = this.distance * Math.cos(this.elevation);
    this.camera.position.set(
      this.target.x - horiz * Math.cos(this.azimuth),
      this.target.y - horiz * Math.sin(this.azimuth),
      this.target.z + this.distance * Math.sin(this.elevation),
    );
    this.camera.lookAt(this.target);
    const canvas = this.renderer.domElement;
    this.camera.aspect = canvas.clientWidth / Math.max(1, canvas.clientHeight);
    this.camera.updateProjectionMatrix();
    this.renderer.render(this.scene.scene, this.camera);
  }
}

export class TopDownView {
  readonly camera: THREE.OrthographicCamera;

  constructor(
    private readonly scene: TerrainScene,
    readonly renderer: THREE.WebGLRenderer,
  ) {
    const half = scene.extent() / 2 + 10;
    this.camera = new THREE.OrthographicCamera(-half, half, half, -half, 0.1, 5000);
    this.camera.up.set(0, 1, 0); // north up on screen
    const c = scene.center();
    this.camera.position.set(c.x, c.y, c.z + 1500);
    this.camera.lookAt(c.x, c.y, c.z);
  }

  render(): void {
    const canvas = this.renderer.domElement;
    const aspect = canvas.clientWidth / Math.max(1, canvas.clientHeight);
    const half = this.scene.extent() / 2 + 10;
    const halfX = aspect >= 1 ? half * aspect : half;
    const halfY = aspect >= 1 ? half : half / aspect;
    this.camera.left = -halfX;
    this.camera.right = halfX;
    this.camera.top = halfY;
    this.camera.bottom = -halfY;
    this.camera.updateProjectionMatrix();
    this.renderer.render(this.scene.scene, this.camera);
  }
}

export class FirstPersonView {
  readonly camera: THREE.PerspectiveCamera;

  constructor(
    private readonly scene: TerrainScene,
    readonly renderer: THREE.WebGLRenderer,
  ) {
    this.camera = new THREE.PerspectiveCamera(60, 1, 0.2, 5000);
    this.camera.up.set(0, 0, 1);
  }

  render(pose: PoseDoc | null): void {
    const canvas = this.renderer.domElement;
    if (pose === null) {
      this.renderer.clear();
      return;
    }
    this.camera.position.set(pose.x, pose.y, pose.z);
    const cp = Math.cos(pose.pitch);
    this.camera.lookAt(
      pose.x + cp * Math.cos(pose.yaw),
      pose.y + cp * Math.sin(pose.yaw),
      pose.z + Math.sin(pose.pitch),
    );
    this.camera.aspect = canvas.clientWidth / Math.max(1, canvas.clientHeight);
    // vfov from the pose's hfov and the canvas aspect, in degrees for three.
    const vfov = 2 * Math.atan(Math.tan(pose.hfov / 2) / this.camera.aspect);
    this.camera.fov = (vfov * 180) / Math.PI;
    this.camera.updateProjectionMatrix();
    this.renderer.render(this.scene.scene, this.camera);
  }
}

/** Ray-cast a canvas click onto the terrain; returns world XY or null. */
export function pickTerrainXY(
  scene: TerrainScene,
  camera: THREE.Camera,
  canvas: HTMLCanvasElement,
  clientX: number,
  clientY: number,
): XY | null {
  const rect = canvas.getBoundingClientRect();
  const ndc = new THREE.Vector2(
    ((clientX - rect.left) / rect.width) * 2 - 1,
    -((clientY - rect.top) / rect.height) * 2 + 1,
  );
  const caster = new THREE.Raycaster();
  caster.setFromCamera(ndc, camera);
  const hits = caster.intersectObject(scene.terrainMesh, false);
  if (hits.length === 0) return null;
  return [hits[0].point.x, hits[0].point.y];
}
