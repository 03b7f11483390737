// Wire protocol types shared with the session server. One JSON envelope per
// WebSocket frame; unknown payload fields are ignored for forward compat.

export const PROTOCOL_VERSION = 1;

export type Role = "guide" | "skier";

export interface Envelope {
  v: number;
  type: string;
  seq: number;
  session_id: string;
  sender_id: string;
  t_ms: number;
  payload: Record<string, unknown>;
}

export const MSG = {
  HELLO: "HELLO",
  WELCOME: "WELCOME",
  SNAPSHOT: "SNAPSHOT",
  ANNOTATION_UPSERT: "ANNOTATION_UPSERT",
  ANNOTATION_DELETE: "ANNOTATION_DELETE",
  POSE: "POSE",
  VIEW_STATE: "VIEW_STATE",
  ALERT: "ALERT",
  ERROR: "ERROR",
  PING: "PING",
  PONG: "PONG",
} as const;

export interface PoseDoc {
  x: number;
  y: number;
  z: number;
  yaw: number;
  pitch: number;
  hfov: number;
  aspect: number;
}

export interface OverlayDoc {
  annotation_id: string;
  kind: string;
  anchor: { x: number; y: number; z: number };
  u: number;
  v: number;
  distance: number;
  priority: number;
}

export interface ViewStatePayload {
  skier_id: string;
  pose: PoseDoc;
  budget: number;
  overlays: OverlayDoc[];
}

export interface AlertPayload {
  kind: string;
  annotation_id: string;
  skier_id: string;
  t_ms: number;
  detail: string;
}

export function parseEnvelope(text: string): Envelope | null {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const d = doc as Record<string, unknown>;
  if (
    typeof d.v !== "number" ||
    typeof d.type !== "string" ||
    typeof d.seq !== "number" ||
    typeof d.sender_id !== "string" ||
    typeof d.t_ms !== "number"
  ) {
    return null;
  }
  return {
    v: d.v,
    type: d.type,
    seq: d.seq,
    session_id: typeof d.session_id === "string" ? d.session_id : "",
    sender_id: d.sender_id,
    t_ms: d.t_ms,
    payload: (typeof d.payload === "object" && d.payload !== null
      ? d.payload
      : {}) as Record<string, unknown>,
  };
}

export async function sha256Hex(text: string): Promise<string> {
  const data = new TextEncoder().encode(text);
  const digest = await crypto.subtle.digest("SHA-256", data);
  return Array.from(new Uint8Array(digest))
    .map((b) => b.toString(16).padStart(2, "0"))
    .join("");
}
