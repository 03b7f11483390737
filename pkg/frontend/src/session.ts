// Client session: outbound envelope factory (strictly increasing seq) plus
// inbound dispatch into the annotation mirror, per-skier view states, and the
// alert feed. Transport is injected so tests can run without a socket.

import { AnnotationMirror, Annotation } from "./store.js";
import {
  AlertPayload,
  Envelope,
  MSG,
  PROTOCOL_VERSION,
  PoseDoc,
  Role,
  ViewStatePayload,
  parseEnvelope,
} from "./wire.js";

export interface Transport {
  send(text: string): void;
}

export type SessionEventKind =
  | "welcome"
  | "mirror"
  | "view_state"
  | "alert"
  | "error"
  | "pong";

export type SessionListener = (kind: SessionEventKind, env: Envelope) => void;

export class ClientSession {
  readonly mirror = new AnnotationMirror();
  readonly viewStates = new Map<string, ViewStatePayload>();
  readonly alerts: AlertPayload[] = [];
  sessionId = "";
  lastMessageAt: number | null = null;
  lastError: string | null = null;

  private seq = 0;
  private listeners: SessionListener[] = [];

  constructor(
    readonly senderId: string,
    readonly role: Role,
    private readonly transport: Transport,
    private readonly now: () => number = () => Date.now(),
  ) {}

  on(listener: SessionListener): void {
    this.listeners.push(listener);
  }

  private emit(kind: SessionEventKind, env: Envelope): void {
    for (const listener of this.listeners) listener(kind, env);
  }

  private sendEnvelope(type: string, payload: Record<string, unknown>): Envelope {
    this.seq += 1;
    const env: Envelope = {
      v: PROTOCOL_VERSION,
      type,
      seq: this.seq,
      session_id: this.sessionId,
      sender_id: this.senderId,
      t_ms: Math.round(this.now()),
      payload,
    };
    this.transport.send(JSON.stringify(env));
    return env;
  }

  hello(terrainHash: string): Envelope {
    return this.sendEnvelope(MSG.HELLO, { role: this.role, terrain_hash: terrainHash });
  }

  sendUpsert(annotation: Annotation): Envelope {
    return this.sendEnvelope(MSG.ANNOTATION_UPSERT, { annotation });
  }

  sendDelete(tombstone: Annotation): Envelope {
    return this.sendEnvelope(MSG.ANNOTATION_DELETE, { annotation: tombstone });
  }

  sendPose(pose: PoseDoc, speed: number): Envelope {
    return this.sendEnvelope(MSG.POSE, { pose, speed });
  }

  ping(): Envelope {
    return this.sendEnvelope(MSG.PING, {});
  }

  /** Feed one raw frame from the socket. */
  handleFrame(text: string): void {
    const env = parseEnvelope(text);
    if (env === null) return;
    this.lastMessageAt = this.now();
    switch (env.type) {
      case MSG.WELCOME:
        if (typeof env.payload.session_id === "string") {
          this.sessionId = env.payload.session_id;
        }
        this.emit("welcome", env);
        break;
      case MSG.SNAPSHOT:
      case MSG.ANNOTATION_UPSERT:
      case MSG.ANNOTATION_DELETE:
        if (this.mirror.applyEnvelope(env)) this.emit("mirror", env);
        break;
      case MSG.VIEW_STATE: {
        const payload = env.payload as unknown as ViewStatePayload;
        if (typeof payload.skier_id === "string") {
          this.viewStates.set(payload.skier_id, payload);
          this.emit("view_state", env);
        }
        break;
      }
      case MSG.ALERT:
        this.alerts.push(env.payload as unknown as AlertPayload);
        this.emit("alert", env);
        break;
      case MSG.ERROR:
        this.lastError = String(env.payload.detail ?? env.payload.code ?? "error");
        this.emit("error", env);
        break;
      case MSG.PONG:
        this.emit("pong", env);
        break;
      default:
        break; // forward compatibility: ignore unknown types
    }
  }

  skierIds(): string[] {
    return [...this.viewStates.keys()].sort();
  }
}
