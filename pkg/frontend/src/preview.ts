// First-person preview model: the guide sees exactly what the skier's HUD
// shows. Overlays come verbatim from the latest VIEW_STATE for the selected
// skier; the client never re-selects or re-projects.

import { ClientSession } from "./session.js";
import { OverlayDoc, PoseDoc, ViewStatePayload } from "./wire.js";

export interface PreviewFrame {
  skierId: string;
  pose: PoseDoc;
  overlays: OverlayDoc[];
}

export function previewFrame(
  session: ClientSession,
  skierId: string | null,
): PreviewFrame | null {
  if (skierId === null) return null;
  const state: ViewStatePayload | undefined = session.viewStates.get(skierId);
  if (state === undefined) return null;
  return {
    skierId,
    pose: state.pose,
    overlays: state.overlays.slice(),
  };
}

/** Screen-fraction (u, v) to pixel coordinates inside a viewport. */
export function overlayToPixels(
  overlay: OverlayDoc,
  width: number,
  height: number,
): { x: number; y: number } {
  return { x: overlay.u * width, y: overlay.v * height };
}
