/** Phone trackpad page: pointer events -> episodes -> gestures -> hub. */

import { GestureRecognizer, Sample, TouchEpisode, moveDelta, DEFAULT_CONFIG } from "./gestures.js";
import { PadClient, PadStatus, SocketLike } from "./padClient.js";

function browserSocket(url: string): SocketLike {
  const ws = new WebSocket(url);
  const wrapper: SocketLike = {
    send: (data) => ws.send(data),
    close: () => ws.close(),
    onmessage: null,
    onclose: null,
    onopen: null,
  };
  ws.onmessage = (e) => wrapper.onmessage?.(String(e.data));
  ws.onclose = () => wrapper.onclose?.();
  ws.onopen = () => wrapper.onopen?.();
  return wrapper;
}

function main(): void {
  const params = new URLSearchParams(location.search);
  const side = params.get("side");
  const statusEl = document.getElementById("status")!;
  const surface = document.getElementById("surface") as HTMLDivElement;
  const debugEl = document.getElementById("debug")!;

  if (!side) {
    statusEl.textContent = "Missing ?side=left|right — scan the QR code at the entrance.";
    statusEl.className = "error";
    return;
  }

  const proto = location.protocol === "https:" ? "wss" : "ws";
  const client = new PadClient(browserSocket, `${proto}://${location.host}`, side, {
    onStatus: (status: PadStatus) => {
      if (status.error) {
        statusEl.textContent = status.error;
        statusEl.className = "error";
        return;
      }
      const bits = [
        status.connected ? "connected" : "reconnecting…",
        status.bound ? "bound to your body" : "walk to your wall to bind",
        status.active ? "ACTIVE" : "inactive (step within 2 m)",
      ];
      statusEl.textContent = bits.join(" · ");
      statusEl.className = status.active ? "active" : "idle";
    },
  });
  client.connect();

  const recognizer = new GestureRecognizer();
  let samples: Sample[] = [];
  let pointerCount = 0;
  let maxPointers = 0;
  let lastMoveSample: Sample | null = null;
  let streamedMoves = 0;

  const rect = () => surface.getBoundingClientRect();

  surface.addEventListener("pointerdown", (e) => {
    surface.setPointerCapture(e.pointerId);
    pointerCount += 1;
    maxPointers = Math.max(maxPointers, pointerCount);
    const sample = { id: e.pointerId, x: e.clientX, y: e.clientY, t: performance.now() };
    samples.push(sample);
    lastMoveSample = sample;
  });

  surface.addEventListener("pointermove", (e) => {
    if (pointerCount === 0) return;
    const sample = { id: e.pointerId, x: e.clientX, y: e.clientY, t: performance.now() };
    samples.push(sample);
    // single-finger live cursor streaming once it stops looking like a tap
    if (maxPointers === 1 && lastMoveSample && samples.length > 3) {
      const { dx, dy } = moveDelta(lastMoveSample, sample, rect().width, rect().height);
      if (dx !== 0 || dy !== 0) {
        client.sendGesture({ gesture: "move", dx, dy });
        streamedMoves += 1;
      }
      lastMoveSample = sample;
    }
  });

  const finish = (e: PointerEvent) => {
    if (pointerCount === 0) return;
    pointerCount -= 1;
    samples.push({ id: e.pointerId, x: e.clientX, y: e.clientY, t: performance.now() });
    if (pointerCount > 0) return;
    const episode: TouchEpisode = {
      samples,
      pointerCount: maxPointers,
      padW: rect().width,
      padH: rect().height,
    };
    samples = [];
    maxPointers = 0;
    lastMoveSample = null;
    const gesture = recognizer.push(episode);
    // moves already streamed live; sending the aggregate again would double it
    if (gesture && !(gesture.gesture === "move" && streamedMoves > 0)) {
      client.sendGesture(gesture);
    }
    streamedMoves = 0;
    debugEl.textContent =
      `${gesture ? gesture.gesture : "(ambiguous)"} · dropped ${recognizer.dropped}`;
  };
  surface.addEventListener("pointerup", finish);
  surface.addEventListener("pointercancel", finish);

  const voiceForm = document.getElementById("voice-form") as HTMLFormElement;
  const voiceInput = document.getElementById("voice-input") as HTMLInputElement;
  voiceForm.addEventListener("submit", (e) => {
    e.preventDefault();
    if (client.sendTranscript(voiceInput.value)) {
      voiceInput.value = "";
    }
  });
}

main();
