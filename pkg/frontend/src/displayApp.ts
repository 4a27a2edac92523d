/** Wall display page: snapshot+diff feed rendered to a full-window canvas. */

import { DisplayClient } from "./displayClient.js";
import { WallRenderer, DEFAULT_VIEWPORT } from "./render.js";
import type { SocketLike } from "./padClient.js";

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
  const canvas = document.getElementById("wall") as HTMLCanvasElement;
  const banner = document.getElementById("banner")!;
  const ctx = canvas.getContext("2d")!;
  const renderer = new WallRenderer(ctx, DEFAULT_VIEWPORT);

  const fit = () => {
    canvas.width = window.innerWidth;
    canvas.height = Math.floor((window.innerWidth / 14500) * 1200 * 4);
    if (canvas.height > window.innerHeight) {
      canvas.height = window.innerHeight;
    }
  };
  fit();
  window.addEventListener("resize", fit);

  const proto = location.protocol === "https:" ? "wss" : "ws";
  const client = new DisplayClient(browserSocket, `${proto}://${location.host}`, {
    onConnection: (connected) => {
      banner.style.display = connected ? "none" : "block";
    },
  });
  client.connect();

  const frame = () => {
    if (client.model) {
      renderer.render(client.model);
    }
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

main();
