/**
 * Node TCP transport speaking newline-delimited JSON with the gateway.
 * Browsers would swap in a WebSocket transport behind the same interface;
 * nothing above this module knows which is in use.
 */

import * as net from "node:net";

import type { Connection, Transport } from "./feed.js";
import type { WireMessage } from "./protocol.js";

export class TcpTransport implements Transport {
  constructor(
    private readonly host: string,
    private readonly port: number,
  ) {}

  connect(): Promise<Connection> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host: this.host, port: this.port });
      socket.once("error", reject);
      socket.once("connect", () => {
        socket.removeListener("error", reject);
        resolve(new TcpConnection(socket));
      });
    });
  }
}

class TcpConnection implements Connection {
  private buffer = "";
  private messageCb: ((msg: WireMessage) => void) | null = null;
  private closeCb: (() => void) | null = null;

  constructor(private readonly socket: net.Socket) {
    socket.setEncoding("utf-8");
    socket.on("data", (chunk: string) => {
      this.buffer += chunk;
      let idx = this.buffer.indexOf("\n");
      while (idx >= 0) {
        const line = this.buffer.slice(0, idx).trim();
        this.buffer = this.buffer.slice(idx + 1);
        if (line.length > 0 && this.messageCb !== null) {
          this.messageCb(JSON.parse(line) as WireMessage);
        }
        idx = this.buffer.indexOf("\n");
      }
    });
    socket.on("close", () => this.closeCb?.());
    socket.on("error", () => socket.destroy());
  }

  send(msg: WireMessage): void {
    this.socket.write(JSON.stringify(msg) + "\n");
  }

  onMessage(cb: (msg: WireMessage) => void): void {
    this.messageCb = cb;
  }

  onClose(cb: () => void): void {
    this.closeCb = cb;
  }

  close(): void {
    this.socket.end();
  }
}
