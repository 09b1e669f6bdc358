export * from "./protocol.js";
export * from "./render.js";
export * from "./metrics.js";
export * from "./store.js";
export * from "./feed.js";
export * from "./tcp.js";
export * from "./console.js";
