export * from "./types.js";
export * from "./stroke.js";
export * from "./editor.js";
export * from "./sse.js";
export * from "./api.js";
export * from "./compare.js";
