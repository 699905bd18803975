import { ServiceClient } from "./api.js";
import { createApp } from "./app.js";

// Same-origin by default: the built bundle is meant to be served next to
// the service (or behind a proxy that forwards /v1/*).
const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");
createApp(root, new ServiceClient(""));
