import { ApiClient } from "./api.js";
import { App } from "./app.js";

const params = new URLSearchParams(window.location.search);
const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const app = new App(root, new ApiClient(""), (sessionId) => {
  // keep the session id in the URL and nowhere else; the journal is
  // server-side truth and a reload re-derives everything from it
  window.history.replaceState(null, "", `?session=${sessionId}`);
});
void app.boot(params.get("session"));
