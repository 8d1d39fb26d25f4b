// Browser bootstrap: ?api=<base-url> overrides the default same-origin server;
// ?session=<id> resumes an existing session from the server record.

import { createChatApp } from "./app.js";
import { ChatClient } from "./client.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? window.location.origin;
const app = createChatApp(document.getElementById("app")!, new ChatClient(base));

const resume = params.get("session");
if (resume) {
  void app.loadSession(resume);
}
