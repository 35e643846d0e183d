import { AnnotateController, newSessionToken } from "./annotate.js";
import { ApiClient } from "./api.js";
import { PendingQueue } from "./queue.js";

const SESSION_KEY = "unaware.session";

function sessionToken(): string {
  const existing = window.localStorage.getItem(SESSION_KEY);
  if (existing) return existing;
  const token = newSessionToken();
  window.localStorage.setItem(SESSION_KEY, token);
  return token;
}

const app = document.getElementById("app");
if (app) {
  const controller = new AnnotateController(
    new ApiClient(""),
    new PendingQueue(window.localStorage),
    sessionToken(),
    (html) => {
      app.innerHTML = html;
    },
  );
  app.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest("[data-action]");
    if (!target) return;
    void controller.handle(
      target.getAttribute("data-action") ?? "",
      target.getAttribute("data-value") ?? "",
    );
  });
  void controller.start();
}
