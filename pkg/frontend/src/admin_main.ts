import { AdminController } from "./admin.js";
import { ApiClient } from "./api.js";

const app = document.getElementById("app");
if (app) {
  const controller = new AdminController(new ApiClient(""), (html) => {
    app.innerHTML = html;
  });
  controller.start();
}
