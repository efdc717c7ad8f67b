import { ApiClient } from "./api.js";
import { Console } from "./console.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "http://127.0.0.1:8080";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

const consoleApp = new Console(new ApiClient(baseUrl), root);
void consoleApp.start().catch((err) => {
  root.textContent = `Failed to reach the API at ${baseUrl}: ${err}`;
});
