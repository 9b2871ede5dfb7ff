import { ApiClient } from "./api.js";
import { SuggestApp } from "./app.js";

const params = new URLSearchParams(location.search);
const baseUrl = params.get("api") ?? "http://127.0.0.1:8765";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const app = new SuggestApp(root, new ApiClient(baseUrl));
void app.refreshEngines();
