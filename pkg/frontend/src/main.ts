import { ApiClient } from "./api.js";
import { ConsoleSession } from "./session.js";
import { renderApp } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const serviceUrl =
  params.get("service") ??
  localStorage.getItem("cnforge_service_url") ??
  "http://127.0.0.1:8008";
localStorage.setItem("cnforge_service_url", serviceUrl);

const session = new ConsoleSession(new ApiClient(serviceUrl));
const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
renderApp(session, root);

const banner = document.getElementById("service-url");
if (banner) banner.textContent = serviceUrl;
