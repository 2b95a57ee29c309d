import { BrokerClient } from "./api.js";
import { UploadDraft, emptySession } from "./state.js";
import { App, renderApp } from "./views.js";

const brokerUrl =
  new URLSearchParams(window.location.search).get("broker") ?? "http://127.0.0.1:8080";

const app: App = {
  session: emptySession(),
  client: new BrokerClient(brokerUrl),
  draft: new UploadDraft(),
  feed: null,
  route: "login",
  lastEnrollment: null,
  selectedAlert: null,
  render: () => {},
};

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");
app.render = () => renderApp(app, root);
app.render();
