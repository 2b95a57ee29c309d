/** DOM rendering. All decisions live in the logic modules; this file only
 * draws state and forwards user input. */

import { AlertFeed } from "./alerts.js";
import { ApiError, BrokerClient } from "./api.js";
import {
  EnrollmentResult,
  IntrusionRecord,
  MergeConfirmationRequired,
  markKnown,
  retryFailedUploads,
  submitEnrollment,
} from "./enroll.js";
import { fetchHistory, formatHistoryLines } from "./history.js";
import { SessionState, UploadDraft, resolveRoute } from "./state.js";

export interface App {
  session: SessionState;
  client: BrokerClient;
  draft: UploadDraft;
  feed: AlertFeed | null;
  route: string;
  lastEnrollment: EnrollmentResult | null;
  selectedAlert: IntrusionRecord | null;
  render: () => void;
}

function el(tag: string, attrs: Record<string, string> = {}, text = ""): HTMLElement {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

function errorBox(message: string): HTMLElement {
  return el("p", { class: "error" }, message);
}

export function renderApp(app: App, root: HTMLElement): void {
  root.replaceChildren();
  const route = resolveRoute(app.session, app.route);
  const nav = el("nav");
  if (app.session.token) {
    for (const target of ["home", "enroll", "alerts", "history"]) {
      const link = el("a", { href: "#" }, target);
      link.addEventListener("click", (e) => {
        e.preventDefault();
        app.route = target;
        app.render();
      });
      nav.append(link, document.createTextNode(" "));
    }
  }
  root.append(nav);

  switch (route) {
    case "login":
    case "register":
      return renderAuth(app, root, route);
    case "home":
      return renderHome(app, root);
    case "enroll":
      return renderEnroll(app, root);
    case "alerts":
      return renderAlerts(app, root);
    case "history":
      return renderHistory(app, root);
    case "detail":
      return renderDetail(app, root);
    default:
      root.append(errorBox(`unknown view ${route}`));
  }
}

function renderAuth(app: App, root: HTMLElement, mode: string): void {
  const form = el("form");
  const email = el("input", { type: "email", placeholder: "email" }) as HTMLInputElement;
  const password = el("input", { type: "password", placeholder: "password" }) as HTMLInputElement;
  const name = el("input", { type: "text", placeholder: "name" }) as HTMLInputElement;
  const submit = el("button", { type: "submit" }, mode === "login" ? "Log in" : "Register");
  const toggle = el("a", { href: "#" }, mode === "login" ? "Need an account?" : "Have an account?");
  const status = el("p");

  toggle.addEventListener("click", (e) => {
    e.preventDefault();
    app.route = mode === "login" ? "register" : "login";
    app.render();
  });

  form.addEventListener("submit", (e) => {
    e.preventDefault();
    void (async () => {
      try {
        if (mode === "register") {
          await app.client.register(email.value, password.value, name.value);
        }
        await app.client.login(email.value, password.value);
        app.session.token = app.client.token;
        app.session.email = email.value;
        app.route = "home";
      } catch (err) {
        // deliberately does not say which field was wrong
        status.textContent = err instanceof ApiError ? "sign-in failed" : String(err);
      }
      app.render();
    })();
  });

  form.append(email, password);
  if (mode === "register") form.append(name);
  form.append(submit, toggle, status);
  root.append(el("h1", {}, "pibase console"), form);
}

function renderHome(app: App, root: HTMLElement): void {
  root.append(
    el("h1", {}, "Home"),
    el("p", {}, "Upload images of people to allow, or review past intrusions."),
  );
}

function renderEnroll(app: App, root: HTMLElement): void {
  root.append(el("h1", {}, "Enroll a person"));
  const name = el("input", { type: "text", placeholder: "person name" }) as HTMLInputElement;
  name.value = app.draft.name;
  name.addEventListener("input", () => {
    app.draft.name = name.value;
    submit.toggleAttribute("disabled", !app.draft.canSubmit());
  });

  const chooser = el("input", { type: "file", accept: ".pgm", multiple: "multiple" }) as HTMLInputElement;
  chooser.addEventListener("change", () => {
    void (async () => {
      for (const file of Array.from(chooser.files ?? [])) {
        app.draft.addImage({ name: file.name, data: new Uint8Array(await file.arrayBuffer()) });
      }
      app.render();
    })();
  });

  const preview = el("p", {}, app.draft.current()?.name ?? "(no image chosen)");
  const prev = el("button", { type: "button" }, "Previous Image");
  const next = el("button", { type: "button" }, "Next Image");
  prev.toggleAttribute("disabled", !app.draft.hasPrevious());
  next.toggleAttribute("disabled", !app.draft.hasNext());
  prev.addEventListener("click", () => {
    app.draft.previous();
    app.render();
  });
  next.addEventListener("click", () => {
    app.draft.next();
    app.render();
  });

  const submit = el("button", { type: "button" }, "Upload");
  submit.toggleAttribute("disabled", !app.draft.canSubmit());
  const status = el("p");
  submit.addEventListener("click", () => {
    void (async () => {
      app.lastEnrollment = await submitEnrollment(app.client, app.draft);
      status.textContent =
        app.lastEnrollment.failed === 0
          ? `uploaded ${app.lastEnrollment.outcomes.length} images`
          : `${app.lastEnrollment.failed} uploads failed`;
      app.render();
    })();
  });

  root.append(name, chooser, preview, prev, next, submit, status);

  if (app.lastEnrollment && app.lastEnrollment.failed > 0) {
    const retry = el("button", { type: "button" }, "Retry failed uploads");
    retry.addEventListener("click", () => {
      void (async () => {
        app.lastEnrollment = await retryFailedUploads(app.client, app.draft, app.lastEnrollment!);
        app.render();
      })();
    });
    root.append(retry);
  }
}

function renderAlerts(app: App, root: HTMLElement): void {
  root.append(el("h1", {}, "Live alerts"));
  if (!app.feed) {
    app.feed = new AlertFeed(app.client, "rpi_security", () => app.render());
    app.feed.start();
    app.session.subscribed = true;
  }
  root.append(el("p", { class: "status" }, `stream: ${app.feed.status}`));
  const list = el("ul");
  for (const alert of [...app.feed.alerts].reverse()) {
    const item = el("li");
    const link = el("a", { href: "#" }, `${alert.title} - ${alert.body}`);
    link.addEventListener("click", (e) => {
      e.preventDefault();
      app.selectedAlert = alert.imageUrl
        ? { push_id: "live", imageUrl: alert.imageUrl, timestamp: alert.receivedAt.toISOString() }
        : null;
      app.route = "detail";
      app.render();
    });
    item.append(link);
    list.append(item);
  }
  root.append(list);
}

function renderHistory(app: App, root: HTMLElement): void {
  root.append(el("h1", {}, "Past intrusions"));
  const from = el("input", { type: "text", placeholder: "from (ISO)" }) as HTMLInputElement;
  const to = el("input", { type: "text", placeholder: "to (ISO)" }) as HTMLInputElement;
  const go = el("button", { type: "button" }, "Search");
  const list = el("ul");
  go.addEventListener("click", () => {
    void (async () => {
      list.replaceChildren();
      const rows = await fetchHistory(app.client, from.value, to.value);
      for (const [i, line] of formatHistoryLines(rows).entries()) {
        const item = el("li");
        const link = el("a", { href: "#" }, line);
        link.addEventListener("click", (e) => {
          e.preventDefault();
          const row = rows[i]!;
          app.selectedAlert = {
            push_id: row.key,
            imageUrl: String(row.value["imageUrl"]),
            timestamp: String(row.value["timestamp"]),
          };
          app.route = "detail";
          app.render();
        });
        item.append(link);
        list.append(item);
      }
    })();
  });
  root.append(from, to, go, list);
}

function renderDetail(app: App, root: HTMLElement): void {
  root.append(el("h1", {}, "Intrusion detail"));
  const record = app.selectedAlert;
  if (!record) {
    root.append(errorBox("nothing selected"));
    return;
  }
  root.append(el("p", {}, `at ${record.timestamp}`));
  const img = el("img", { alt: "intrusion picture" }) as HTMLImageElement;
  const name = el("input", { type: "text", placeholder: "person name" }) as HTMLInputElement;
  const action = el("button", { type: "button" }, "Mark as known");
  action.toggleAttribute("disabled", true);
  const status = el("p");

  void (async () => {
    try {
      const bytes = await app.client.storageGetUrl(record.imageUrl);
      img.src = URL.createObjectURL(new Blob([bytes as BlobPart]));
      action.toggleAttribute("disabled", false);
    } catch {
      status.textContent = "image unavailable; action disabled";
    }
  })();

  action.addEventListener("click", () => {
    void (async () => {
      try {
        await markKnown(app.client, record, name.value);
        status.textContent = `enrolled as ${name.value}; next sync stops these alerts`;
      } catch (err) {
        if (err instanceof MergeConfirmationRequired) {
          if (window.confirm(`${name.value} already exists. Merge into their folder?`)) {
            await markKnown(app.client, record, name.value, { confirmMerge: true });
            status.textContent = `merged into ${name.value}`;
          } else {
            status.textContent = "cancelled; nothing written";
          }
        } else {
          status.textContent = String(err);
        }
      }
    })();
  });

  root.append(img, name, action, status);
}
