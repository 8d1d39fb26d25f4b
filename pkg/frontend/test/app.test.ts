// @vitest-environment jsdom
import { beforeEach, describe, expect, it } from "vitest";

import { createChatApp } from "../src/app.js";
import { ApiError, ChatClient } from "../src/client.js";
import { FakeServer, failingFetch } from "./fake_server.js";

function mount(fetchFn: typeof fetch) {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const client = new ChatClient("http://fake", fetchFn);
  return { app: createChatApp(root, client), client, root };
}

async function type(app: ReturnType<typeof createChatApp>, text: string) {
  app.elements.input.value = text;
  app.elements.input.dispatchEvent(new Event("input"));
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("input validation", () => {
  it("disables submit while the input is empty", async () => {
    const { app } = mount(new FakeServer().fetch);
    expect(app.elements.send.disabled).toBe(true);
    await type(app, "Baby vomited last night");
    expect(app.elements.send.disabled).toBe(false);
    await type(app, "   ");
    expect(app.elements.send.disabled).toBe(true);
  });

  it("submit with blank input is a no-op", async () => {
    const { app } = mount(new FakeServer().fetch);
    await app.submit();
    expect(app.session.id).toBeNull();
    expect(app.elements.messages.childElementCount).toBe(0);
  });
});

describe("session start", () => {
  it("renders the agent's first question after the self-report", async () => {
    const { app } = mount(new FakeServer().fetch);
    await type(app, "Baby vomited last night. What is wrong?");
    await app.submit();
    expect(app.session.id).not.toBeNull();
    const texts = [...app.elements.messages.children].map((el) => el.textContent);
    expect(texts).toEqual([
      "Baby vomited last night. What is wrong?",
      "Do you have fever?",
    ]);
    expect(app.elements.quickBar.hidden).toBe(false);
  });

  it("shows an inline error and appends nothing when the server is down", async () => {
    const { app } = mount(failingFetch as typeof fetch);
    await type(app, "hello there");
    await app.submit();
    expect(app.elements.error.hidden).toBe(false);
    expect(app.elements.messages.childElementCount).toBe(0);
    expect(app.session.id).toBeNull();
    // input preserved for retry
    expect(app.elements.input.value).toBe("hello there");
  });

  it("recovers after a failed start when the server comes back", async () => {
    const server = new FakeServer();
    let down = true;
    const flaky: typeof fetch = (input, init) =>
      down ? failingFetch() : server.fetch(input, init);
    const { app } = mount(flaky);
    await type(app, "I feel bad");
    await app.submit();
    expect(app.elements.error.hidden).toBe(false);
    down = false;
    await app.submit();
    expect(app.elements.error.hidden).toBe(true);
    expect(app.session.id).not.toBeNull();
  });
});

describe("conversation flow", () => {
  it("reaches the diagnosis banner after scripted quick replies", async () => {
    const server = new FakeServer();
    const { app } = mount(server.fetch);
    await type(app, "My belly hurts. What is wrong?");
    await app.submit();
    await app.quickReply("Not sure.");
    await app.quickReply("No.");
    await app.quickReply("Yes.");
    expect(app.session.status).toBe("success");
    expect(app.session.diagnosis).toBe("dyspepsia");
    expect(app.elements.banner.hidden).toBe(false);
    expect(app.elements.banner.textContent).toContain("dyspepsia");
    expect(app.elements.input.disabled).toBe(true);
  });

  it("mirrors the server transcript exactly", async () => {
    const server = new FakeServer();
    const { app, client } = mount(server.fetch);
    await type(app, "My belly hurts. What is wrong?");
    await app.submit();
    await app.quickReply("Not sure.");
    await app.quickReply("Yes.");
    const record = await client.getSession(app.session.id!);
    expect(app.session.messages.map((m) => [m.speaker, m.text])).toEqual(
      record.transcript.map((t) => [t.speaker, t.utterance]),
    );
  });

  it("keeps the DOM transcript append-only", async () => {
    const server = new FakeServer();
    const { app } = mount(server.fetch);
    await type(app, "Something is off. What is wrong?");
    let last = 0;
    await app.submit();
    for (const reply of ["Not sure.", "No.", "Yes."]) {
      expect(app.elements.messages.childElementCount).toBeGreaterThanOrEqual(last);
      last = app.elements.messages.childElementCount;
      await app.quickReply(reply);
    }
    expect(app.elements.messages.childElementCount).toBeGreaterThanOrEqual(last);
  });

  it("agent utterances come verbatim from the service", async () => {
    const server = new FakeServer([
      { utterance: "VERBATIM QUESTION 1?" },
      { utterance: "VERBATIM END.", status: "failed" },
    ]);
    const { app } = mount(server.fetch);
    await type(app, "hi. what is wrong?");
    await app.submit();
    await app.quickReply("Yes.");
    const agentTexts = app.session.messages.filter((m) => m.speaker === "agent").map((m) => m.text);
    expect(agentTexts).toEqual(["VERBATIM QUESTION 1?", "VERBATIM END."]);
  });
});

describe("closed sessions", () => {
  it("renders the closed state on a 409 without crashing", async () => {
    const server = new FakeServer();
    const { app } = mount(server.fetch);
    await type(app, "My belly hurts. What is wrong?");
    await app.submit();
    server.closeSession(app.session.id!, "failed");
    await app.quickReply("Yes.");
    expect(app.session.status).toBe("failed");
    expect(app.elements.banner.hidden).toBe(false);
    expect(app.elements.input.disabled).toBe(true);
  });

  it("quick replies are no-ops once the session is closed locally", async () => {
    const server = new FakeServer([
      { utterance: "Done.", status: "failed" },
    ]);
    const { app } = mount(server.fetch);
    await type(app, "hello. what is wrong?");
    await app.submit();
    const count = app.elements.messages.childElementCount;
    await app.quickReply("Yes.");
    expect(app.elements.messages.childElementCount).toBe(count);
  });
});

describe("resume from the server record", () => {
  it("re-render after refresh reproduces server state", async () => {
    const server = new FakeServer();
    const first = mount(server.fetch);
    await type(first.app, "My belly hurts. What is wrong?");
    await first.app.submit();
    await first.app.quickReply("Not sure.");

    const second = mount(server.fetch);
    await second.app.loadSession(first.app.session.id!);
    expect(second.app.session.messages).toEqual(first.app.session.messages);
    expect(second.app.session.status).toBe("open");
    expect(second.app.elements.quickBar.hidden).toBe(false);
  });

  it("resuming a finished session shows the banner", async () => {
    const server = new FakeServer();
    const first = mount(server.fetch);
    await type(first.app, "My belly hurts. What is wrong?");
    await first.app.submit();
    for (const r of ["a.", "b.", "c."]) await first.app.quickReply(r);
    expect(first.app.session.status).toBe("success");

    const second = mount(server.fetch);
    await second.app.loadSession(first.app.session.id!);
    expect(second.app.session.status).toBe("success");
    expect(second.app.elements.banner.textContent).toContain("dyspepsia");
  });
});

describe("client error mapping", () => {
  it("maps HTTP failures to ApiError with the server detail", async () => {
    const server = new FakeServer();
    const client = new ChatClient("http://fake", server.fetch);
    await expect(client.getSession("nope")).rejects.toThrowError(ApiError);
    await expect(client.startSession("  ")).rejects.toMatchObject({ status: 400 });
  });
});
