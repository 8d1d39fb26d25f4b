// DOM chat app. All dialogue content comes verbatim from the service; this
// layer only renders it, collects input, and mirrors session state.

import { ApiError, ChatClient, SessionStatus } from "./client.js";

export interface UiMessage {
  speaker: "user" | "agent";
  text: string;
}

export interface UiSession {
  id: string | null;
  messages: UiMessage[];
  status: SessionStatus | "new";
  diagnosis: string | null;
}

const QUICK_REPLIES = ["Yes.", "No.", "Not sure."];

export interface ChatApp {
  session: UiSession;
  submit(): Promise<void>;
  quickReply(text: string): Promise<void>;
  loadSession(id: string): Promise<void>;
  elements: {
    input: HTMLInputElement;
    send: HTMLButtonElement;
    messages: HTMLElement;
    banner: HTMLElement;
    error: HTMLElement;
    quickBar: HTMLElement;
  };
}

export function createChatApp(root: HTMLElement, client: ChatClient): ChatApp {
  root.innerHTML = `
    <div class="chat">
      <div class="messages" data-role="messages"></div>
      <div class="banner" data-role="banner" hidden></div>
      <div class="error" data-role="error" hidden></div>
      <div class="quick" data-role="quick" hidden></div>
      <form data-role="form">
        <input data-role="input" type="text" autocomplete="off"
               placeholder="Describe your complaint" />
        <button data-role="send" type="submit" disabled>Send</button>
      </form>
    </div>`;

  const messagesEl = root.querySelector<HTMLElement>('[data-role="messages"]')!;
  const bannerEl = root.querySelector<HTMLElement>('[data-role="banner"]')!;
  const errorEl = root.querySelector<HTMLElement>('[data-role="error"]')!;
  const quickEl = root.querySelector<HTMLElement>('[data-role="quick"]')!;
  const formEl = root.querySelector<HTMLFormElement>('[data-role="form"]')!;
  const inputEl = root.querySelector<HTMLInputElement>('[data-role="input"]')!;
  const sendEl = root.querySelector<HTMLButtonElement>('[data-role="send"]')!;

  const session: UiSession = { id: null, messages: [], status: "new", diagnosis: null };

  function appendMessage(speaker: "user" | "agent", text: string) {
    session.messages.push({ speaker, text });
    const el = document.createElement("div");
    el.className = `msg ${speaker}`;
    el.textContent = text;
    messagesEl.appendChild(el);
  }

  function showError(text: string) {
    errorEl.textContent = `${text} — try again.`;
    errorEl.hidden = false;
  }

  function clearError() {
    errorEl.hidden = true;
    errorEl.textContent = "";
  }

  function setClosed(status: SessionStatus, diagnosis: string | null) {
    session.status = status;
    session.diagnosis = diagnosis;
    if (status === "success" && diagnosis) {
      bannerEl.textContent = `Diagnosis: ${diagnosis}`;
      bannerEl.className = "banner success";
    } else {
      bannerEl.textContent = "The session ended without a diagnosis.";
      bannerEl.className = "banner failed";
    }
    bannerEl.hidden = false;
    quickEl.hidden = true;
    inputEl.disabled = true;
    sendEl.disabled = true;
  }

  function applyReply(payload: { agent_utterance: string; status: SessionStatus; diagnosis?: string }) {
    appendMessage("agent", payload.agent_utterance);
    if (payload.status !== "open") {
      setClosed(payload.status, payload.diagnosis ?? null);
    } else {
      quickEl.hidden = false;
      inputEl.focus();
    }
  }

  async function send(text: string): Promise<void> {
    clearError();
    try {
      if (session.id === null) {
        const payload = await client.startSession(text);
        session.id = payload.id;
        session.status = payload.status;
        appendMessage("user", text);
        applyReply(payload);
      } else {
        const payload = await client.sendMessage(session.id, text);
        appendMessage("user", text);
        applyReply(payload);
      }
      inputEl.value = "";
      sendEl.disabled = true;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // closed on the server (another tab, or the final turn raced us):
        // reflect the terminal state instead of crashing.
        const record = await client.getSession(session.id!).catch(() => null);
        setClosed(record?.status === "success" ? "success" : "failed",
                  record?.diagnosis ?? null);
        return;
      }
      showError(err instanceof Error ? err.message : "request failed");
    }
  }

  async function submit(): Promise<void> {
    const text = inputEl.value.trim();
    if (!text) return;
    await send(text);
  }

  async function quickReply(text: string): Promise<void> {
    if (session.id === null || session.status !== "open") return;
    await send(text);
  }

  async function loadSession(id: string): Promise<void> {
    const record = await client.getSession(id);
    session.id = record.session_id;
    session.messages = [];
    messagesEl.textContent = "";
    for (const turn of record.transcript) {
      appendMessage(turn.speaker, turn.utterance);
    }
    if (record.status === "open") {
      session.status = "open";
      quickEl.hidden = false;
    } else {
      setClosed(record.status, record.diagnosis);
    }
  }

  inputEl.addEventListener("input", () => {
    sendEl.disabled = inputEl.value.trim() === "";
  });
  formEl.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void submit();
  });
  for (const label of QUICK_REPLIES) {
    const btn = document.createElement("button");
    btn.type = "button";
    btn.textContent = label;
    btn.addEventListener("click", () => void quickReply(label));
    quickEl.appendChild(btn);
  }
  inputEl.focus();

  return {
    session,
    submit,
    quickReply,
    loadSession,
    elements: {
      input: inputEl,
      send: sendEl,
      messages: messagesEl,
      banner: bannerEl,
      error: errorEl,
      quickBar: quickEl,
    },
  };
}
