import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ApiClient } from "../src/api.js";
import { SessionController } from "../src/store.js";
import { renderEdit } from "../src/views/edit.js";
import { renderLabel } from "../src/views/label.js";
import { startServer, waitFor, wire, type TestServer } from "./server.js";

const SCRIPT = [
  "Bob slid on ice and clipped a parked car.",
  wire([
    ["Alice", "Can you walk me through what happened?"],
    ["Bob", "I slid through the intersection at Pine Street."],
  ]),
  wire([
    ["Alice", "Were you alone in the vehicle?"],
    ["Bob", "There was one passenger in my car."],
  ]),
  wire([
    ["Alice", "Thanks, I have noted all of that."],
    ["Bob", "What happens next with my claim?"],
  ]),
];

const SCENARIO = {
  triplets: [
    { referent: "Caller", domain: "AccidentDetails", slot: "Location", value: "Pine Street" },
  ],
  agent_persona: "calm and methodical",
  caller_persona: "worried about the paperwork",
  role_map: { agent_name: "Alice", user_name: "Bob" },
};

let server: TestServer;
let api: ApiClient;
let ctl: SessionController;

beforeAll(async () => {
  server = await startServer(SCRIPT);
  api = new ApiClient(server.baseUrl);
  const created = await api.createSession({ session_id: "refresh-demo", scenario: SCENARIO });
  ctl = new SessionController(api, created.session_id);
  await ctl.load();
});

afterAll(async () => {
  await server.stop();
});

function renderBoth(controller: SessionController): { edit: string; label: string } {
  const editRoot = document.createElement("div");
  const labelRoot = document.createElement("div");
  const noop = () => undefined;
  renderEdit(editRoot, controller, noop);
  renderLabel(labelRoot, controller, noop);
  return { edit: editRoot.innerHTML, label: labelRoot.innerHTML };
}

/** A brand-new controller is the moral equivalent of hitting reload. */
async function expectReloadEquivalence(): Promise<void> {
  const fresh = new SessionController(api, ctl.sessionId);
  await fresh.load();
  expect(fresh.snapshot()).toEqual(ctl.snapshot());
  const before = renderBoth(ctl);
  const after = renderBoth(fresh);
  expect(after.edit).toBe(before.edit);
  expect(after.label).toBe(before.label);
}

describe("refresh equivalence across editing actions", () => {
  it("holds right after load", async () => {
    await expectReloadEquivalence();
  });

  it("holds after proposing a subdialogue", async () => {
    expect(await ctl.propose()).toBe(true);
    expect(ctl.view?.phase).toBe("reviewing");
    await expectReloadEquivalence();
  });

  it("holds after editing a turn", async () => {
    expect(await ctl.editTurn(3, "I skidded through the crossing at Pine Street.")).toBe(true);
    await expectReloadEquivalence();
  });

  it("holds after deleting a turn", async () => {
    expect(await ctl.deleteTurn(4)).toBe(true);
    expect(ctl.view?.turns).toHaveLength(3);
    await expectReloadEquivalence();
  });

  it("holds after regenerating the draft", async () => {
    expect(await ctl.regenerate("ask about passengers", { from: 3, to: 3 })).toBe(true);
    await expectReloadEquivalence();
  });

  it("holds after an accepted annotation", async () => {
    const outcome = await ctl.annotate({
      turn_index: 4,
      char_start: 10,
      char_end: 13,
      referent: "Caller",
      domain: "PassengerInfo",
      slot: "Number of Passengers",
      value: "one",
    });
    expect(outcome).toBe("accepted");
    await expectReloadEquivalence();
  });

  it("holds after committing", async () => {
    expect(await ctl.commit()).toBe(true);
    await expectReloadEquivalence();
  });

  it("holds after a second proposal", async () => {
    expect(await ctl.propose()).toBe(true);
    await expectReloadEquivalence();
  });
});

describe("stale-version handling", () => {
  it("flags 412, prompts for reload, and recovers", async () => {
    const other = new SessionController(api, ctl.sessionId);
    await other.load();

    // first writer wins and bumps the version
    expect(await ctl.editTurn(5, "Let me check the passenger details once more.")).toBe(true);

    expect(await other.editTurn(5, "this edit is doomed")).toBe(false);
    expect(other.stale).toBe(true);

    const root = document.createElement("div");
    const rerender = () => renderEdit(root, other, rerender);
    rerender();
    expect(root.querySelector("[data-reload-prompt]")).not.toBeNull();

    const reload = root.querySelector<HTMLElement>("[data-reload]");
    expect(reload).not.toBeNull();
    reload!.click();
    await waitFor(() => !other.stale);

    expect(other.snapshot()).toEqual(ctl.snapshot());
    expect(root.querySelector("[data-reload-prompt]")).toBeNull();
    expect(root.querySelector("[data-edit-text='5']")?.getAttribute("value")).toBe(
      "Let me check the passenger details once more.",
    );
  });
});
