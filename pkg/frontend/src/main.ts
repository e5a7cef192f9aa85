// DOM wiring for the single-page app: input form with healthy-range hints,
// the clinician-first submission flow, output panes, record list with
// outcome entry, stats drawer, and the drift summary.

import {
  ApiError,
  getDrift,
  getRanges,
  getRecords,
  getStats,
  patchOutcome,
  postRecord,
} from "./api.js";
import {
  renderModelPane,
  renderRangesDropdown,
  renderRecordList,
  renderStatsDrawer,
} from "./panes.js";
import { SubmissionFlow } from "./state.js";
import type { RangesPayload } from "./types.js";
import { checkForm } from "./validate.js";

const $ = (id: string): HTMLElement => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
};

let ranges: RangesPayload;
const flow = new SubmissionFlow();
let statsLoaded = false;

function banner(message: string, retry?: () => void): void {
  const el = $("banner");
  el.innerHTML = "";
  el.textContent = message;
  if (retry) {
    const btn = document.createElement("button");
    btn.textContent = "Retry";
    btn.onclick = () => {
      el.hidden = true;
      retry();
    };
    el.appendChild(btn);
  }
  el.hidden = false;
}

function formValues(): Record<string, string> {
  const out: Record<string, string> = {};
  for (const name of Object.keys(ranges.ranges)) {
    out[name] = (document.getElementById(`f-${name}`) as HTMLInputElement).value;
  }
  return out;
}

function clinicianChoice(): string | null {
  const el = document.querySelector<HTMLInputElement>(
    "input[name=clinician_prediction]:checked",
  );
  return el ? el.value : null;
}

function refreshValidation(): void {
  const check = checkForm(formValues(), clinicianChoice(), ranges);
  for (const name of Object.keys(ranges.ranges)) {
    const hint = $(`hint-${name}`);
    hint.textContent = check.errors[name] ?? "";
  }
  const submit = $("submit") as HTMLButtonElement;
  submit.disabled = !check.ready || flow.phase !== "editing";
}

function buildForm(): void {
  const host = $("form-fields");
  host.innerHTML = "";
  for (const [name, range] of Object.entries(ranges.ranges)) {
    const row = document.createElement("div");
    row.className = "field-row";
    row.innerHTML =
      `<label for="f-${name}">${name}</label>` +
      `<input id="f-${name}" type="text" inputmode="decimal">` +
      `<details class="range-hint"><summary>healthy range</summary>` +
      `${range.low}&ndash;${range.high} ${range.unit}</details>` +
      `<span class="hint" id="hint-${name}"></span>`;
    host.appendChild(row);
    row.querySelector("input")!.addEventListener("input", refreshValidation);
  }
  $("ranges-pane").innerHTML = renderRangesDropdown(ranges);
  document
    .querySelectorAll("input[name=clinician_prediction]")
    .forEach((el) => el.addEventListener("change", refreshValidation));
  refreshValidation();
}

async function refreshRecords(): Promise<void> {
  try {
    const { records } = await getRecords();
    $("records-pane").innerHTML = renderRecordList(records);
    document.querySelectorAll<HTMLButtonElement>(
      ".outcome-survived, .outcome-died",
    ).forEach((btn) => {
      btn.onclick = async () => {
        const outcome = btn.classList.contains("outcome-died") ? "died" : "survived";
        try {
          // outcome writes are never optimistic: wait for the 2xx
          await patchOutcome(btn.dataset.id as string, outcome);
        } catch (err) {
          if (err instanceof ApiError && err.status === 409) {
            banner("Outcome already recorded for this stay (write-once).");
          } else {
            banner(`Could not record outcome: ${(err as Error).message}`, refreshRecords);
          }
        }
        await refreshRecords();
      };
    });
  } catch (err) {
    banner(`Could not load records: ${(err as Error).message}`, refreshRecords);
  }
}

async function refreshDrift(): Promise<void> {
  const pane = $("drift-pane");
  try {
    const report = await getDrift();
    const flagged = (report.features as { name: string; flagged: boolean }[])
      .filter((f) => f.flagged)
      .map((f) => f.name);
    pane.textContent = flagged.length
      ? `Drift flags: ${flagged.join(", ")}`
      : "No drift flags on accumulated records.";
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      pane.textContent = "Drift summary appears once enough outcomes are recorded.";
    } else {
      pane.textContent = "";
    }
  }
}

async function submit(): Promise<void> {
  const check = checkForm(formValues(), clinicianChoice(), ranges);
  if (!check.ready) {
    refreshValidation();
    return;
  }
  flow.submit({
    features: check.values,
    clinician_prediction: clinicianChoice() as "survive" | "die",
  });
  refreshValidation();
  try {
    const record = await postRecord({
      features: check.values,
      clinician_prediction: clinicianChoice() as "survive" | "die",
    });
    flow.succeed(record);
    $("output-panes").innerHTML =
      renderModelPane("vdp", record.models.vdp) +
      renderModelPane("mlp", record.models.mlp);
    $("reset").hidden = false;
    await refreshRecords();
    await refreshDrift();
  } catch (err) {
    flow.fail();
    banner(`Submission failed: ${(err as Error).message}`);
  }
  refreshValidation();
}

async function init(): Promise<void> {
  try {
    ranges = await getRanges();
  } catch (err) {
    banner(`Could not load feature ranges: ${(err as Error).message}`, () => void init());
    return;
  }
  buildForm();
  $("submit").addEventListener("click", () => void submit());
  $("reset").addEventListener("click", () => {
    flow.reset();
    $("output-panes").innerHTML = "";
    $("reset").hidden = true;
    refreshValidation();
  });
  $("stats-toggle").addEventListener("click", async () => {
    const drawer = $("stats-pane");
    if (!statsLoaded) {
      try {
        drawer.innerHTML = renderStatsDrawer(await getStats());
        statsLoaded = true;
      } catch (err) {
        banner(`Could not load training statistics: ${(err as Error).message}`);
        return;
      }
    }
    drawer.hidden = !drawer.hidden;
  });
  await refreshRecords();
  await refreshDrift();
}

void init();
