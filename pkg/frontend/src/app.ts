/**
 * Screening view state machine.
 *
 * The server is the only source of truth: every gauge, count, and pool chip
 * is re-rendered from the last service response, and the stopping rule is
 * never evaluated client side. The app holds exactly one piece of local
 * state worth protecting, the not-yet-acknowledged verdict, and keeps it
 * across transport failures so a retry can repost it.
 */

import {
  ApiClient,
  Judgment,
  NextResult,
  Reference,
  ServiceError,
  SessionView,
} from "./api.js";

type Phase =
  | "start"
  | "loading"
  | "card"
  | "fp-entry"
  | "submitting"
  | "retry"
  | "complete"
  | "readonly"
  | "error";

interface PendingVerdict {
  refId: string;
  judgment: Judgment;
  keywords: string[];
}

function sameList(a: string[], b: string[]): boolean {
  return a.length === b.length && a.every((x, i) => x === b[i]);
}

export class App {
  private phase: Phase = "loading";
  private sessionId: string | null = null;
  private session: SessionView | null = null;
  private card: Reference | null = null;
  private pending: PendingVerdict | null = null;
  private retryAction: (() => void) | null = null;
  private retryText = "";
  private errorText = "";
  private exhaustedNote: string | null = null;
  private fpInput: HTMLInputElement | null = null;
  private readonly doc: Document;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly onSessionCreated?: (id: string) => void,
  ) {
    this.doc = root.ownerDocument;
    this.doc.addEventListener("keydown", this.onKey);
  }

  dispose(): void {
    this.doc.removeEventListener("keydown", this.onKey);
  }

  async boot(sessionId: string | null): Promise<void> {
    if (sessionId) {
      await this.openSession(sessionId);
    } else {
      await this.showStart();
    }
  }

  // -- session flow --------------------------------------------------------

  private async openSession(id: string): Promise<void> {
    this.sessionId = id;
    this.phase = "loading";
    this.render();
    let view: SessionView;
    try {
      view = await this.api.session(id);
    } catch (err) {
      if (err instanceof ServiceError) {
        this.showError(
          err.status === 404
            ? `no session ${id} on this service`
            : err.message,
        );
      } else {
        this.showRetry("could not reach the service", () => this.openSession(id));
      }
      return;
    }
    this.session = view;
    if (view.state === "active") {
      await this.advance();
    } else {
      this.exhaustedNote =
        view.state === "complete-exhausted"
          ? "the population ran out before the session completed"
          : null;
      this.phase = "complete";
      this.render();
    }
  }

  private async advance(): Promise<void> {
    if (!this.sessionId) return;
    this.phase = "loading";
    this.render();
    let result: NextResult;
    try {
      result = await this.api.next(this.sessionId);
    } catch (err) {
      if (err instanceof ServiceError) {
        this.showError(err.message);
      } else {
        this.showRetry("could not reach the service", () => this.advance());
      }
      return;
    }
    this.session = result.session;
    if (result.complete) {
      this.exhaustedNote = result.exhausted
        ? result.error ?? "the population ran out before the session completed"
        : null;
      this.phase = "complete";
    } else {
      this.card = result.reference ?? null;
      this.phase = "card";
    }
    this.render();
  }

  private submitRelated(): void {
    if (this.phase !== "card" || !this.card) return;
    this.pending = { refId: this.card.id, judgment: "related", keywords: [] };
    void this.send();
  }

  private openFpEntry(): void {
    if (this.phase !== "card") return;
    this.phase = "fp-entry";
    this.render();
    this.fpInput?.focus();
  }

  private cancelFpEntry(): void {
    if (this.phase !== "fp-entry") return;
    this.phase = "card";
    this.render();
  }

  private submitFp(): void {
    if (this.phase !== "fp-entry" || !this.card || !this.fpInput) return;
    const keywords = this.fpInput.value
      .split(",")
      .map((k) => k.trim())
      .filter((k) => k.length > 0);
    if (keywords.length === 0) {
      // inline nudge only; a full re-render would wipe the input
      const msg = this.doc.getElementById("fp-error");
      if (msg) msg.textContent = "a false positive needs at least one keyword";
      return;
    }
    this.pending = { refId: this.card.id, judgment: "false-positive", keywords };
    void this.send();
  }

  private async send(): Promise<void> {
    if (!this.sessionId || !this.pending) return;
    this.phase = "submitting";
    this.render();
    const pending = this.pending;
    let view: SessionView;
    try {
      view = await this.api.submitVerdict(
        this.sessionId,
        pending.refId,
        pending.judgment,
        pending.keywords,
      );
    } catch (err) {
      if (err instanceof ServiceError && err.code === "duplicate-verdict") {
        await this.reconcileDuplicate(pending);
      } else if (err instanceof ServiceError) {
        this.showError(err.message);
      } else {
        this.showRetry(
          "the verdict did not reach the service; nothing was recorded twice",
          () => this.send(),
        );
      }
      return;
    }
    await this.applyVerdictResult(view);
  }

  /**
   * A duplicate-verdict answer means the server already holds a verdict for
   * this reference. If it equals the one we tried to send this was our own
   * repost (a retry after a dropped response) and screening continues; if it
   * differs, another window owns the session and this one turns read only.
   */
  private async reconcileDuplicate(pending: PendingVerdict): Promise<void> {
    if (!this.sessionId) return;
    let view: SessionView;
    try {
      view = await this.api.session(this.sessionId);
    } catch {
      this.showRetry("could not reach the service", () => this.send());
      return;
    }
    const recorded = view.verdicts[pending.refId];
    if (
      recorded &&
      recorded.judgment === pending.judgment &&
      sameList(recorded.keywords, pending.keywords)
    ) {
      await this.applyVerdictResult(view);
      return;
    }
    this.session = view;
    this.pending = null;
    this.phase = "readonly";
    this.render();
  }

  private async applyVerdictResult(view: SessionView): Promise<void> {
    this.session = view;
    this.pending = null;
    this.card = null;
    if (view.state === "active") {
      await this.advance();
    } else {
      this.exhaustedNote = null;
      this.phase = "complete";
      this.render();
    }
  }

  private showRetry(text: string, action: () => void): void {
    this.retryText = text;
    this.retryAction = action;
    this.phase = "retry";
    this.render();
  }

  private showError(text: string): void {
    this.errorText = text;
    this.phase = "error";
    this.render();
  }

  // -- start view ----------------------------------------------------------

  private async showStart(): Promise<void> {
    let stats;
    try {
      stats = await this.api.corpusStats();
    } catch {
      this.showRetry("could not reach the service", () => this.showStart());
      return;
    }
    this.phase = "start";
    this.root.textContent = "";

    const wrap = this.el("section", "start");
    wrap.appendChild(this.el("h1", undefined, "review sessions"));
    const years = stats.year_range
      ? `, years ${stats.year_range[0]} to ${stats.year_range[1]}`
      : "";
    const sources = Object.entries(stats.per_source)
      .map(([name, n]) => `${name} ${n}`)
      .join(", ");
    wrap.appendChild(
      this.el(
        "p",
        "corpus-line",
        `${stats.size} references${years} (${sources})`,
      ),
    );

    const form = this.el("form", "create-form");
    form.id = "create-form";
    const kind = this.el("select") as HTMLSelectElement;
    kind.id = "new-kind";
    for (const k of ["keywording", "qa-audit"]) {
      const opt = this.el("option", undefined, k) as HTMLOptionElement;
      opt.value = k;
      kind.appendChild(opt);
    }
    const seed = this.el("input") as HTMLInputElement;
    seed.id = "new-seed";
    seed.type = "number";
    seed.placeholder = "seed";
    seed.required = true;
    const target = this.el("input") as HTMLInputElement;
    target.id = "new-target";
    target.type = "number";
    target.placeholder = "target (qa-audit)";
    const go = this.el("button", undefined, "start session") as HTMLButtonElement;
    go.type = "submit";
    const createError = this.el("div", "inline-error");
    createError.id = "create-error";
    form.append(
      this.labelled("kind", kind),
      this.labelled("seed", seed),
      this.labelled("target", target),
      go,
      createError,
    );
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.createSession(kind.value, seed.value, target.value, createError);
    });
    wrap.appendChild(form);

    wrap.appendChild(this.buildPreviewPanel());
    this.root.appendChild(wrap);
  }

  private async createSession(
    kind: string,
    seedText: string,
    targetText: string,
    errorOut: HTMLElement,
  ): Promise<void> {
    const seed = Number.parseInt(seedText, 10);
    if (Number.isNaN(seed)) {
      errorOut.textContent = "seed must be an integer";
      return;
    }
    const target = targetText.trim() === "" ? undefined : Number.parseInt(targetText, 10);
    let view: SessionView;
    try {
      view = await this.api.createSession(kind, seed, target);
    } catch (err) {
      errorOut.textContent =
        err instanceof ServiceError ? err.message : "could not reach the service";
      return;
    }
    this.onSessionCreated?.(view.session_id);
    await this.openSession(view.session_id);
  }

  private buildPreviewPanel(): HTMLElement {
    const panel = this.el("section", "preview");
    panel.appendChild(this.el("h2", undefined, "query preview"));
    panel.appendChild(
      this.el(
        "p",
        "hint",
        "count the hits of an exclusion query before adding it to the rule file",
      ),
    );
    const input = this.el("input") as HTMLInputElement;
    input.id = "preview-query";
    input.placeholder = 'e.g. protein* OR "metabolic network"';
    const run = this.el("button", undefined, "count hits") as HTMLButtonElement;
    run.id = "preview-run";
    run.type = "button";
    const result = this.el("div", "preview-result");
    result.id = "preview-result";
    run.addEventListener("click", () => {
      void this.runPreview(input.value, result);
    });
    panel.append(input, run, result);
    return panel;
  }

  private async runPreview(query: string, out: HTMLElement): Promise<void> {
    try {
      const preview = await this.api.previewQuery(query);
      const extra = preview.truncated ? " (id list truncated)" : "";
      out.textContent = `${preview.count} matching reference(s)${extra}`;
    } catch (err) {
      if (err instanceof ServiceError && err.code === "query-syntax") {
        const pos = err.details["position"];
        out.textContent = `syntax error at position ${pos}: ${err.message}`;
      } else if (err instanceof ServiceError) {
        out.textContent = err.message;
      } else {
        out.textContent = "could not reach the service";
      }
    }
  }

  // -- keyboard ------------------------------------------------------------

  private onKey = (ev: KeyboardEvent): void => {
    const target = ev.target as HTMLElement | null;
    const tag = target && target.tagName ? target.tagName : "";
    if (tag === "INPUT" || tag === "TEXTAREA" || tag === "SELECT") {
      if (this.phase === "fp-entry" && target === this.fpInput) {
        if (ev.key === "Enter") {
          ev.preventDefault();
          this.submitFp();
        } else if (ev.key === "Escape") {
          this.cancelFpEntry();
        }
      }
      return;
    }
    if (this.phase === "card") {
      if (ev.key === "r" || ev.key === "R") this.submitRelated();
      else if (ev.key === "f" || ev.key === "F") this.openFpEntry();
    } else if (this.phase === "fp-entry" && ev.key === "Escape") {
      this.cancelFpEntry();
    }
  };

  // -- rendering -----------------------------------------------------------

  private el(tag: string, className?: string, text?: string): HTMLElement {
    const node = this.doc.createElement(tag);
    if (className) node.className = className;
    if (text !== undefined) node.textContent = text;
    return node;
  }

  private labelled(caption: string, control: HTMLElement): HTMLElement {
    const label = this.el("label", "field");
    label.appendChild(this.el("span", "caption", caption));
    label.appendChild(control);
    return label;
  }

  private render(): void {
    if (this.phase === "start") return; // the start view renders itself once
    this.root.textContent = "";
    this.fpInput = null;

    if (this.session) this.root.appendChild(this.renderHeader(this.session));
    if (this.session) this.root.appendChild(this.renderProgress(this.session));

    switch (this.phase) {
      case "loading":
        this.root.appendChild(this.el("p", "loading", "fetching the next reference"));
        break;
      case "card":
      case "fp-entry":
      case "submitting":
        if (this.card) this.root.appendChild(this.renderCard(this.card));
        this.root.appendChild(this.renderVerdictBar());
        if (this.phase === "fp-entry") this.root.appendChild(this.renderFpEntry());
        break;
      case "retry": {
        const banner = this.el("div", "banner retry-banner", this.retryText + " ");
        banner.id = "retry-banner";
        const btn = this.el("button", undefined, "retry") as HTMLButtonElement;
        btn.id = "btn-retry";
        btn.type = "button";
        btn.addEventListener("click", () => {
          this.retryAction?.();
        });
        banner.appendChild(btn);
        this.root.appendChild(banner);
        break;
      }
      case "complete":
        this.root.appendChild(this.renderCompletion());
        break;
      case "readonly":
        {
          const banner = this.el(
            "div",
            "banner readonly-banner",
            "another window recorded a conflicting verdict for this session; " +
              "this view is now read only",
          );
          banner.id = "readonly-banner";
          this.root.appendChild(banner);
        }
        break;
      case "error":
        {
          const view = this.el("div", "banner error-view", this.errorText);
          view.id = "error-view";
          this.root.appendChild(view);
        }
        break;
    }

    if (this.session) {
      this.root.appendChild(this.renderPool(this.session));
      this.root.appendChild(this.renderHistory(this.session));
    }
  }

  private renderHeader(view: SessionView): HTMLElement {
    const header = this.el("header", "session-header");
    header.appendChild(this.el("span", "kind-badge", view.kind));
    header.appendChild(this.el("span", "session-id", `session ${view.session_id}`));
    header.appendChild(
      this.el("span", "corpus-note", `${view.corpus_size} references, seed ${view.seed}`),
    );
    return header;
  }

  private renderProgress(view: SessionView): HTMLElement {
    const section = this.el("section", "progress");
    if (view.kind === "keywording") {
      const gauge = this.el("div", "streak-gauge");
      gauge.id = "streak-gauge";
      for (let i = 0; i < view.streak_target; i++) {
        gauge.appendChild(this.el("span", i < view.clean_streak ? "seg on" : "seg"));
      }
      section.appendChild(gauge);
      section.appendChild(
        this.el(
          "div",
          "progress-text",
          `clean streak ${view.clean_streak} of ${view.streak_target}`,
        ),
      );
    } else {
      const text =
        view.target === null
          ? `${view.judged} judged`
          : `judged ${view.judged} of ${view.target}`;
      const line = this.el("div", "progress-text", text);
      line.id = "audit-progress";
      section.appendChild(line);
    }
    return section;
  }

  private renderCard(ref: Reference): HTMLElement {
    const card = this.el("article", "card");
    card.id = "card";
    card.dataset["refId"] = ref.id;

    const title = this.el("h2", "card-title", ref.title);
    title.id = "card-title";
    card.appendChild(title);

    const byline = this.el("div", "card-authors", ref.authors.join(", "));
    byline.id = "card-authors";
    card.appendChild(byline);

    const meta = this.el("div", "card-meta");
    const bits: string[] = [];
    if (ref.year !== null) bits.push(String(ref.year));
    if (ref.venue) bits.push(ref.venue);
    if (ref.volume) bits.push(`vol. ${ref.volume}`);
    if (ref.pages) bits.push(`pp. ${ref.pages}`);
    bits.push(ref.ref_type);
    if (ref.citation_count !== null) bits.push(`${ref.citation_count} citations`);
    meta.textContent = bits.join(" · ");
    meta.appendChild(this.el("span", "source-badge", ref.source_db));
    card.appendChild(meta);

    // the whole abstract, always; screening decisions hang on it
    const abstract = this.el("p", "card-abstract", ref.abstract);
    abstract.id = "card-abstract";
    card.appendChild(abstract);

    if (ref.keywords.length > 0) {
      const kws = this.el("div", "card-keywords");
      kws.id = "card-keywords";
      for (const k of ref.keywords) kws.appendChild(this.el("span", "chip", k));
      card.appendChild(kws);
    }
    return card;
  }

  private renderVerdictBar(): HTMLElement {
    const bar = this.el("div", "verdict-bar");
    const disabled = this.phase !== "card";

    const related = this.el("button", "btn-related") as HTMLButtonElement;
    related.id = "btn-related";
    related.type = "button";
    related.textContent = "related ";
    related.appendChild(this.el("kbd", undefined, "R"));
    related.disabled = disabled;
    related.addEventListener("click", () => this.submitRelated());

    const fp = this.el("button", "btn-fp") as HTMLButtonElement;
    fp.id = "btn-fp";
    fp.type = "button";
    fp.textContent = "false positive ";
    fp.appendChild(this.el("kbd", undefined, "F"));
    fp.disabled = disabled;
    fp.addEventListener("click", () => this.openFpEntry());

    bar.append(related, fp);
    if (this.phase === "submitting") {
      bar.appendChild(this.el("span", "submitting-note", "recording"));
    }
    return bar;
  }

  private renderFpEntry(): HTMLElement {
    const entry = this.el("div", "fp-entry");
    entry.appendChild(
      this.el("label", "caption", "exclusion keywords (comma separated)"),
    );
    const input = this.el("input") as HTMLInputElement;
    input.id = "fp-input";
    input.type = "text";
    this.fpInput = input;
    entry.appendChild(input);

    const error = this.el("div", "inline-error");
    error.id = "fp-error";
    entry.appendChild(error);

    const submit = this.el("button", undefined, "record false positive") as HTMLButtonElement;
    submit.id = "fp-submit";
    submit.type = "button";
    submit.addEventListener("click", () => this.submitFp());
    const cancel = this.el("button", "secondary", "cancel") as HTMLButtonElement;
    cancel.id = "fp-cancel";
    cancel.type = "button";
    cancel.addEventListener("click", () => this.cancelFpEntry());
    entry.append(submit, cancel);
    return entry;
  }

  private renderCompletion(): HTMLElement {
    const view = this.session;
    const banner = this.el("div", "banner completion-banner");
    banner.id = "completion-banner";
    banner.appendChild(this.el("h2", undefined, "session complete"));
    if (this.exhaustedNote) {
      banner.appendChild(this.el("p", "exhausted-note", this.exhaustedNote));
    }
    if (view) {
      const verdicts = Object.values(view.verdicts);
      const related = verdicts.filter((v) => v.judgment === "related").length;
      const fps = verdicts.length - related;
      banner.appendChild(
        this.el(
          "p",
          "summary",
          `${view.judged} judged: ${related} related, ${fps} false positive(s); ` +
            `${view.pool.length} keyword(s) pooled`,
        ),
      );
    }
    return banner;
  }

  private renderPool(view: SessionView): HTMLElement {
    const section = this.el("section", "pool");
    section.appendChild(
      this.el("h3", undefined, `exclusion keyword pool (${view.pool.length})`),
    );
    const chips = this.el("div", "pool-chips");
    for (const keyword of view.pool) {
      chips.appendChild(this.el("span", "pool-chip", keyword));
    }
    section.appendChild(chips);
    return section;
  }

  private renderHistory(view: SessionView): HTMLElement {
    const section = this.el("section", "history");
    section.appendChild(this.el("h3", undefined, `verdicts (${view.judged})`));
    const list = this.el("ul", "history-list");
    for (const refId of view.drawn) {
      const verdict = view.verdicts[refId];
      if (!verdict) continue;
      const item = this.el("li", "history-item");
      item.dataset["refId"] = refId;
      const kws = verdict.keywords.length > 0 ? ` [${verdict.keywords.join(", ")}]` : "";
      item.textContent = `${refId}: ${verdict.judgment}${kws}`;
      list.appendChild(item);
    }
    section.appendChild(list);
    return section;
  }
}
