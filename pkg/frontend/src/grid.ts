// The editable 9x18 claim grid behind the speech composer. Cells only take
// vocabulary values, and serialization to the dense wire form is exact.

import {
  ATTRIBUTES, Attribute, InstructionWire, MODALITIES, Modality, N_PLAYERS,
  SpeechHeader, WireCell,
} from "./types.js";

export class InstructionDraft {
  private cells: Map<string, Modality> = new Map();

  constructor(public speaker: number, public header: SpeechHeader | null = null) {}

  static key(seat: number, attr: Attribute): string {
    return `${seat}:${attr}`;
  }

  get(seat: number, attr: Attribute): Modality {
    return this.cells.get(InstructionDraft.key(seat, attr)) ?? "unmentioned";
  }

  set(seat: number, attr: Attribute, modality: Modality): void {
    if (seat < 1 || seat > N_PLAYERS) {
      throw new Error(`seat out of range: ${seat}`);
    }
    if (!ATTRIBUTES.includes(attr)) {
      throw new Error(`unknown attribute: ${attr}`);
    }
    if (!MODALITIES.includes(modality)) {
      throw new Error(`unknown modality: ${modality}`);
    }
    const key = InstructionDraft.key(seat, attr);
    if (modality === "unmentioned") {
      this.cells.delete(key);
    } else {
      this.cells.set(key, modality);
    }
  }

  clear(): void {
    this.cells.clear();
  }

  isEmpty(): boolean {
    return this.cells.size === 0;
  }

  mentioned(): WireCell[] {
    const out: WireCell[] = [];
    for (const seat of Array.from({ length: N_PLAYERS }, (_, i) => i + 1)) {
      for (const attr of ATTRIBUTES) {
        const m = this.get(seat, attr);
        if (m !== "unmentioned") {
          out.push([seat, attr, m]);
        }
      }
    }
    return out;
  }

  toWire(): InstructionWire {
    return { speaker: this.speaker, header: this.header, cells: this.mentioned() };
  }

  static fromWire(wire: InstructionWire): InstructionDraft {
    const draft = new InstructionDraft(wire.speaker, wire.header);
    for (const [seat, attr, modality] of wire.cells) {
      draft.set(seat, attr, modality);
    }
    return draft;
  }
}

// the option list every modality dropdown shows, in vocabulary order
export function modalityOptions(): Modality[] {
  return [...MODALITIES];
}

export function attributeRows(): Attribute[] {
  return [...ATTRIBUTES];
}
