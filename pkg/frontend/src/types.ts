// Wire types shared with the game service. The vocabulary must match the
// server's fixed attribute/modality tables exactly.

export const ATTRIBUTES = [
  "werewolf", "good", "vote", "seer", "witch", "gold_water", "check",
  "poison", "villager", "wolves_target", "hunter", "silver_water",
  "suicide", "uncertain_identity", "shoot", "save", "abstain_voting",
  "special_role",
] as const;

export const MODALITIES = [
  "unmentioned", "is", "might_be", "is_not", "might_not_be", "not_sure",
] as const;

export type Attribute = (typeof ATTRIBUTES)[number];
export type Modality = (typeof MODALITIES)[number];

export const N_PLAYERS = 9;
export const SEATS = [1, 2, 3, 4, 5, 6, 7, 8, 9] as const;

export interface SpeechHeader {
  day: number;
  kind: "first" | "second" | "last_words";
  order: number;
}

export type WireCell = [seat: number, attr: Attribute, modality: Modality];

export interface InstructionWire {
  speaker: number;
  header: SpeechHeader | null;
  cells: WireCell[];
}

export interface ActionWire {
  kind: string;
  target: number | null;
}

export interface GameEventWire {
  kind: string;
  day: number;
  data: Record<string, unknown>;
}

export interface PendingDecision {
  kind: string;
  options: ActionWire[];
  shown_target: number | null;
  header: SpeechHeader | null;
  deadline_in: number | null;
}

export interface ObservationSummary {
  viewer: number;
  day: number;
  phase: string;
  role: string;
  alive: Record<string, boolean>;
  teammates: number[];
  revealed_roles: Record<string, string>;
  announced_deaths: [number, number[]][];
  votes: { day: number; round: number; ballots: Record<string, number | null> }[];
  exiles: [number, number | null][];
  speeches: InstructionWire[];
  seer_checks: [number, boolean][];
  witch: {
    antidote_used: boolean;
    poison_used: boolean;
    known_targets: [number, number][];
    saved: number | null;
    poisoned: number | null;
  };
  wolf_night_votes: number[][];
  tied_candidates: number[];
  winner: string | null;
}

export interface PollResponse {
  events: GameEventWire[];
  next: number;
  pending: PendingDecision | null;
  game_over: boolean;
  winner: string | null;
  observation: ObservationSummary;
}

export interface SessionInfo {
  session_id: string;
  seed: number;
  seats: { seat: number; kind: string }[];
}

export interface JoinInfo {
  token: string;
  seat: number;
  role: string;
  teammates: number[];
}

export interface GameResult {
  game_over: boolean;
  winner?: string;
  roles?: Record<string, string>;
  behavior_scores?: Record<string, { total: number; items: [string, number][] }>;
  timed_out?: { seat: number; kind: string; day: number }[];
  log?: string[];
}
