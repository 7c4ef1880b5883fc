/** Wire types for the session service. Field names follow the JSON bodies. */

export type Speaker = "agent" | "user";

export type Phase =
  | "story_pending"
  | "drafting"
  | "reviewing"
  | "ending_proposed"
  | "completed";

export interface TurnView {
  index: number;
  speaker: Speaker;
  text: string;
  committed: boolean;
  provenance?: string;
}

export interface AnnotationView {
  turn_index: number;
  char_start: number;
  char_end: number;
  referent: string;
  domain: string;
  slot: string;
  value: string;
  resolution?: string | null;
  resolution_target?: string | null;
}

export interface ConflictView {
  conflict_id: string;
  annotation: AnnotationView;
  existing_values: string[];
  options: string[];
}

export interface TripletView {
  referent: string;
  domain: string;
  slot: string;
  value: string;
}

export interface RoleMapView {
  agent_name: string;
  user_name: string;
}

export interface ScenarioView {
  triplets: TripletView[];
  agent_persona: string;
  caller_persona: string;
  role_map: RoleMapView;
}

export interface SessionView {
  session_id: string;
  phase: Phase;
  version: number;
  story: string;
  scenario: ScenarioView | null;
  turns: TurnView[];
  annotations: AnnotationView[];
  pending_conflict: ConflictView | null;
  counters: Record<string, number>;
}

export interface SlotFillView {
  domain: string;
  slot: string;
  values: string[];
}

export interface StateView {
  as_of_turn: number;
  entries: Record<string, SlotFillView[]>;
}

export interface SlotDefView {
  name: string;
  kind: "categorical" | "free_form";
  values: string[];
  description?: string;
}

export interface DomainView {
  name: string;
  slots: SlotDefView[];
}

export interface OntologyView {
  version: string;
  referents: string[];
  domains: DomainView[];
}

/** Body for POST /sessions/{id}/annotations. */
export interface AnnotationRequest {
  turn_index: number;
  char_start: number;
  char_end: number;
  referent: string;
  domain: string;
  slot: string;
  value: string;
}
