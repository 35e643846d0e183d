// Payload shapes of the annotation service's JSON API. The UI never
// derives decisions itself; everything shown comes from these records.

export interface LikertOption {
  value: number;
  label: string;
}

export interface Progress {
  answered: number;
  words_total: number;
}

export interface Task {
  session: string;
  done: boolean;
  word?: string;
  question?: string;
  options?: string[];
  trap_question?: string;
  likert?: LikertOption[];
  progress: Progress;
}

export interface Decision {
  protected: boolean;
  category: string | null;
  reliability: number;
}

export interface WordTally {
  word: string;
  votes: Record<string, number>;
  total: number;
  decision: Decision | null;
}

export interface SessionStats {
  total: number;
  rejected: number;
  counted: number;
}

export interface Tallies {
  words: WordTally[];
  sessions: SessionStats;
  sources: string[];
}

export interface KappaResult {
  a: string;
  b: string;
  words: number;
  kappa: number;
  display: number;
}

export interface PendingResponse {
  session: string;
  word: string;
  category_choice: string;
  likert: number;
}

export interface SubmitAck {
  ok: boolean;
  duplicate: boolean;
}
