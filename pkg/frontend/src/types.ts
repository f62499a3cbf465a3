/** Wire documents as the service emits them (kebab-case keys). */

export type SourceStateName =
  | "pending-activation"
  | "active"
  | "degraded"
  | "failed"
  | "retired"
  | "unknown";

export interface RankingRow {
  "source-id": string;
  "rank-score": number;
  "feature-sum": number;
  "vulnerability-sum": number;
}

export interface DecisionDoc {
  "data-type": string;
  "failed-source": string | null;
  ranking: RankingRow[];
  chosen: string | null;
  action: string;
  "decided-at": number;
  rationale: string;
}

export interface TransitionDoc {
  "source-id": string;
  "data-type": string;
  from: string | null;
  to: SourceStateName;
  at: number;
  reason: string;
}

export interface MatrixUpdatedDoc {
  "prepared-at": number;
  digest: string;
  matrices: Record<string, string>;
}

export interface MatrixPair {
  "source-a": string;
  "source-b": string;
  scores: Record<string, number>;
  "feature-sum": number;
  "vulnerability-sum": number;
}

export interface MatrixDoc {
  "data-type": string;
  "registry-version": string;
  "created-at": number;
  weights: Record<string, number>;
  "feature-attributes": string[];
  "vulnerability-attributes": string[];
  sources: string[];
  pairs: MatrixPair[];
}

export interface ActiveInfo {
  "source-id": string | null;
  alarm: boolean;
  standard: string | null;
  state: string | null;
  "ready-at": number | null;
}

export interface StatusDoc {
  state: SourceStateName;
  since: number | null;
  "ready-at": number | null;
  "last-seen": number | null;
  "staleness-horizon": number | null;
}

export interface SourceDoc {
  "source-id": string;
  "display-name"?: string;
  "data-type": string;
  standard?: boolean;
  "attribute-values": Record<string, unknown>;
}

export interface RegistryPayload {
  version: string;
  registry: {
    sources: SourceDoc[];
    weights: Record<string, number>;
  };
}

export interface HealthDoc {
  status: string;
  version: string;
  "registry-version": string;
  "pack-digest": string;
  "data-types": string[];
  "latest-event-id": number;
  time: number;
}

export interface DecisionRecord extends DecisionDoc {
  seq: number;
  at: number;
}

export interface DecisionsPayload {
  decisions: DecisionRecord[];
  "latest-seq": number;
}

export interface MatrixPayload {
  digest: string;
  matrix: MatrixDoc;
  table: (string | number)[][];
}
