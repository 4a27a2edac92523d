/**
 * The display-side state model: a snapshot plus the fold over diff records.
 *
 * This must apply change records exactly the way the hub does; the
 * conformance fixtures in tests/ are produced by a real recorded session
 * and compare the folded model against the hub's own snapshots.
 * No interaction logic lives here: the display only ever renders what the
 * hub said.
 */

export interface Card {
  id: string;
  src: string;
  tags: string[];
  scale: number;
  sel: string | null;
}

export interface Column {
  cards: Card[];
  scroll: number;
  query: string | null;
}

export interface PlacedItem {
  card: Card;
  u: number;
  v: number;
}

export interface Ring {
  u: number;
  active: boolean;
  sid: string | null;
}

export interface Prompt {
  id: string;
  sid: string | null;
  text: string;
  style: string;
}

export interface SessionInfo {
  side: string;
  active: boolean;
  bound: boolean;
  connected: boolean;
}

export interface Snapshot {
  revision: number;
  sessions: Record<string, SessionInfo>;
  columns: { left: Column[]; right: Column[] };
  front: {
    order: string[];
    personal: Record<string, Card[]>;
    partition: { personal: Record<string, number[]>; shared: number[] };
    shared: {
      texts: { id: string; rect: number[]; title: string; body: string }[];
      targets: { id: string; rect: number[] }[];
      placed: Record<string, PlacedItem>;
      placed_order: string[];
      drag: Record<string, string | null>;
    };
  };
  highlights: Record<string, [string, number] | null>;
  cursors: Record<string, { surface: unknown[]; u: number; v: number }>;
  rings: Record<string, Ring>;
  prompts: Record<string, Prompt>;
  meta: { next_card: number; next_prompt: number };
}

export type Change = { op: string } & Record<string, any>;

export function cloneSnapshot(snap: Snapshot): Snapshot {
  return JSON.parse(JSON.stringify(snap)) as Snapshot;
}

/** Apply one revision's change records; returns the same (mutated) model. */
export function applyChanges(model: Snapshot, changes: Change[]): Snapshot {
  for (const ch of changes) {
    switch (ch.op) {
      case "session":
        model.sessions[ch.sid] = { ...ch.value };
        break;
      case "session_gone":
        delete model.sessions[ch.sid];
        model.front.order = model.front.order.filter((s) => s !== ch.sid);
        delete model.front.personal[ch.sid];
        delete model.highlights[ch.sid];
        delete model.front.shared.drag[ch.sid];
        break;
      case "column":
        (model.columns as any)[ch.side][ch.index] = deepCopy(ch.value);
        break;
      case "personal":
        if (!model.front.order.includes(ch.sid)) {
          model.front.order.push(ch.sid);
        }
        model.front.personal[ch.sid] = deepCopy(ch.value);
        break;
      case "partition":
        model.front.partition = deepCopy(ch.value);
        break;
      case "highlight":
        model.highlights[ch.sid] = ch.value ? [ch.value[0], ch.value[1]] : null;
        break;
      case "cursor":
        model.cursors[ch.sid] = deepCopy(ch.value);
        break;
      case "cursor_gone":
        delete model.cursors[ch.sid];
        break;
      case "ring":
        model.rings[ch.track] = { ...ch.value };
        break;
      case "ring_gone":
        delete model.rings[ch.track];
        break;
      case "placed": {
        const shared = model.front.shared;
        if (!(ch.image_id in shared.placed)) {
          shared.placed_order.push(ch.image_id);
        }
        shared.placed[ch.image_id] = deepCopy(ch.value);
        break;
      }
      case "placed_gone": {
        const shared = model.front.shared;
        delete shared.placed[ch.image_id];
        shared.placed_order = shared.placed_order.filter((i) => i !== ch.image_id);
        break;
      }
      case "drag":
        model.front.shared.drag[ch.sid] = ch.value;
        break;
      case "texts":
        model.front.shared.texts = deepCopy(ch.value);
        break;
      case "targets":
        model.front.shared.targets = deepCopy(ch.value);
        break;
      case "prompt":
        model.prompts[ch.pid] = { ...ch.value };
        break;
      case "prompt_gone":
        delete model.prompts[ch.pid];
        break;
      case "meta":
        model.meta = { ...ch.value };
        break;
      default:
        throw new Error(`unknown change op ${ch.op}`);
    }
  }
  return model;
}

export function applyDiff(
  model: Snapshot,
  diff: { revision: number; changes: Change[] }
): Snapshot {
  applyChanges(model, diff.changes);
  model.revision = diff.revision;
  return model;
}

function deepCopy<T>(value: T): T {
  return JSON.parse(JSON.stringify(value)) as T;
}
