/**
 * Group selection rules shared by the exploration and comparison views.
 *
 * Invariants: the two groups stay disjoint; clicking a parent arc replaces
 * the active side's group with that node's leaves (stealing any of them
 * from the other side); clicking a leaf toggles its membership on the
 * active side.
 */

export type Side = "left" | "right";

export interface SelectionState {
  left: Set<string>;
  right: Set<string>;
  activeSide: Side;
  origin: "manual" | "suggestion";
}

export function emptySelection(): SelectionState {
  return { left: new Set(), right: new Set(), activeSide: "left", origin: "manual" };
}

function other(side: Side): Side {
  return side === "left" ? "right" : "left";
}

export function group(state: SelectionState, side: Side): Set<string> {
  return side === "left" ? state.left : state.right;
}

export function selectParent(state: SelectionState, leaves: string[]): SelectionState {
  const side = state.activeSide;
  const mine = new Set(leaves);
  const theirs = new Set(group(state, other(side)));
  for (const id of mine) theirs.delete(id);
  return {
    ...state,
    [side]: mine,
    [other(side)]: theirs,
    origin: "manual",
  } as SelectionState;
}

export function toggleLeaf(state: SelectionState, id: string): SelectionState {
  const side = state.activeSide;
  const mine = new Set(group(state, side));
  const theirs = new Set(group(state, other(side)));
  if (mine.has(id)) {
    mine.delete(id);
  } else {
    mine.add(id);
    theirs.delete(id);
  }
  return { ...state, [side]: mine, [other(side)]: theirs, origin: "manual" } as SelectionState;
}

export function loadSuggestion(
  state: SelectionState,
  leaves1: string[],
  leaves2: string[],
): SelectionState {
  return {
    ...state,
    left: new Set(leaves1),
    right: new Set(leaves2),
    origin: "suggestion",
  };
}

export function removeBehavior(state: SelectionState, side: Side, id: string): SelectionState {
  const mine = new Set(group(state, side));
  mine.delete(id);
  return { ...state, [side]: mine } as SelectionState;
}

export function transferBehavior(state: SelectionState, from: Side, id: string): SelectionState {
  const source = new Set(group(state, from));
  if (!source.has(id)) return state;
  const target = new Set(group(state, other(from)));
  source.delete(id);
  target.add(id);
  return { ...state, [from]: source, [other(from)]: target } as SelectionState;
}

export function canSubmit(state: SelectionState): boolean {
  if (state.left.size === 0 || state.right.size === 0) return false;
  for (const id of state.left) if (state.right.has(id)) return false;
  return true;
}
