/* tslint:disable */
/* eslint-disable */

/**
 * `P(r e^{iφ})` on a grid of `points` moduli, plus the ledger points for
 * denominators up to `n_max`.
 */
export function compare_curve(expr: string, n_max: number, points: number, phi: number): string;

/**
 * Overlaps of the symmetric state with the partial-DFT basis. A `seed` of
 * zero or below uses the standard basis, otherwise a Haar basis.
 */
export function construction_overlaps(n: number, k: number, theta: number, seed: number): string;

/**
 * Falsifier run over `n_min..=n_max`.
 */
export function falsify_candidate(expr: string, n_min: number, n_max: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly compare_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly construction_overlaps: (a: number, b: number, c: number, d: number) => [number, number];
    readonly falsify_candidate: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
