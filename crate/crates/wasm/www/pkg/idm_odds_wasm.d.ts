/* tslint:disable */
/* eslint-disable */

/**
 * Fits the mortality ratio to a table in `k,age_lo,age_hi,n,c` layout and
 * returns the result as JSON.
 */
export function fit_table(csv: string, incidence_denominator: number): string;

/**
 * Prevalence odds at time `t` for `ages_from, ages_from + step, ..., ages_to`
 * under the reference incidence shape and Gompertz mortality. Returns the
 * ages followed by the odds, as one flat array of length `2n`.
 */
export function odds_curve(gamma1: number, gamma2: number, gamma3: number, incidence_denominator: number, t: number, ages_from: number, ages_to: number, step: number): Float64Array;

/**
 * The bundled reference table.
 */
export function reference_table(): string;

/**
 * Simulated current-status table (CSV) at time 100 with the reference age
 * groups.
 */
export function simulate_table(gamma1: number, gamma2: number, gamma3: number, incidence_denominator: number, births_per_year: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly fit_table: (a: number, b: number, c: number) => [number, number, number, number];
    readonly odds_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly reference_table: () => [number, number];
    readonly simulate_table: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
