/* tslint:disable */
/* eslint-disable */

export class DensityField {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Densities on an `nx x ny` grid over the given box, row-major from `y0`.
     */
    grid(nx: number, ny: number, x0: number, x1: number, y0: number, y1: number): Float64Array;
    /**
     * Fits a `k`-component mixture to a seeded synthetic 2-D state cloud.
     */
    constructor(seed: number, k: number, alpha: number);
    /**
     * Correction path from `(x, y)` as `[x, y, density]` triples, ending
     * when the state is in distribution or after `max_steps` steps.
     */
    path(x: number, y: number, max_steps: number): Float64Array;
    /**
     * Training states as `[x0, y0, x1, y1, ...]`.
     */
    points(): Float64Array;
    threshold(): number;
}

/**
 * Per-table weights used as the page's default mixture.
 */
export function default_weights(): Float64Array;

/**
 * Sampling probabilities `w^alpha / sum(w^alpha)`.
 */
export function mixture(weights: Float64Array, alpha: number): Float64Array;

/**
 * Resamples `values` (one sample per frame) with the given stride.
 */
export function resample(values: Float64Array, stride: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_densityfield_free: (a: number, b: number) => void;
    readonly default_weights: () => [number, number];
    readonly densityfield_grid: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly densityfield_new: (a: number, b: number, c: number) => [number, number, number];
    readonly densityfield_path: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly densityfield_points: (a: number) => [number, number];
    readonly densityfield_threshold: (a: number) => number;
    readonly mixture: (a: number, b: number, c: number) => [number, number, number, number];
    readonly resample: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
