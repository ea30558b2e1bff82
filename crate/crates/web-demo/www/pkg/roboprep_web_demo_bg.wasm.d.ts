/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_densityfield_free: (a: number, b: number) => void;
export const default_weights: () => [number, number];
export const densityfield_grid: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const densityfield_new: (a: number, b: number, c: number) => [number, number, number];
export const densityfield_path: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const densityfield_points: (a: number) => [number, number];
export const densityfield_threshold: (a: number) => number;
export const mixture: (a: number, b: number, c: number) => [number, number, number, number];
export const resample: (a: number, b: number, c: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
