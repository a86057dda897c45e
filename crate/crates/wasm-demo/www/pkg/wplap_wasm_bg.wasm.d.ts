/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_simulation_free: (a: number, b: number) => void;
export const bound_curves: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
export const simulation_advance: (a: number, b: number) => [number, number];
export const simulation_energy: (a: number) => number;
export const simulation_inner_iters: (a: number) => number;
export const simulation_l2_norm: (a: number) => number;
export const simulation_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number];
export const simulation_time: (a: number) => number;
export const simulation_values: (a: number) => [number, number];
export const simulation_weight: (a: number) => [number, number];
export const simulation_xs: (a: number) => [number, number];
export const weight_constants: (a: number, b: number, c: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
