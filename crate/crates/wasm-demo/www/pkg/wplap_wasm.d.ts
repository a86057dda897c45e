/* tslint:disable */
/* eslint-disable */

/**
 * One trajectory on `[-r_dom, r_dom]`, advanced a few steps per frame.
 */
export class Simulation {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Advances `n` proximal steps.
     */
    advance(n: number): void;
    energy(): number;
    inner_iters(): number;
    l2_norm(): number;
    constructor(m: number, r_dom: number, p: number, q: number, eps: number, coupling_name: string, forcing_amp: number, amplitude: number, dt: number);
    time(): number;
    values(): Float64Array;
    weight(): Float64Array;
    /**
     * Node coordinates.
     */
    xs(): Float64Array;
}

/**
 * `[t, δ, β₁, β₂]` rows, flattened, for a ramp `L₁(t) = b0 + b1 (t - t0)⁺`.
 */
export function bound_curves(p: number, q: number, lipschitz: number, b0: number, b1: number, t_start: number, t_end: number, samples: number): Float64Array;

/**
 * `[∫a₀^{-2/(p-2)}, finite-on-ℝⁿ flag, c_embed, c_coerc]`.
 */
export function weight_constants(p: number, n_theory: number, q: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_simulation_free: (a: number, b: number) => void;
    readonly bound_curves: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly simulation_advance: (a: number, b: number) => [number, number];
    readonly simulation_energy: (a: number) => number;
    readonly simulation_inner_iters: (a: number) => number;
    readonly simulation_l2_norm: (a: number) => number;
    readonly simulation_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number];
    readonly simulation_time: (a: number) => number;
    readonly simulation_values: (a: number) => [number, number];
    readonly simulation_weight: (a: number) => [number, number];
    readonly simulation_xs: (a: number) => [number, number];
    readonly weight_constants: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
