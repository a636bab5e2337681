/* tslint:disable */
/* eslint-disable */

export class SparxDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Unfaithfulness and cognitive complexity across `ratios`.
     */
    faithfulness_curve(ratios: Float64Array): string;
    /**
     * Global explanation at `ratio` as JSON with an `svg` field.
     */
    global_view(ratio: number): string;
    /**
     * Local explanation of data row `row` at `ratio`.
     */
    local_view(row: number, ratio: number): string;
    /**
     * Trains the bundled model; takes a moment on first load.
     */
    constructor();
    summary(): string;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_sparxdemo_free: (a: number, b: number) => void;
    readonly sparxdemo_faithfulness_curve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly sparxdemo_global_view: (a: number, b: number) => [number, number, number, number];
    readonly sparxdemo_local_view: (a: number, b: number, c: number) => [number, number, number, number];
    readonly sparxdemo_new: () => [number, number, number];
    readonly sparxdemo_summary: (a: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
