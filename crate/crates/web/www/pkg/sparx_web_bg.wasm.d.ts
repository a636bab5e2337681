/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_sparxdemo_free: (a: number, b: number) => void;
export const sparxdemo_faithfulness_curve: (a: number, b: number, c: number) => [number, number, number, number];
export const sparxdemo_global_view: (a: number, b: number) => [number, number, number, number];
export const sparxdemo_local_view: (a: number, b: number, c: number) => [number, number, number, number];
export const sparxdemo_new: () => [number, number, number];
export const sparxdemo_summary: (a: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
