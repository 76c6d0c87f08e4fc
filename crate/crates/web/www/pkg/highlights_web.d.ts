/* tslint:disable */
/* eslint-disable */

/**
 * JSON `{threshold, apexes, clips}` for an error series.
 */
export function detect_highlights(errors: Float64Array, rate: number, fraction: number, pre_s: number, post_s: number): string;

/**
 * JSON list of clips for typed-in apex times.
 */
export function link_apex_times(apex_text: string, duration: number, pre_s: number, post_s: number): string;

export function tone_band_fraction(tone_hz: number, low_hz: number, high_hz: number): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly detect_highlights: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly link_apex_times: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly tone_band_fraction: (a: number, b: number, c: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
