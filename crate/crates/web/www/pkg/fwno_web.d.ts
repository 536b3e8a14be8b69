/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    iterations(): number;
    /**
     * Slash-joined architecture names in terminal order.
     */
    labels(): string[];
    /**
     * Exact terminal distribution of the current networks.
     */
    learned(): Float64Array;
    /**
     * Rewards are log-uniform in [0.1, 10] drawn from `reward_seed`.
     */
    constructor(reward_seed: number, train_seed: number, hidden_dim: number, batch_size: number);
    rewards(): Float64Array;
    /**
     * Frequencies of `count` rollouts from the current networks.
     */
    sample(count: number, seed: number): Float64Array;
    /**
     * `R(x) / Z`.
     */
    target(): Float64Array;
    /**
     * Runs `count` more iterations; returns the total so far.
     */
    train(count: number): number;
    /**
     * Total variation distance between `p` and `R(x) / Z`.
     */
    tv(p: Float64Array): number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_iterations: (a: number) => number;
    readonly demo_labels: (a: number) => [number, number];
    readonly demo_learned: (a: number) => [number, number, number, number];
    readonly demo_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly demo_rewards: (a: number) => [number, number];
    readonly demo_sample: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_target: (a: number) => [number, number];
    readonly demo_train: (a: number, b: number) => [number, number, number];
    readonly demo_tv: (a: number, b: number, c: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_drop_slice: (a: number, b: number) => void;
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
