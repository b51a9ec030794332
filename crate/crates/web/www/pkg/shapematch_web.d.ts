/* tslint:disable */
/* eslint-disable */

/**
 * Mesh plus its first `k` cotangent-Laplacian eigenfunctions.
 */
export class EigenView {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Per-vertex values of eigenfunction `index`.
     */
    eigenfunction(index: number): Float64Array;
    eigenvalues(): Float64Array;
    /**
     * Flat vertex-index triples.
     */
    faces(): Uint32Array;
    constructor(shape: string, resolution: number, k: number, seed: number);
    /**
     * Flat `x y z` triples.
     */
    vertices(): Float64Array;
}

/**
 * Mesh X of a bent-plane pair matched to a noisy point cloud of Y.
 */
export class MatchView {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Normalized geodesic error of every target vertex; NaN where the
     * prediction lies on another connected component.
     */
    errors(): Float64Array;
    faces(): Uint32Array;
    meanError(): number;
    constructor(nx: number, noise: number, seed: number);
    pckFractions(): Float64Array;
    pckThresholds(): Float64Array;
    vertices(): Float64Array;
}

/**
 * Sinkhorn output for `S_ij = margin · [j = σ(i)] + U(-1, 1)`.
 */
export class SinkhornView {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `Π̂` in row-major order.
     */
    matrix(): Float64Array;
    maxResidual(): number;
    constructor(n: number, margin: number, temperature: number, iterations: number, seed: number);
    /**
     * Fraction of rows whose argmax is the planted partner.
     */
    recoveredFraction(): number;
    size(): number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_eigenview_free: (a: number, b: number) => void;
    readonly __wbg_matchview_free: (a: number, b: number) => void;
    readonly __wbg_sinkhornview_free: (a: number, b: number) => void;
    readonly eigenview_eigenfunction: (a: number, b: number) => [number, number, number, number];
    readonly eigenview_eigenvalues: (a: number) => [number, number];
    readonly eigenview_faces: (a: number) => [number, number];
    readonly eigenview_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly eigenview_vertices: (a: number) => [number, number];
    readonly matchview_errors: (a: number) => [number, number];
    readonly matchview_faces: (a: number) => [number, number];
    readonly matchview_meanError: (a: number) => number;
    readonly matchview_new: (a: number, b: number, c: number) => [number, number, number];
    readonly matchview_pckFractions: (a: number) => [number, number];
    readonly matchview_pckThresholds: (a: number) => [number, number];
    readonly matchview_vertices: (a: number) => [number, number];
    readonly sinkhornview_matrix: (a: number) => [number, number];
    readonly sinkhornview_maxResidual: (a: number) => number;
    readonly sinkhornview_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly sinkhornview_recoveredFraction: (a: number) => number;
    readonly sinkhornview_size: (a: number) => number;
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
