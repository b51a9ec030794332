/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_eigenview_free: (a: number, b: number) => void;
export const __wbg_matchview_free: (a: number, b: number) => void;
export const __wbg_sinkhornview_free: (a: number, b: number) => void;
export const eigenview_eigenfunction: (a: number, b: number) => [number, number, number, number];
export const eigenview_eigenvalues: (a: number) => [number, number];
export const eigenview_faces: (a: number) => [number, number];
export const eigenview_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const eigenview_vertices: (a: number) => [number, number];
export const matchview_errors: (a: number) => [number, number];
export const matchview_faces: (a: number) => [number, number];
export const matchview_meanError: (a: number) => number;
export const matchview_new: (a: number, b: number, c: number) => [number, number, number];
export const matchview_pckFractions: (a: number) => [number, number];
export const matchview_pckThresholds: (a: number) => [number, number];
export const matchview_vertices: (a: number) => [number, number];
export const sinkhornview_matrix: (a: number) => [number, number];
export const sinkhornview_maxResidual: (a: number) => number;
export const sinkhornview_new: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const sinkhornview_recoveredFraction: (a: number) => number;
export const sinkhornview_size: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
