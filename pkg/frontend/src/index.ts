/**
 * Client for the mpcckit MPCC solver.
 *
 * Mirrors a C-style binding surface: create/destroy problem handles built
 * from in-memory QPCC arrays, set options by name, solve, and read result
 * fields. Errors are integer codes plus a last-error message getter; no
 * exceptions cross the call surface. The client talks to the solver only
 * through its external interfaces: the documented problem-file schema and
 * the command-line front end.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export enum ErrorCode {
  OK = 0,
  INVALID_HANDLE = 1,
  UNKNOWN_OPTION = 2,
  SHAPE_MISMATCH = 3,
  PARSE_ERROR = 4,
  SOLVE_FAILURE = 5,
  NO_RESULT = 6,
  IO_ERROR = 7,
}

export type Bound = number | "inf" | "-inf";

/** Coordinate-sparse matrix: entries (rows[k], cols[k]) = vals[k]. */
export interface CooMatrix {
  shape: [number, number];
  rows: number[];
  cols: number[];
  vals: number[];
}

export type Matrix = number[][] | CooMatrix;

/** Array-defined QPCC: 0.5 x'Qx + q'x + c0, lg <= Ax <= ug, lx <= x <= ux,
 * with complementarity pairs over variable indices. */
export interface ProblemArrays {
  n: number;
  q: number[];
  Q?: Matrix;
  c0?: number;
  A?: Matrix;
  lg?: Bound[];
  ug?: Bound[];
  lx?: Bound[];
  ux?: Bound[];
  pairs: Array<[number, number]>;
  xInit?: number[];
  name?: string;
}

export interface SolveResultRecord {
  status: string;
  objective: number;
  /** exact decimal text of the objective as printed by the solver */
  objectiveRaw: string;
  stationarity: number;
  constraintViolation: number;
  compLower: number;
  compSlack: number;
  compUpper: number;
  residualInf: number;
  residualRaw: Record<string, string>;
  stationarityLabel: string;
  iterations: number;
  factorizations: number;
  x: number[];
}

type Algorithm = "relaxation" | "penalty";

interface Entry {
  doc: Record<string, unknown>;
  algorithm: Algorithm;
  options: Map<string, string>;
  result: SolveResultRecord | null;
}

const handles = new Map<number, Entry>();
let nextHandle = 1;
let lastErrorMessage = "";
let knownOptions: Set<string> | null = null;

function fail(code: ErrorCode, message: string): ErrorCode {
  lastErrorMessage = message;
  return code;
}

/** Message describing the most recent failure. */
export function lastError(): string {
  return lastErrorMessage;
}

function cliCommand(): string[] {
  const raw = process.env.MPCCKIT_CLI ?? "mpcckit";
  return raw.split(" ").filter((s) => s.length > 0);
}

function runCli(args: string[]): { status: number; stdout: string; stderr: string } | null {
  const [cmd, ...pre] = cliCommand();
  const proc = spawnSync(cmd, [...pre, ...args], { encoding: "utf8" });
  if (proc.error) {
    lastErrorMessage = `failed to launch solver CLI: ${proc.error.message}`;
    return null;
  }
  return { status: proc.status ?? -1, stdout: proc.stdout, stderr: proc.stderr };
}

function optionRegistry(): Set<string> | null {
  if (knownOptions !== null) {
    return knownOptions;
  }
  const out = runCli(["list", "--options"]);
  if (out === null || out.status !== 0) {
    lastErrorMessage = "could not read the option registry from the CLI";
    return null;
  }
  const names = new Set<string>();
  for (const line of out.stdout.split("\n")) {
    const m = line.match(/^ {2}(\S+)\s+default=/);
    if (m) {
      names.add(m[1]);
    }
  }
  knownOptions = names;
  return names;
}

function denseShape(mat: Matrix): [number, number] {
  if (Array.isArray(mat)) {
    return [mat.length, mat.length > 0 ? mat[0].length : 0];
  }
  return mat.shape;
}

function matrixDoc(mat: Matrix): Record<string, unknown> {
  if (Array.isArray(mat)) {
    return { format: "dense", data: mat };
  }
  return { format: "coo", shape: mat.shape, rows: mat.rows, cols: mat.cols, vals: mat.vals };
}

function denseEntries(mat: Matrix, n: number): number[][] {
  if (Array.isArray(mat)) {
    return mat;
  }
  const out: number[][] = Array.from({ length: n }, () => new Array(n).fill(0));
  for (let k = 0; k < mat.vals.length; k++) {
    out[mat.rows[k]][mat.cols[k]] += mat.vals[k];
  }
  return out;
}

/**
 * Build a problem handle from arrays. All data is copied into the handle at
 * construction; later mutation of the caller's arrays has no effect.
 * Returns a positive handle, or 0 with lastError() set.
 */
export function createProblem(data: ProblemArrays): number {
  const n = data.n;
  if (!Number.isInteger(n) || n < 1) {
    fail(ErrorCode.SHAPE_MISMATCH, `n must be a positive integer, got ${n}`);
    return 0;
  }
  if (data.q.length !== n) {
    fail(ErrorCode.SHAPE_MISMATCH, `q must have length ${n}, got ${data.q.length}`);
    return 0;
  }
  if (data.Q !== undefined) {
    const [r, c] = denseShape(data.Q);
    if (r !== n || c !== n) {
      fail(ErrorCode.SHAPE_MISMATCH, `Q must be ${n}x${n}, got ${r}x${c}`);
      return 0;
    }
    const dense = denseEntries(data.Q, n);
    for (let i = 0; i < n; i++) {
      for (let j = i + 1; j < n; j++) {
        if (dense[i][j] !== dense[j][i]) {
          fail(ErrorCode.SHAPE_MISMATCH, `Q must be symmetric (entries ${i},${j})`);
          return 0;
        }
      }
    }
  }
  const m = data.A !== undefined ? denseShape(data.A)[0] : 0;
  if (data.A !== undefined && denseShape(data.A)[1] !== n) {
    fail(ErrorCode.SHAPE_MISMATCH, `A must have ${n} columns`);
    return 0;
  }
  if ((data.lg?.length ?? m) !== m || (data.ug?.length ?? m) !== m) {
    fail(ErrorCode.SHAPE_MISMATCH, `lg/ug must have length ${m}`);
    return 0;
  }
  for (const arr of [data.lx, data.ux, data.xInit] as const) {
    if (arr !== undefined && arr.length !== n) {
      fail(ErrorCode.SHAPE_MISMATCH, `bounds and xInit must have length ${n}`);
      return 0;
    }
  }
  const seen = new Set<number>();
  for (const [i, j] of data.pairs) {
    if (i < 0 || i >= n || j < 0 || j >= n || i === j || seen.has(i) || seen.has(j)) {
      fail(ErrorCode.SHAPE_MISMATCH, `invalid complementarity pair (${i}, ${j})`);
      return 0;
    }
    seen.add(i).add(j);
  }

  const doc: Record<string, unknown> = {
    version: 1,
    name: data.name ?? "client-problem",
    n,
    objective: {
      ...(data.Q !== undefined ? { Q: matrixDoc(data.Q) } : {}),
      q: [...data.q],
      const: data.c0 ?? 0,
    },
    pairs: data.pairs.map(([i, j]) => [i, j]),
  };
  if (data.A !== undefined) {
    doc.constraints = {
      A: matrixDoc(data.A),
      lg: [...(data.lg ?? [])],
      ug: [...(data.ug ?? [])],
    };
  }
  if (data.lx !== undefined || data.ux !== undefined) {
    doc.bounds = {
      ...(data.lx !== undefined ? { lx: [...data.lx] } : {}),
      ...(data.ux !== undefined ? { ux: [...data.ux] } : {}),
    };
  }
  if (data.xInit !== undefined) {
    doc.x_init = [...data.xInit];
  }

  const handle = nextHandle++;
  handles.set(handle, {
    doc,
    algorithm: "relaxation",
    options: new Map(),
    result: null,
  });
  lastErrorMessage = "";
  return handle;
}

/** Release a handle; further calls on it return INVALID_HANDLE. */
export function destroyProblem(handle: number): ErrorCode {
  if (!handles.delete(handle)) {
    return fail(ErrorCode.INVALID_HANDLE, `no such handle: ${handle}`);
  }
  return ErrorCode.OK;
}

function formatOptionValue(value: string | number | boolean): string {
  if (typeof value === "boolean") {
    return value ? "true" : "false";
  }
  // Number.prototype.toString is shortest-round-trip: the solver parses the
  // exact same double
  return String(value);
}

/**
 * Set a solver option by its published name (same semantics as the CLI's
 * --set). The pseudo-option "algorithm" selects relaxation or penalty.
 */
export function setOption(
  handle: number,
  key: string,
  value: string | number | boolean,
): ErrorCode {
  const entry = handles.get(handle);
  if (entry === undefined) {
    return fail(ErrorCode.INVALID_HANDLE, `no such handle: ${handle}`);
  }
  if (key === "algorithm") {
    if (value !== "relaxation" && value !== "penalty") {
      return fail(ErrorCode.UNKNOWN_OPTION, `unknown algorithm ${String(value)}`);
    }
    entry.algorithm = value;
    return ErrorCode.OK;
  }
  const registry = optionRegistry();
  if (registry === null) {
    return ErrorCode.IO_ERROR;
  }
  if (!registry.has(key)) {
    return fail(ErrorCode.UNKNOWN_OPTION, `unknown option '${key}'`);
  }
  entry.options.set(key, formatOptionValue(value));
  return ErrorCode.OK;
}

function parseSummary(text: string): SolveResultRecord | null {
  const fields = new Map<string, string>();
  for (const line of text.split("\n")) {
    const eq = line.indexOf("=");
    if (eq > 0 && !line.startsWith("#")) {
      fields.set(line.slice(0, eq), line.slice(eq + 1));
    }
  }
  const status = fields.get("status");
  if (status === undefined) {
    return null;
  }
  const residualKeys = [
    "stationarity", "constraint_violation", "comp_lower", "comp_slack",
    "comp_upper", "residual_inf",
  ];
  const raw: Record<string, string> = {};
  for (const k of residualKeys) {
    raw[k] = fields.get(k) ?? "nan";
  }
  return {
    status,
    objective: Number(fields.get("objective") ?? "nan"),
    objectiveRaw: fields.get("objective") ?? "",
    stationarity: Number(raw.stationarity),
    constraintViolation: Number(raw.constraint_violation),
    compLower: Number(raw.comp_lower),
    compSlack: Number(raw.comp_slack),
    compUpper: Number(raw.comp_upper),
    residualInf: Number(raw.residual_inf),
    residualRaw: raw,
    stationarityLabel: fields.get("stationarity_label") ?? "none",
    iterations: Number(fields.get("iterations") ?? "-1"),
    factorizations: Number(fields.get("factorizations") ?? "-1"),
    x: (fields.get("x") ?? "").split(",").filter((s) => s.length).map(Number),
  };
}

/**
 * Solve the problem behind the handle. OK is returned whenever the solver
 * ran and reported a status (inspect getStatus for non-success statuses);
 * SOLVE_FAILURE/PARSE_ERROR cover launcher and schema failures.
 */
export function solve(handle: number): ErrorCode {
  const entry = handles.get(handle);
  if (entry === undefined) {
    return fail(ErrorCode.INVALID_HANDLE, `no such handle: ${handle}`);
  }
  const dir = mkdtempSync(join(tmpdir(), "mpcckit-client-"));
  const path = join(dir, "problem.json");
  try {
    writeFileSync(path, JSON.stringify(entry.doc));
    const args = ["solve", "--file", path, "--algorithm", entry.algorithm];
    for (const [k, v] of entry.options) {
      args.push("--set", `${k}=${v}`);
    }
    const out = runCli(args);
    if (out === null) {
      return ErrorCode.IO_ERROR;
    }
    if (out.status === 2) {
      return fail(
        out.stderr.includes("unknown option")
          ? ErrorCode.UNKNOWN_OPTION
          : ErrorCode.PARSE_ERROR,
        out.stderr.trim(),
      );
    }
    const result = parseSummary(out.stdout);
    if (result === null) {
      return fail(ErrorCode.SOLVE_FAILURE,
        `solver produced no summary (exit ${out.status})`);
    }
    entry.result = result;
    if (out.status !== 0 && out.status !== 1) {
      return fail(ErrorCode.SOLVE_FAILURE, `solver exited with ${out.status}`);
    }
    return ErrorCode.OK;
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

function resultOf(handle: number): SolveResultRecord | null {
  const entry = handles.get(handle);
  if (entry === undefined) {
    fail(ErrorCode.INVALID_HANDLE, `no such handle: ${handle}`);
    return null;
  }
  if (entry.result === null) {
    fail(ErrorCode.NO_RESULT, "solve has not produced a result yet");
    return null;
  }
  return entry.result;
}

/** Full result record, or null with lastError() set. */
export function getResult(handle: number): SolveResultRecord | null {
  return resultOf(handle);
}

export function getStatus(handle: number): string | null {
  return resultOf(handle)?.status ?? null;
}

export function getObjective(handle: number): number | null {
  return resultOf(handle)?.objective ?? null;
}

export function getSolution(handle: number): number[] | null {
  return resultOf(handle)?.x ?? null;
}

export function getIterations(handle: number): number | null {
  return resultOf(handle)?.iterations ?? null;
}

/** Residual components by their summary names (e.g. "comp_upper"). */
export function getResidual(handle: number, component: string): number | null {
  const res = resultOf(handle);
  if (res === null) {
    return null;
  }
  if (!(component in res.residualRaw)) {
    fail(ErrorCode.UNKNOWN_OPTION, `unknown residual component '${component}'`);
    return null;
  }
  return Number(res.residualRaw[component]);
}
