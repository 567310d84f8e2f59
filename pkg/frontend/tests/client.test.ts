/**
 * Client behavior against the live solver CLI: cross-interface parity,
 * handle lifecycle, and error-code paths.
 */

import { spawnSync } from "node:child_process";
import { describe, expect, it } from "vitest";

import {
  createProblem,
  destroyProblem,
  ErrorCode,
  getObjective,
  getResidual,
  getResult,
  getSolution,
  getStatus,
  lastError,
  type ProblemArrays,
  setOption,
  solve,
} from "../src/index.js";

function cli(...args: string[]): { status: number; stdout: string } {
  const raw = (process.env.MPCCKIT_CLI ?? "mpcckit").split(" ");
  const proc = spawnSync(raw[0], [...raw.slice(1), ...args], {
    encoding: "utf8",
  });
  return { status: proc.status ?? -1, stdout: proc.stdout };
}

function summaryField(text: string, key: string): string {
  for (const line of text.split("\n")) {
    if (line.startsWith(key + "=")) {
      return line.slice(key.length + 1);
    }
  }
  throw new Error(`missing field ${key}`);
}

/** Rebuild a builtin's arrays from the CLI's problem-file dump. */
function builtinArrays(name: string): ProblemArrays {
  const dump = cli("list", "--dump-problem", name);
  expect(dump.status).toBe(0);
  const doc = JSON.parse(dump.stdout);
  const arrays: ProblemArrays = {
    n: doc.n,
    q: doc.objective.q,
    Q: doc.objective.Q?.data,
    c0: doc.objective.const ?? 0,
    pairs: doc.pairs,
    lx: doc.bounds?.lx,
    ux: doc.bounds?.ux,
    xInit: doc.x_init,
    name,
  };
  if (doc.constraints) {
    arrays.A = doc.constraints.A.data;
    arrays.lg = doc.constraints.lg;
    arrays.ug = doc.constraints.ug;
  }
  return arrays;
}

describe("cross-interface parity", () => {
  it("matches the CLI objective bitwise and the residuals exactly", () => {
    const handle = createProblem(builtinArrays("two-circle"));
    expect(handle).toBeGreaterThan(0);
    expect(solve(handle)).toBe(ErrorCode.OK);
    const viaClient = getResult(handle)!;

    const direct = cli("solve", "--builtin", "two-circle",
      "--algorithm", "relaxation");
    expect(direct.status).toBe(0);
    expect(viaClient.status).toBe("success");
    expect(viaClient.objectiveRaw).toBe(summaryField(direct.stdout, "objective"));
    for (const key of ["stationarity", "constraint_violation", "comp_lower",
      "comp_slack", "comp_upper", "residual_inf"]) {
      expect(viaClient.residualRaw[key]).toBe(summaryField(direct.stdout, key));
    }
    destroyProblem(handle);
  });

  it("honors a looser tolerance through set_option", () => {
    const handle = createProblem(builtinArrays("two-circle"));
    expect(setOption(handle, "tol", 1e-6)).toBe(ErrorCode.OK);
    expect(solve(handle)).toBe(ErrorCode.OK);
    expect(getStatus(handle)).toBe("success");
    expect(getResidual(handle, "residual_inf")!).toBeLessThanOrEqual(1e-6);
    destroyProblem(handle);
  });

  it("solves the penalty algorithm via the pseudo-option", () => {
    const handle = createProblem(builtinArrays("two-circle"));
    expect(setOption(handle, "algorithm", "penalty")).toBe(ErrorCode.OK);
    expect(solve(handle)).toBe(ErrorCode.OK);
    expect(getStatus(handle)).toBe("success");
    expect(Math.abs(getObjective(handle)! - 1.0)).toBeLessThanOrEqual(1e-6);
    destroyProblem(handle);
  });
});

describe("problem construction", () => {
  it("solves a zero-pair problem as a plain NLP", () => {
    const handle = createProblem({
      n: 2,
      Q: [
        [2.0, 0.0],
        [0.0, 2.0],
      ],
      q: [-2.0, -4.0],
      pairs: [],
      lx: [0, 0],
    });
    expect(handle).toBeGreaterThan(0);
    expect(solve(handle)).toBe(ErrorCode.OK);
    expect(getStatus(handle)).toBe("success");
    const x = getSolution(handle)!;
    expect(Math.abs(x[0] - 1.0)).toBeLessThanOrEqual(1e-6);
    expect(Math.abs(x[1] - 2.0)).toBeLessThanOrEqual(1e-6);
    destroyProblem(handle);
  });

  it("rejects an asymmetric Q with an error code", () => {
    const handle = createProblem({
      n: 2,
      Q: [
        [1.0, 0.5],
        [0.0, 1.0],
      ],
      q: [0, 0],
      pairs: [[0, 1]],
    });
    expect(handle).toBe(0);
    expect(lastError()).toContain("symmetric");
  });

  it("rejects shape mismatches with an error code", () => {
    expect(createProblem({ n: 3, q: [1, 2], pairs: [] })).toBe(0);
    expect(lastError()).toContain("length 3");
    expect(createProblem({ n: 2, q: [1, 2], pairs: [[0, 5]] })).toBe(0);
    expect(lastError()).toContain("pair");
  });

  it("copies arrays at construction", () => {
    const q = [-2.0, -2.0];
    const arrays = builtinArrays("two-circle");
    arrays.q = q;
    const handle = createProblem(arrays);
    q[0] = 999.0; // mutating the caller's array must not affect the handle
    expect(solve(handle)).toBe(ErrorCode.OK);
    expect(Math.abs(getObjective(handle)! - 1.0)).toBeLessThanOrEqual(1e-6);
    destroyProblem(handle);
  });
});

describe("lifecycle and error codes", () => {
  it("returns INVALID_HANDLE after release, without aborting", () => {
    const handle = createProblem(builtinArrays("two-circle"));
    expect(destroyProblem(handle)).toBe(ErrorCode.OK);
    expect(solve(handle)).toBe(ErrorCode.INVALID_HANDLE);
    expect(getResult(handle)).toBeNull();
    expect(lastError()).toContain("handle");
    expect(destroyProblem(handle)).toBe(ErrorCode.INVALID_HANDLE);
  });

  it("returns UNKNOWN_OPTION for unregistered keys", () => {
    const handle = createProblem(builtinArrays("two-circle"));
    expect(setOption(handle, "definitely_not_an_option", 1)).toBe(
      ErrorCode.UNKNOWN_OPTION,
    );
    expect(lastError()).toContain("definitely_not_an_option");
    destroyProblem(handle);
  });

  it("returns NO_RESULT before the first solve", () => {
    const handle = createProblem(builtinArrays("two-circle"));
    expect(getObjective(handle)).toBeNull();
    destroyProblem(handle);
  });

  it("reports non-success statuses through getStatus, not exceptions", () => {
    // two inconsistent equality rows: the solve runs and reports failure
    const handle = createProblem({
      n: 2,
      q: [0, 0],
      A: [
        [1.0, 0.0],
        [1.0, 0.0],
      ],
      lg: [0.0, 1.0],
      ug: [0.0, 1.0],
      pairs: [[0, 1]],
    });
    expect(setOption(handle, "max_iter", 100)).toBe(ErrorCode.OK);
    expect(solve(handle)).toBe(ErrorCode.OK);
    expect(getStatus(handle)).toBe("restoration_failed");
    destroyProblem(handle);
  });
});
