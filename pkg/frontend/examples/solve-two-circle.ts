/** Solve the two-circle QPCC from in-memory arrays and print the result. */

import {
  createProblem,
  destroyProblem,
  ErrorCode,
  getResult,
  lastError,
  setOption,
  solve,
} from "../src/index.js";

const handle = createProblem({
  n: 2,
  Q: [
    [2.0, 0.0],
    [0.0, 2.0],
  ],
  q: [-2.0, -2.0],
  c0: 2.0,
  lx: [0.0, 0.0],
  ux: ["inf", "inf"],
  pairs: [[0, 1]],
  xInit: [0.8, 0.3],
  name: "two-circle",
});
if (handle === 0) {
  throw new Error(lastError());
}

if (setOption(handle, "tol", 1e-8) !== ErrorCode.OK) {
  throw new Error(lastError());
}

const code = solve(handle);
if (code !== ErrorCode.OK) {
  throw new Error(`solve failed (${ErrorCode[code]}): ${lastError()}`);
}

const result = getResult(handle)!;
console.log(`status        ${result.status}`);
console.log(`objective     ${result.objectiveRaw}`);
console.log(`comp residual ${result.compUpper}`);
console.log(`label         ${result.stationarityLabel}`);
console.log(`x             [${result.x.join(", ")}]`);

destroyProblem(handle);
