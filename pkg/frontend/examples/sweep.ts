/** Sweep both algorithms and two relaxation-update rules over one problem. */

import {
  createProblem,
  destroyProblem,
  ErrorCode,
  getResult,
  lastError,
  setOption,
  solve,
} from "../src/index.js";

interface Cell {
  label: string;
  options: Array<[string, string | number]>;
}

const cells: Cell[] = [
  { label: "relaxation/rolloff", options: [["algorithm", "relaxation"], ["relaxation_update", "rolloff"]] },
  { label: "relaxation/proportional", options: [["algorithm", "relaxation"], ["relaxation_update", "proportional"]] },
  { label: "penalty/static", options: [["algorithm", "penalty"], ["rho_update", "static"]] },
];

const problem = {
  n: 2,
  Q: [
    [2.0, 0.0],
    [0.0, 2.0],
  ],
  q: [-4.0, -2.0],
  c0: 5.0,
  lx: [0.0, 0.0] as const,
  pairs: [[0, 1]] as Array<[number, number]>,
  xInit: [0.9, 0.2],
  name: "tilted-switch",
};

for (const cell of cells) {
  const handle = createProblem({ ...problem, lx: [0, 0] });
  if (handle === 0) {
    throw new Error(lastError());
  }
  for (const [key, value] of cell.options) {
    if (setOption(handle, key, value) !== ErrorCode.OK) {
      throw new Error(`${cell.label}: ${lastError()}`);
    }
  }
  const code = solve(handle);
  if (code !== ErrorCode.OK) {
    throw new Error(`${cell.label}: ${lastError()}`);
  }
  const r = getResult(handle)!;
  console.log(
    `${cell.label.padEnd(26)} status=${r.status} f=${r.objectiveRaw} iters=${r.iterations}`,
  );
  destroyProblem(handle);
}
