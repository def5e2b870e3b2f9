/** Regenerate fixtures/ui_export.json from the scripted session. */

import * as fs from "fs";
import * as path from "path";

import { buildFixtureSession } from "../src/fixture";

const session = buildFixtureSession();
const violations = session.validateWorkingSet();
if (violations.length > 0) {
  console.error("fixture session is invalid:", violations);
  process.exit(1);
}
const out = path.join(__dirname, "..", "fixtures", "ui_export.json");
fs.mkdirSync(path.dirname(out), { recursive: true });
fs.writeFileSync(out, session.exportJson());
console.error(`wrote ${out}`);
