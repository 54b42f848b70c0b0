import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { RunReport, SessionResource, SnapshotDoc, InvalidationReport } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

function load<T>(name: string): T {
  return JSON.parse(readFileSync(join(here, "fixtures", `${name}.json`), "utf-8")) as T;
}

export const classicCreated = () => load<SessionResource>("classic_created");
export const classicRunTo2 = () => load<RunReport>("classic_run_to_2");
export const classicRunTo7 = () => load<RunReport>("classic_run_to_7");
export const classicRunToEnd = () => load<RunReport>("classic_run_to_end");
export const classicPatchMinconf = () => load<InvalidationReport>("classic_patch_minconf");
export const classicResume = () => load<RunReport>("classic_resume");
export const snapshotNode5 = () => load<SnapshotDoc>("snapshot_node5");
export const snapshotNode13 = () => load<SnapshotDoc>("snapshot_node13");
export const caqCreated = () => load<SessionResource>("caq_created");
export const caqRunToEnd = () => load<RunReport>("caq_run_to_end");
