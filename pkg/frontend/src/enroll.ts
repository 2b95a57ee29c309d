/**
 * Enrollment flows: uploading a person's images, and promoting a detected
 * intruder to the known list. The enrollment record is written only after
 * every image has landed; partial failures stay visible and retryable.
 */

import { ApiError, BrokerClient } from "./api.js";
import { isoUtc } from "./canonical.js";
import { UploadDraft } from "./state.js";

export const PGM_CONTENT_TYPE = "image/x-portable-graymap";
const ENROLLMENTS_PATH = "/Enrollments";

export interface UploadOutcome {
  name: string;
  ok: boolean;
  error?: string;
}

export interface EnrollmentResult {
  folder: string;
  outcomes: UploadOutcome[];
  failed: number;
  pushId: string | null;
}

export async function uploadImage(
  client: BrokerClient,
  folder: string,
  name: string,
  data: Uint8Array,
): Promise<UploadOutcome> {
  try {
    await client.storagePut(folder, name, data, PGM_CONTENT_TYPE);
    return { name, ok: true };
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      // already uploaded on a previous attempt: that is success for a retry
      return { name, ok: true };
    }
    return { name, ok: false, error: err instanceof Error ? err.message : String(err) };
  }
}

export async function writeEnrollmentRecord(
  client: BrokerClient,
  folder: string,
): Promise<string> {
  return client.dbPush(ENROLLMENTS_PATH, {
    folder,
    timestamp: isoUtc(new Date()),
  });
}

export async function submitEnrollment(
  client: BrokerClient,
  draft: UploadDraft,
): Promise<EnrollmentResult> {
  const nameError = draft.nameError();
  if (nameError) throw new Error(nameError);
  if (draft.images.length === 0) throw new Error("at least one image is required");

  const outcomes: UploadOutcome[] = [];
  for (const image of draft.images) {
    outcomes.push(await uploadImage(client, draft.name, image.name, image.data));
  }
  const failed = outcomes.filter((o) => !o.ok).length;
  const pushId = failed === 0 ? await writeEnrollmentRecord(client, draft.name) : null;
  return { folder: draft.name, outcomes, failed, pushId };
}

/** Retry exactly the failed uploads of a previous submission. */
export async function retryFailedUploads(
  client: BrokerClient,
  draft: UploadDraft,
  previous: EnrollmentResult,
): Promise<EnrollmentResult> {
  const outcomes: UploadOutcome[] = [];
  for (const [i, outcome] of previous.outcomes.entries()) {
    if (outcome.ok) {
      outcomes.push(outcome);
      continue;
    }
    const image = draft.images[i];
    outcomes.push(
      image
        ? await uploadImage(client, draft.name, image.name, image.data)
        : { name: outcome.name, ok: false, error: "image no longer staged" },
    );
  }
  const failed = outcomes.filter((o) => !o.ok).length;
  const pushId =
    previous.pushId ?? (failed === 0 ? await writeEnrollmentRecord(client, draft.name) : null);
  return { folder: draft.name, outcomes, failed, pushId };
}

export interface IntrusionRecord {
  push_id: string;
  imageUrl: string;
  timestamp: string;
  confidence?: number;
}

export class MergeConfirmationRequired extends Error {
  constructor(public folder: string) {
    super(`person ${folder} already exists; confirm merging into their folder`);
  }
}

/**
 * Enroll the intrusion picture under a person's name so the next
 * sync/retrain stops alerting on that face. When the name already has a
 * folder, the caller must pass confirmMerge (the UI asks first).
 */
export async function markKnown(
  client: BrokerClient,
  intrusion: IntrusionRecord,
  name: string,
  opts: { confirmMerge?: boolean } = {},
): Promise<EnrollmentResult> {
  if (!name.trim() || name.includes("/")) throw new Error(`invalid person name ${name}`);
  const bytes = await client.storageGetUrl(intrusion.imageUrl);
  if (!opts.confirmMerge && (await client.storageFolderExists(name))) {
    throw new MergeConfirmationRequired(name);
  }
  const objectName = `intrusion-${intrusion.push_id}.pgm`;
  const outcome = await uploadImage(client, name, objectName, bytes);
  if (!outcome.ok) {
    return { folder: name, outcomes: [outcome], failed: 1, pushId: null };
  }
  const pushId = await writeEnrollmentRecord(client, name);
  return { folder: name, outcomes: [outcome], failed: 0, pushId };
}
