/** Spawns the real broker and device CLI (python) for integration tests. */

import { ChildProcess, execFile, spawn } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";

const execFileAsync = promisify(execFile);

export const PYTHON = process.env.PIBASE_PYTHON ?? "python3";
export const REPO_ROOT = join(__dirname, "..", "..");

export interface BrokerProcess {
  url: string;
  dataDir: string;
  stop: () => Promise<void>;
}

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export async function startBroker(dataDir?: string): Promise<BrokerProcess> {
  const dir = dataDir ?? tempDir("pibase-broker-");
  const child: ChildProcess = spawn(
    PYTHON,
    ["-m", "pibase.cli", "serve", "--port", "0", "--data-dir", dir],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );

  const url = await new Promise<string>((resolve, reject) => {
    let buffer = "";
    const timer = setTimeout(() => reject(new Error("broker did not start")), 30_000);
    child.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const line = buffer.split("\n").find((l) => l.includes('"serving"'));
      if (line) {
        clearTimeout(timer);
        resolve((JSON.parse(line) as { url: string }).url);
      }
    });
    child.stderr!.on("data", () => {});
    child.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`broker exited early with code ${code}`));
    });
  });

  return {
    url,
    dataDir: dir,
    stop: () =>
      new Promise<void>((resolve) => {
        child.once("exit", () => resolve());
        child.kill("SIGINT");
        setTimeout(() => {
          child.kill("SIGKILL");
          resolve();
        }, 5_000).unref();
      }),
  };
}

export interface CliResult {
  code: number;
  stdout: string;
  stderr: string;
}

export async function runCli(args: string[]): Promise<CliResult> {
  try {
    const { stdout, stderr } = await execFileAsync(
      PYTHON,
      ["-m", "pibase.cli", ...args],
      { cwd: REPO_ROOT, maxBuffer: 64 * 1024 * 1024 },
    );
    return { code: 0, stdout, stderr };
  } catch (err) {
    const failure = err as { code?: number; stdout?: string; stderr?: string };
    return {
      code: failure.code ?? 1,
      stdout: failure.stdout ?? "",
      stderr: failure.stderr ?? "",
    };
  }
}

export interface FixtureManifest {
  cascade: string;
  motion: string;
  frames: string;
  burst_count: number;
  known_person: string;
  enroll_images: string[];
  intruder_frame: string;
  detect: { scale_factor: number; step: number; min_neighbors: number; min_size: number };
  threshold: number;
}

export async function buildFixture(dest: string): Promise<FixtureManifest> {
  const { stdout } = await execFileAsync(
    PYTHON,
    ["-m", "pibase.fixtures", dest],
    { cwd: REPO_ROOT, maxBuffer: 16 * 1024 * 1024 },
  );
  return JSON.parse(stdout.trim()) as FixtureManifest;
}

export function detectFlags(manifest: FixtureManifest): string[] {
  return [
    "--min-neighbors", String(manifest.detect.min_neighbors),
    "--step", String(manifest.detect.step),
    "--scale-factor", String(manifest.detect.scale_factor),
    "--min-size", String(manifest.detect.min_size),
    "--threshold", String(manifest.threshold),
  ];
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
