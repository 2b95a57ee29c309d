/** Session and upload-draft state, kept free of DOM concerns. */

export interface SessionState {
  token: string | null;
  email: string | null;
  subscribed: boolean;
}

export function emptySession(): SessionState {
  return { token: null, email: null, subscribed: false };
}

export function isAuthenticated(session: SessionState): boolean {
  return session.token !== null;
}

/** Routes reachable without a token; everything else redirects to login. */
export function resolveRoute(session: SessionState, requested: string): string {
  const open = new Set(["login", "register"]);
  if (!isAuthenticated(session) && !open.has(requested)) return "login";
  return requested;
}

export interface DraftImage {
  name: string;
  data: Uint8Array;
}

/** Images staged for one person, browsable with next/previous. */
export class UploadDraft {
  name = "";
  images: DraftImage[] = [];
  index = 0;

  addImage(image: DraftImage): void {
    this.images.push(image);
    this.index = this.images.length - 1;
  }

  current(): DraftImage | null {
    return this.images[this.index] ?? null;
  }

  hasNext(): boolean {
    return this.index < this.images.length - 1;
  }

  hasPrevious(): boolean {
    return this.index > 0;
  }

  next(): void {
    if (this.hasNext()) this.index += 1;
  }

  previous(): void {
    if (this.hasPrevious()) this.index -= 1;
  }

  nameError(): string | null {
    if (!this.name.trim()) return "name must be non-empty";
    if (this.name.includes("/")) return "name may not contain '/'";
    return null;
  }

  canSubmit(): boolean {
    return this.nameError() === null && this.images.length >= 1;
  }
}
