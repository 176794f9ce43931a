/** Session ids live in the URL so what-if sessions are shareable: reloading
 * the page replays the persisted log under the same id. */

export function randomSessionId(randomValue: number = Math.random()): string {
  return "s" + randomValue.toString(36).slice(2, 10).padEnd(8, "0");
}

export function sessionFromUrl(search: string): string | null {
  const params = new URLSearchParams(search);
  const session = params.get("session");
  return session && /^[A-Za-z0-9_-]{1,64}$/.test(session) ? session : null;
}

export function urlWithSession(search: string, session: string): string {
  const params = new URLSearchParams(search);
  params.set("session", session);
  return "?" + params.toString();
}
