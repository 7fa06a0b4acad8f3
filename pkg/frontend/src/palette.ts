/**
 * Class colors and the entropy -> opacity display mapping.
 *
 * Both must stay byte-for-byte in sync with the server's PNG renderer so the
 * canvas and the exported image agree.
 */

export const PALETTE = [
  "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
] as const;

export const ALPHA_FLOOR = 0.15;

export function classColor(label: number): string {
  return PALETTE[label % PALETTE.length];
}

/** Opacity for a cell: 1 at zero entropy, ALPHA_FLOOR at entropy ln(C). */
export function entropyAlpha(entropy: number, classCount: number): number {
  const lnC = classCount > 1 ? Math.log(classCount) : 1;
  const certainty = 1 - Math.min(Math.max(entropy / lnC, 0), 1);
  return ALPHA_FLOOR + (1 - ALPHA_FLOOR) * certainty;
}

/** Certainty shown next to a probe result: 1 - H / ln(C). */
export function certainty(entropy: number, classCount: number): number {
  const lnC = classCount > 1 ? Math.log(classCount) : 1;
  return 1 - Math.min(Math.max(entropy / lnC, 0), 1);
}
