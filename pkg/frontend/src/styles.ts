/** Fixed palette and line styles; dashed marks reference/uncontrolled curves. */

export const PALETTE: Record<string, string> = {
  "gpc-simplex": "#1f77b4",
  "full-prevention": "#ff7f0e",
  "no-prevention": "#2ca02c",
  "best-response": "#ff7f0e",
  "uniform-default": "#2ca02c",
  reference: "#d62728",
  susceptible: "#1f77b4",
  infected: "#bcbd22",
  capacity: "#9467bd",
  series1: "#1f77b4",
  series2: "#ff7f0e",
  series3: "#2ca02c",
};

export function colorFor(label: string): string {
  for (const key of Object.keys(PALETTE)) {
    if (label.includes(key)) {
      return PALETTE[key];
    }
  }
  return "#333333";
}
