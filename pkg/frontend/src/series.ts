/** Series transforms applied before plotting. */

/** Mean of the last min(t+1, window) values at each index t. */
export function trailingWindowAverage(values: number[], window = 15): number[] {
  const out = new Array<number>(values.length);
  let sum = 0;
  for (let t = 0; t < values.length; t++) {
    sum += values[t];
    if (t >= window) {
      sum -= values[t - window];
    }
    out[t] = sum / Math.min(t + 1, window);
  }
  return out;
}
