/** Action/observation payload codec, mirroring the environment bridge:
 * tril_L = Ns real diagonal entries then the strictly-lower triangle
 * row-major as re, im floats; U as row-major [re, im] pairs. The flat
 * action vector the policy emits uses the same order. */

export interface Dims {
  K: number;
  Nr: number;
  Ns: number;
  I_card: number;
  N_nRT: number;
}

export interface ActPayload {
  k: number;
  tril_L: number[];
  U: number[][];
}

export function actDim(nr: number, ns: number): number {
  return ns * ns + 2 * nr * ns;
}

export function obsDim(nr: number, ns: number, iCard: number): number {
  return 2 * iCard * nr * ns;
}

/** Flat action vector -> wire payload. Diagonal entries must be > 0. */
export function encodeAction(k: number, vec: ArrayLike<number>, nr: number, ns: number): ActPayload {
  const need = actDim(nr, ns);
  if (vec.length !== need) throw new Error(`action length ${vec.length}, need ${need}`);
  const tril: number[] = [];
  for (let i = 0; i < ns * ns; i++) tril.push(vec[i]);
  const u: number[][] = [];
  for (let i = 0; i < nr * ns; i++) {
    u.push([vec[ns * ns + 2 * i], vec[ns * ns + 2 * i + 1]]);
  }
  return { k, tril_L: tril, U: u };
}

/** Wire payload -> flat action vector (used to replay logged actions). */
export function decodeAction(payload: ActPayload, nr: number, ns: number): Float64Array {
  const out = new Float64Array(actDim(nr, ns));
  if (payload.tril_L.length !== ns * ns) throw new Error("bad tril_L length");
  if (payload.U.length !== nr * ns) throw new Error("bad U length");
  for (let i = 0; i < ns * ns; i++) out[i] = payload.tril_L[i];
  for (let i = 0; i < nr * ns; i++) {
    out[ns * ns + 2 * i] = payload.U[i][0];
    out[ns * ns + 2 * i + 1] = payload.U[i][1];
  }
  return out;
}

export function validAction(vec: ArrayLike<number>, nr: number, ns: number): boolean {
  if (vec.length !== actDim(nr, ns)) return false;
  for (let i = 0; i < vec.length; i++) if (!Number.isFinite(vec[i])) return false;
  for (let i = 0; i < ns; i++) if (!(vec[i] > 0)) return false;
  return true;
}

/** Observation payload ([re, im] pairs) -> flat real vector. */
export function flattenObs(pairs: number[][]): Float64Array {
  const out = new Float64Array(2 * pairs.length);
  for (let i = 0; i < pairs.length; i++) {
    out[2 * i] = pairs[i][0];
    out[2 * i + 1] = pairs[i][1];
  }
  return out;
}
